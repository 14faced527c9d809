#pragma once
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "lanp/model.hpp"

namespace lanp {

// Context sampling rule: tau* ~ unif(0, tau) picks the observation window,
// the context count is uniform on {m_min..m_max}.
struct ContextRule {
    double tau = 10.0;
    int m_min = 3;
    int m_max = 14;
    int max_attempts = 100;

    void validate() const;
};

struct ContextSample {
    SplitSet split;
    double tau_star = 0.0;
    int attempts = 0;
};

// Draw tau* ~ unif(0, tau); eligible = observations with x <= tau*; redraw
// while fewer than m_min are eligible (up to the attempt cap, then fall back
// to the m_min earliest). Contexts are min(m, |eligible|, n-1) eligible
// points sampled without replacement with m ~ unif{m_min..m_max}; targets
// are all remaining observations.
ContextSample sample_contexts(const Signal& signal, const ContextRule& rule, RngStream& rng);

struct Batch {
    std::vector<Episode> episodes;
};

struct BatchSizes {
    int labeled = 8;
    int unlabeled = 8;
    int synthetic = 0;
};

// Select signals from each pool (without replacement) and split every one
// into an episode; synthetic signals always enter unlabeled.
Batch assemble_batch(std::span<const Signal> labeled, std::span<const Signal> unlabeled,
                     std::span<const Signal> synthetic, const BatchSizes& sizes,
                     const ContextRule& rule, RngStream& rng);

class BatchSource {
public:
    virtual ~BatchSource() = default;
    virtual Batch next(RngStream& rng) = 0;
};

// Fixed pools, with an optional per-batch synthetic generator.
class PoolSource : public BatchSource {
public:
    using SyntheticGenerator = std::function<std::vector<Signal>(int, RngStream&)>;

    PoolSource(std::vector<Signal> labeled, std::vector<Signal> unlabeled, BatchSizes sizes,
               ContextRule rule, SyntheticGenerator synthetic = {});

    Batch next(RngStream& rng) override;

private:
    std::vector<Signal> labeled_, unlabeled_;
    BatchSizes sizes_;
    ContextRule rule_;
    SyntheticGenerator synthetic_;
};

struct TrainConfig {
    std::int64_t iterations = 25000;
    BatchSizes batch;
    double gamma = 1.0;      // labeled fraction when labels are dropped synthetically
    bool gamma_exact = true; // exact count per batch (else per-signal Bernoulli)
    AdamConfig adam;
    std::uint64_t seed = 1;
    std::string checkpoint_path;
    std::int64_t checkpoint_interval = 0; // 0 -> final write only
    std::int64_t log_interval = 100;
    int threads = 0; // 0 -> thread_count()

    void validate() const;
};

struct Checkpoint {
    std::string config_text; // resolved run configuration echo
    ParameterStore params;
    std::int64_t iteration = 0;
    std::string rng_state; // "data=<hex>,noise=<hex>"
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

struct TrainLogRow {
    std::int64_t iteration = 0;
    double objective = 0.0;
    double wallclock_ms = 0.0;
};

struct TrainResult {
    LanpModel model;
    Checkpoint checkpoint;
    std::vector<TrainLogRow> log;
    int aborted_steps = 0;
};

// Maximizes the regularized objective with Adam. Deterministic given
// (configs, data source, seed): batches, episode noise, and the gradient
// reduction order are fixed before any parallel work starts. A non-finite
// loss or gradient aborts the step; three consecutive aborts stop training.
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, BatchSource& source,
                  const std::string& config_echo = {}, std::ostream* log_stream = nullptr);

} // namespace lanp
