#pragma once
#include <functional>
#include <string>
#include <vector>

#include "lanp/training.hpp"

namespace lanp {

// Simulated condition-monitoring signal plus its noiseless truth and the
// noise draws that were added (kept for generator bookkeeping checks).
struct GeneratedSignal {
    Signal signal;
    std::function<double(double)> truth;
    std::vector<double> noise;
    double b1 = 0.0;
    double b2 = 0.0;
};

struct Sim1Options {
    double noise_sd = 0.03;
    double domain_end = 10.0;
    // substitute 1.8x for 1.8x^2 in the late group-II piece so the pieces
    // meet at x=3 (the verbatim form jumps by 10.8)
    bool continuity_fix = false;
};

struct Sim2Options {
    double delta = 2.0;
    double noise_sd = 0.03;
    double domain_end = 10.0;
};

// Two-group quadratic/sine generator; both groups share the early trend on
// (0,3] and group II switches to the steep branch afterwards.
GeneratedSignal gen_sim1_signal(int group, RngStream& rng, int n_points, bool noiseless,
                                bool even_spacing, const Sim1Options& opts = {});

// cos/sin-plus-trend generator; delta widens the coefficient spread.
GeneratedSignal gen_sim2_signal(int group, RngStream& rng, int n_points, bool noiseless,
                                bool even_spacing, const Sim2Options& opts = {});

// Online-stage split: contexts are the observations in the first
// 100*alpha % of the domain (at least the earliest one), targets are all
// observations.
SplitSet alpha_stage(const Signal& signal, double alpha, double domain_end);

enum class SimSetting { kSim1, kSim2 };
SimSetting parse_setting(const std::string& name); // "sim1" | "sim2"

struct TestSuite {
    std::vector<GeneratedSignal> units; // labeled, evenly spaced observations
    double domain_end = 10.0;
};

TestSuite gen_test_suite(SimSetting setting, RngStream& rng, int per_group = 20,
                         int n_points = 20, double delta = 2.0,
                         bool continuity_fix = false);

// Fixed partially-labeled pool for the augmentation study: per_group signals
// per group with drop_per_group labels removed at random within each group.
struct StudyPool {
    std::vector<Signal> labeled;
    std::vector<Signal> unlabeled;
    std::vector<Signal> all; // originals in generation order, labels intact
};

StudyPool make_sim2_study_pool(double delta, RngStream& rng, int per_group = 8,
                               int drop_per_group = 4, int n_points = 45);

// Fresh batch of sim1 signals every call: per_group per group, labels
// dropped for round((1-gamma)*batch) signals (exact-count mode) or
// per-signal with probability 1-gamma.
class Sim1Source : public BatchSource {
public:
    Sim1Source(double gamma, bool gamma_exact, ContextRule rule, int per_group = 8,
               int n_points = 45, Sim1Options opts = {});

    Batch next(RngStream& rng) override;

private:
    double gamma_;
    bool gamma_exact_;
    ContextRule rule_;
    int per_group_;
    int n_points_;
    Sim1Options opts_;
};

} // namespace lanp
