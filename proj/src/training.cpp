#include "lanp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>

#include "lanp/parallel.hpp"

namespace lanp {

void ContextRule::validate() const {
    if (tau <= 0.0) throw DomainError("ContextRule: tau must be positive");
    if (m_min < 1 || m_min > m_max) throw DomainError("ContextRule: need 1 <= m_min <= m_max");
    if (max_attempts < 1) throw DomainError("ContextRule: max_attempts must be >= 1");
}

void TrainConfig::validate() const {
    if (iterations < 0) throw DomainError("TrainConfig: iterations must be >= 0");
    if (batch.labeled < 0 || batch.unlabeled < 0 || batch.synthetic < 0)
        throw DomainError("TrainConfig: batch sizes must be >= 0");
    if (batch.labeled + batch.unlabeled + batch.synthetic == 0)
        throw DomainError("TrainConfig: at least one batch size must be positive");
    if (gamma < 0.0 || gamma > 1.0) throw DomainError("TrainConfig: gamma must lie in [0,1]");
}

ContextSample sample_contexts(const Signal& signal, const ContextRule& rule, RngStream& rng) {
    rule.validate();
    const std::size_t n = signal.obs.size();
    if (n < (std::size_t)rule.m_min + 1)
        throw DomainError("sample_contexts: signal '" + signal.unit_id + "' too short");

    ContextSample out;
    std::vector<std::size_t> eligible;
    for (int attempt = 0; attempt < rule.max_attempts; ++attempt) {
        out.tau_star = rng.uniform(0.0, rule.tau);
        out.attempts = attempt + 1;
        eligible.clear();
        for (std::size_t i = 0; i < n; ++i)
            if (signal.obs[i].x <= out.tau_star) eligible.push_back(i);
        if (eligible.size() >= (std::size_t)rule.m_min) break;
    }
    if (eligible.size() < (std::size_t)rule.m_min) {
        // attempt cap hit: take the m_min earliest observations
        eligible.clear();
        for (std::size_t i = 0; i < (std::size_t)rule.m_min; ++i) eligible.push_back(i);
        out.tau_star = std::max(out.tau_star, signal.obs[(std::size_t)rule.m_min - 1].x);
    }

    const std::size_t m =
        (std::size_t)rule.m_min + rng.uniform_int((std::uint64_t)(rule.m_max - rule.m_min + 1));
    const std::size_t k = std::min({m, eligible.size(), n - 1});
    std::vector<std::size_t> picks = rng.sample_without_replacement(eligible.size(), k);
    std::vector<bool> is_context(n, false);
    for (std::size_t p : picks) is_context[eligible[p]] = true;
    for (std::size_t i = 0; i < n; ++i)
        (is_context[i] ? out.split.contexts : out.split.targets).push_back(signal.obs[i]);
    return out;
}

Batch assemble_batch(std::span<const Signal> labeled, std::span<const Signal> unlabeled,
                     std::span<const Signal> synthetic, const BatchSizes& sizes,
                     const ContextRule& rule, RngStream& rng) {
    if (labeled.empty() && unlabeled.empty() && synthetic.empty())
        throw DataError("assemble_batch: all pools empty");
    auto pick = [&](std::span<const Signal> pool, int count, const char* what) {
        if ((std::size_t)count > pool.size())
            throw DataError(std::string("assemble_batch: ") + what + " pool smaller than batch");
        return rng.sample_without_replacement(pool.size(), (std::size_t)count);
    };
    Batch batch;
    for (std::size_t i : pick(labeled, sizes.labeled, "labeled")) {
        const Signal& s = labeled[i];
        if (!s.label) throw DataError("assemble_batch: unlabeled signal in labeled pool");
        batch.episodes.push_back({sample_contexts(s, rule, rng).split, s.label});
    }
    for (std::size_t i : pick(unlabeled, sizes.unlabeled, "unlabeled"))
        batch.episodes.push_back({sample_contexts(unlabeled[i], rule, rng).split, std::nullopt});
    for (std::size_t i : pick(synthetic, sizes.synthetic, "synthetic"))
        batch.episodes.push_back({sample_contexts(synthetic[i], rule, rng).split, std::nullopt});
    return batch;
}

PoolSource::PoolSource(std::vector<Signal> labeled, std::vector<Signal> unlabeled,
                       BatchSizes sizes, ContextRule rule, SyntheticGenerator synthetic)
    : labeled_(std::move(labeled)), unlabeled_(std::move(unlabeled)), sizes_(sizes),
      rule_(rule), synthetic_(std::move(synthetic)) {}

Batch PoolSource::next(RngStream& rng) {
    std::vector<Signal> synth;
    if (sizes_.synthetic > 0) {
        if (!synthetic_) throw DataError("PoolSource: synthetic batch requested without generator");
        synth = synthetic_(sizes_.synthetic, rng);
    }
    return assemble_batch(labeled_, unlabeled_, synth, sizes_, rule_, rng);
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg, BatchSource& source,
                  const std::string& config_echo, std::ostream* log_stream) {
    model_cfg.validate();
    cfg.validate();

    RngStream root(cfg.seed, 0);
    RngStream data_rng = root.substream(1);
    RngStream noise_rng = root.substream(2);

    TrainResult result{LanpModel(model_cfg, cfg.seed), {}, {}, 0};
    LanpModel& model = result.model;
    AdamState adam(cfg.adam);
    const int workers = cfg.threads > 0 ? cfg.threads : thread_count();
    const auto t0 = std::chrono::steady_clock::now();
    int consecutive_aborts = 0;

    auto make_checkpoint = [&](std::int64_t iteration) {
        Checkpoint ckpt;
        ckpt.config_text = config_echo;
        ckpt.params = model.params();
        ckpt.iteration = iteration;
        ckpt.rng_state = "data=" + data_rng.state_hex() + ",noise=" + noise_rng.state_hex();
        return ckpt;
    };

    for (std::int64_t it = 1; it <= cfg.iterations; ++it) {
        Batch batch = source.next(data_rng);
        const std::size_t n_ep = batch.episodes.size();
        if (n_ep == 0) throw DataError("train: source produced an empty batch");
        std::vector<Tensor> noises;
        noises.reserve(n_ep);
        for (std::size_t e = 0; e < n_ep; ++e)
            noises.push_back(noise_rng.normal_row((std::size_t)model_cfg.d_lat));

        std::vector<GradMap> episode_grads(n_ep);
        std::vector<double> episode_obj(n_ep, 0.0);
        std::vector<std::string> episode_error(n_ep);
        parallel_chunks(n_ep, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t e = lo; e < hi; ++e) {
                try {
                    Graph g;
                    Ctx ctx{g, model.params()};
                    Value obj = model.build_episode_objective(ctx, batch.episodes[e],
                                                              noises[e], model_cfg.lambda);
                    episode_obj[e] = obj.scalar();
                    g.backward(g.neg(obj));
                    g.for_each_param_grad([&](const std::string& name, const Tensor& grad) {
                        episode_grads[e].emplace(name, grad);
                    });
                } catch (const NumericError& err) {
                    episode_error[e] = err.what();
                }
            }
        });

        bool aborted = false;
        std::string diagnostic;
        for (std::size_t e = 0; e < n_ep && !aborted; ++e) {
            if (!episode_error[e].empty()) {
                aborted = true;
                diagnostic = episode_error[e];
            }
        }
        double objective = 0.0;
        GradMap total;
        if (!aborted) {
            for (std::size_t e = 0; e < n_ep; ++e) {
                objective += episode_obj[e];
                for (auto& [name, grad] : episode_grads[e]) {
                    auto it2 = total.find(name);
                    if (it2 == total.end()) {
                        total.emplace(name, grad);
                    } else {
                        Tensor& acc = it2->second;
                        for (std::size_t i = 0; i < grad.numel(); ++i) acc[i] += grad[i];
                    }
                }
            }
            // parameters without gradient this step (none expected) get zeros
            for (const auto& [name, p] : model.params())
                if (!total.count(name)) total.emplace(name, Tensor::zeros(p.rows(), p.cols()));
            try {
                adam_step(model.params(), total, adam);
            } catch (const NumericError& err) {
                aborted = true;
                diagnostic = err.what();
            }
        }

        if (aborted) {
            ++result.aborted_steps;
            if (++consecutive_aborts >= 3)
                throw NumericError("train: three consecutive aborted steps (" + diagnostic + ")");
            if (log_stream)
                (*log_stream) << "iter " << it << " aborted: " << diagnostic << "\n";
            continue;
        }
        consecutive_aborts = 0;

        if (cfg.log_interval > 0 && (it % cfg.log_interval == 0 || it == 1)) {
            double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
            result.log.push_back({it, objective, ms});
            if (log_stream) (*log_stream) << it << "," << objective << "," << ms << "\n";
        }
        if (cfg.checkpoint_interval > 0 && !cfg.checkpoint_path.empty() &&
            it % cfg.checkpoint_interval == 0)
            save_checkpoint(make_checkpoint(it), cfg.checkpoint_path);
    }

    model.set_trained_iterations(cfg.iterations);
    result.checkpoint = make_checkpoint(cfg.iterations);
    if (!cfg.checkpoint_path.empty()) save_checkpoint(result.checkpoint, cfg.checkpoint_path);
    return result;
}

} // namespace lanp
