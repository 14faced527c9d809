#include "lanp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace lanp {

namespace {

// draw order is fixed (b1, b2, xs, noise) so suites replay exactly
std::vector<double> draw_xs(RngStream& rng, int n, double tau, bool even_spacing) {
    std::vector<double> xs((std::size_t)n);
    if (even_spacing) {
        for (int i = 0; i < n; ++i) xs[(std::size_t)i] = (double)(i + 1) * tau / (double)n;
    } else {
        for (int i = 0; i < n; ++i) xs[(std::size_t)i] = (1.0 - rng.uniform01()) * tau;
        std::sort(xs.begin(), xs.end());
    }
    return xs;
}

GeneratedSignal assemble(RngStream& rng, int n_points, bool noiseless, double noise_sd,
                         const std::vector<double>& xs,
                         std::function<double(double)> truth) {
    GeneratedSignal out;
    out.truth = std::move(truth);
    out.signal.obs.reserve(xs.size());
    out.noise.reserve(xs.size());
    for (double x : xs) {
        double eps = noiseless ? 0.0 : rng.normal(0.0, noise_sd);
        out.noise.push_back(eps);
        out.signal.obs.push_back({x, out.truth(x) + eps});
    }
    (void)n_points;
    return out;
}

} // namespace

GeneratedSignal gen_sim1_signal(int group, RngStream& rng, int n_points, bool noiseless,
                                bool even_spacing, const Sim1Options& opts) {
    if (group != 0 && group != 1) throw DomainError("gen_sim1_signal: group must be 0 or 1");
    if (n_points < 2) throw DomainError("gen_sim1_signal: need at least 2 points");
    const double b1 = rng.uniform(0.35, 0.45);
    const double b2 = rng.uniform(0.0, 3.0);
    std::vector<double> xs = draw_xs(rng, n_points, opts.domain_end, even_spacing);
    const bool fix = opts.continuity_fix;
    std::function<double(double)> truth;
    if (group == 0) {
        truth = [b1, b2](double x) { return 0.3 * x * x - 2.0 * std::sin(b1 * M_PI * x) + b2; };
    } else {
        truth = [b1, b2, fix](double x) {
            if (x <= 3.0) return 0.3 * x * x - 2.0 * std::sin(b1 * M_PI * x) + b2;
            const double lead = fix ? 1.8 * x : 1.8 * x * x;
            return lead - 2.0 * std::sin(b1 * M_PI * x) + b2 - 2.7;
        };
    }
    GeneratedSignal out = assemble(rng, n_points, noiseless, opts.noise_sd, xs, std::move(truth));
    out.b1 = b1;
    out.b2 = b2;
    out.signal.label = group;
    return out;
}

GeneratedSignal gen_sim2_signal(int group, RngStream& rng, int n_points, bool noiseless,
                                bool even_spacing, const Sim2Options& opts) {
    if (group != 0 && group != 1) throw DomainError("gen_sim2_signal: group must be 0 or 1");
    if (opts.delta <= 0.0) throw DomainError("gen_sim2_signal: delta must be positive");
    if (n_points < 2) throw DomainError("gen_sim2_signal: need at least 2 points");
    const double b1 = rng.uniform(0.5, 1.0 + opts.delta);
    const double b2 = rng.uniform(0.0, 2.0 + 2.0 * opts.delta);
    std::vector<double> xs = draw_xs(rng, n_points, opts.domain_end, even_spacing);
    std::function<double(double)> truth;
    if (group == 0)
        truth = [b1, b2](double x) { return b1 * std::cos(x) + 1.5 * x + b2; };
    else
        truth = [b1, b2](double x) { return b1 * std::sin(x) + 1.5 * x + b2; };
    GeneratedSignal out = assemble(rng, n_points, noiseless, opts.noise_sd, xs, std::move(truth));
    out.b1 = b1;
    out.b2 = b2;
    out.signal.label = group;
    return out;
}

SplitSet alpha_stage(const Signal& signal, double alpha, double domain_end) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha_stage: alpha must lie in (0,1)");
    if (signal.obs.empty()) throw DomainError("alpha_stage: empty signal");
    SplitSet split;
    split.contexts = observations_up_to(signal, alpha * domain_end);
    split.targets = signal.obs;
    return split;
}

SimSetting parse_setting(const std::string& name) {
    if (name == "sim1") return SimSetting::kSim1;
    if (name == "sim2") return SimSetting::kSim2;
    throw ConfigError("unknown setting '" + name + "' (expected sim1 or sim2)");
}

TestSuite gen_test_suite(SimSetting setting, RngStream& rng, int per_group, int n_points,
                         double delta, bool continuity_fix) {
    TestSuite suite;
    for (int group = 0; group < 2; ++group) {
        for (int i = 0; i < per_group; ++i) {
            GeneratedSignal gs;
            if (setting == SimSetting::kSim1) {
                Sim1Options opts;
                opts.continuity_fix = continuity_fix;
                gs = gen_sim1_signal(group, rng, n_points, false, true, opts);
            } else {
                Sim2Options opts;
                opts.delta = delta;
                gs = gen_sim2_signal(group, rng, n_points, false, true, opts);
            }
            char id[32];
            std::snprintf(id, sizeof(id), "test_g%d_%02d", group + 1, i);
            gs.signal.unit_id = id;
            suite.units.push_back(std::move(gs));
        }
    }
    return suite;
}

StudyPool make_sim2_study_pool(double delta, RngStream& rng, int per_group,
                               int drop_per_group, int n_points) {
    if (drop_per_group > per_group)
        throw DomainError("make_sim2_study_pool: cannot drop more labels than signals");
    StudyPool pool;
    Sim2Options opts;
    opts.delta = delta;
    for (int group = 0; group < 2; ++group) {
        std::vector<Signal> members;
        for (int i = 0; i < per_group; ++i) {
            GeneratedSignal gs = gen_sim2_signal(group, rng, n_points, false, false, opts);
            char id[32];
            std::snprintf(id, sizeof(id), "g%d_%02d", group + 1, i);
            gs.signal.unit_id = id;
            members.push_back(gs.signal);
            pool.all.push_back(gs.signal);
        }
        auto dropped = rng.sample_without_replacement((std::size_t)per_group,
                                                      (std::size_t)drop_per_group);
        std::vector<bool> drop((std::size_t)per_group, false);
        for (std::size_t d : dropped) drop[d] = true;
        for (int i = 0; i < per_group; ++i) {
            Signal s = members[(std::size_t)i];
            if (drop[(std::size_t)i]) {
                s.label.reset();
                pool.unlabeled.push_back(std::move(s));
            } else {
                pool.labeled.push_back(std::move(s));
            }
        }
    }
    return pool;
}

Sim1Source::Sim1Source(double gamma, bool gamma_exact, ContextRule rule, int per_group,
                       int n_points, Sim1Options opts)
    : gamma_(gamma), gamma_exact_(gamma_exact), rule_(rule), per_group_(per_group),
      n_points_(n_points), opts_(opts) {
    if (gamma < 0.0 || gamma > 1.0) throw DomainError("Sim1Source: gamma must lie in [0,1]");
    if (per_group < 1) throw DomainError("Sim1Source: per_group must be >= 1");
}

Batch Sim1Source::next(RngStream& rng) {
    std::vector<Signal> signals;
    for (int group = 0; group < 2; ++group)
        for (int i = 0; i < per_group_; ++i)
            signals.push_back(
                gen_sim1_signal(group, rng, n_points_, false, false, opts_).signal);

    const std::size_t total = signals.size();
    if (gamma_exact_) {
        const std::size_t n_drop =
            (std::size_t)std::llround((1.0 - gamma_) * (double)total);
        for (std::size_t i : rng.sample_without_replacement(total, n_drop))
            signals[i].label.reset();
    } else {
        for (Signal& s : signals)
            if (rng.uniform01() < 1.0 - gamma_) s.label.reset();
    }

    Batch batch;
    for (const Signal& s : signals)
        batch.episodes.push_back({sample_contexts(s, rule_, rng).split, s.label});
    return batch;
}

} // namespace lanp
