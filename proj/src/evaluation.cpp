#include "lanp/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <ostream>

#include <json.hpp>

#include "lanp/csv.hpp"

namespace lanp {

RmseSpec RmseSpec::even(double tau, int n) {
    RmseSpec spec;
    spec.grid.resize((std::size_t)n);
    for (int i = 0; i < n; ++i) spec.grid[(std::size_t)i] = (double)(i + 1) * tau / (double)n;
    return spec;
}

double rmse_curve(const LanpModel& model, std::span<const Observation> contexts,
                  std::optional<int> label, const std::function<double(double)>& truth,
                  const RmseSpec& spec) {
    if (spec.grid.empty()) throw DomainError("rmse_curve: empty evaluation grid");
    for (std::size_t i = 1; i < spec.grid.size(); ++i)
        if (spec.grid[i] <= spec.grid[i - 1])
            throw DomainError("rmse_curve: grid must be strictly increasing");
    std::vector<double> mean = model.predictive_mean(contexts, spec.grid, label);
    double acc = 0.0;
    for (std::size_t i = 0; i < spec.grid.size(); ++i) {
        const double d = mean[i] - truth(spec.grid[i]);
        acc += d * d;
    }
    return std::sqrt(acc / (double)spec.grid.size());
}

double label_accuracy(const LanpModel& model, std::span<const Signal> test_set, double alpha,
                      double domain_end) {
    if (test_set.empty()) throw DomainError("label_accuracy: empty test set");
    std::size_t correct = 0;
    for (const Signal& s : test_set) {
        if (!s.label) throw DataError("label_accuracy: unit '" + s.unit_id + "' has no label");
        SplitSet split = alpha_stage(s, alpha, domain_end);
        auto [pred, probs] = model.predict_label(split.contexts);
        if (pred == *s.label) ++correct;
    }
    return (double)correct / (double)test_set.size();
}

LatencyStats time_online_update(const LanpModel& model, const Signal& signal,
                                std::span<const double> grid, int k, RngStream& rng) {
    LatencyStats stats;
    ParameterStore before = model.params();
    stats.params_unchanged = true;
    std::vector<Observation> contexts;
    for (const Observation& o : signal.obs) {
        contexts.push_back(o);
        const auto t0 = std::chrono::steady_clock::now();
        std::optional<int> label;
        if (model.config().label_aware) label = model.predict_label(contexts).first;
        model.predict_grid(contexts, grid, k, label, rng);
        const auto t1 = std::chrono::steady_clock::now();
        stats.per_update_ms.push_back(
            std::chrono::duration<double, std::milli>(t1 - t0).count());
        if (!model.params().bitwise_equal(before)) stats.params_unchanged = false;
    }
    for (double ms : stats.per_update_ms) {
        stats.mean_ms += ms / (double)stats.per_update_ms.size();
        stats.max_ms = std::max(stats.max_ms, ms);
    }
    return stats;
}

namespace {

std::string cell(double v) { return std::isnan(v) ? "" : format_double(v); }

struct GroupKey {
    std::string condition, model;
    double gamma, alpha;
    bool operator<(const GroupKey& o) const {
        auto num = [](double v) { return std::isnan(v) ? -1e308 : v; };
        return std::tie(condition, model) < std::tie(o.condition, o.model) ||
               (condition == o.condition && model == o.model &&
                (num(gamma) < num(o.gamma) ||
                 (num(gamma) == num(o.gamma) && num(alpha) < num(o.alpha))));
    }
};

} // namespace

void ExperimentReport::append(const ExperimentReport& other) {
    rows.insert(rows.end(), other.rows.begin(), other.rows.end());
}

void ExperimentReport::write_csv(const std::string& path) const {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << "condition,model,gamma,alpha,seed,rmse_group1,rmse_group2,label_acc,latency_ms\n";
    for (const ReportRow& r : rows) {
        f << r.condition << ',' << r.model << ',' << cell(r.gamma) << ',' << cell(r.alpha)
          << ',' << r.seed << ',' << cell(r.rmse_group1) << ',' << cell(r.rmse_group2) << ','
          << cell(r.label_acc) << ',' << cell(r.latency_ms) << '\n';
    }
    if (!f) throw IoError("write failed for '" + path + "'");
}

void ExperimentReport::write_json(const std::string& path) const {
    using nlohmann::json;
    std::map<GroupKey, std::vector<const ReportRow*>> groups;
    for (const ReportRow& r : rows) groups[{r.condition, r.model, r.gamma, r.alpha}].push_back(&r);

    auto stats = [](const std::vector<const ReportRow*>& members, double ReportRow::*field) {
        std::vector<double> vals;
        for (const ReportRow* r : members)
            if (!std::isnan(r->*field)) vals.push_back(r->*field);
        json j;
        if (vals.empty()) return j;
        double mean = 0.0;
        for (double v : vals) mean += v / (double)vals.size();
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        double sd = vals.size() > 1 ? std::sqrt(var / (double)(vals.size() - 1)) : 0.0;
        j["mean"] = mean;
        j["sd"] = sd;
        j["count"] = vals.size();
        return j;
    };

    json summary = json::array();
    for (const auto& [key, members] : groups) {
        json entry;
        entry["condition"] = key.condition;
        entry["model"] = key.model;
        if (!std::isnan(key.gamma)) entry["gamma"] = key.gamma;
        if (!std::isnan(key.alpha)) entry["alpha"] = key.alpha;
        entry["rmse_group1"] = stats(members, &ReportRow::rmse_group1);
        entry["rmse_group2"] = stats(members, &ReportRow::rmse_group2);
        entry["label_acc"] = stats(members, &ReportRow::label_acc);
        entry["latency_ms"] = stats(members, &ReportRow::latency_ms);
        summary.push_back(entry);
    }
    json doc;
    doc["summary"] = summary;
    doc["rows"] = rows.size();
    doc["config"] = config_echo;
    doc["note"] = "VMGP benchmark column omitted: out of scope for this artifact";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    f << doc.dump(2) << '\n';
}

double report_mean(const ExperimentReport& report, const std::string& condition,
                   const std::string& model, std::optional<double> gamma,
                   std::optional<double> alpha, double ReportRow::*metric) {
    double acc = 0.0;
    std::size_t n = 0;
    for (const ReportRow& r : report.rows) {
        if (r.condition != condition || r.model != model) continue;
        if (gamma && (std::isnan(r.gamma) || std::abs(r.gamma - *gamma) > 1e-12)) continue;
        if (alpha && (std::isnan(r.alpha) || std::abs(r.alpha - *alpha) > 1e-12)) continue;
        if (std::isnan(r.*metric)) continue;
        acc += r.*metric;
        ++n;
    }
    if (n == 0) return std::nan("");
    return acc / (double)n;
}

SeparationRow latent_separation(const LatentMeanTable& table) {
    if (table.rows.empty()) throw DomainError("latent_separation: empty table");
    const std::size_t dim = table.rows[0].mean.size();
    std::map<int, std::vector<const LatentExportRow*>> groups;
    for (const LatentExportRow& r : table.rows) groups[r.group].push_back(&r);
    if (groups.size() != 2) throw DomainError("latent_separation: expected exactly 2 groups");

    std::map<int, std::vector<double>> centroids;
    for (const auto& [g, members] : groups) {
        std::vector<double> c(dim, 0.0);
        for (const LatentExportRow* r : members)
            for (std::size_t d = 0; d < dim; ++d) c[d] += r->mean[d] / (double)members.size();
        centroids[g] = c;
    }
    auto dist = [&](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t d = 0; d < a.size(); ++d) acc += (a[d] - b[d]) * (a[d] - b[d]);
        return std::sqrt(acc);
    };
    SeparationRow out;
    auto it = centroids.begin();
    const std::vector<double>& c0 = it->second;
    const std::vector<double>& c1 = (++it)->second;
    out.between = dist(c0, c1);
    double acc = 0.0;
    for (const auto& [g, members] : groups)
        for (const LatentExportRow* r : members) acc += dist(r->mean, centroids[g]);
    out.within_mean = acc / (double)table.rows.size();
    return out;
}

void write_latent_means_csv(const std::string& path, const LatentMeanTable& table) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot open '" + path + "' for writing");
    std::size_t dim = table.rows.empty() ? 0 : table.rows[0].mean.size();
    f << "unit_id,group";
    for (std::size_t d = 0; d < dim; ++d) f << ",mu_" << (d + 1);
    f << '\n';
    for (const LatentExportRow& r : table.rows) {
        f << r.unit_id << ',' << r.group;
        for (double v : r.mean) f << ',' << format_double(v);
        f << '\n';
    }
}

// ---- harness internals ----

namespace {

std::uint64_t text_hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string cache_file(const std::string& dir, const std::string& tag,
                       const std::string& config_echo) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  (unsigned long long)text_hash(config_echo + "|" + tag));
    return dir + "/" + tag + "_" + buf + ".ckpt";
}

LanpModel finish_model(const ModelConfig& mcfg, Checkpoint ckpt) {
    LanpModel model(mcfg, ckpt.params);
    model.set_trained_iterations(ckpt.iteration);
    return model;
}

LanpModel train_or_load(const ModelConfig& mcfg, const TrainConfig& tcfg, BatchSource& source,
                        const std::string& cache_dir, const std::string& tag,
                        const std::string& config_echo, std::ostream* progress,
                        std::vector<TrainLogRow>* log_out) {
    std::string path;
    if (!cache_dir.empty()) {
        std::filesystem::create_directories(cache_dir);
        path = cache_file(cache_dir, tag, config_echo);
        if (std::filesystem::exists(path)) {
            if (progress) (*progress) << "[cache] " << tag << "\n";
            return finish_model(mcfg, load_checkpoint(path));
        }
    }
    if (progress)
        (*progress) << "[train] " << tag << " (" << tcfg.iterations << " iterations)\n";
    TrainResult res = train(mcfg, tcfg, source, config_echo, nullptr);
    if (log_out) *log_out = res.log;
    if (!path.empty()) save_checkpoint(res.checkpoint, path);
    return std::move(res.model);
}

} // namespace

LanpModel train_sim1_model(const RunConfig& cfg, bool label_aware, double gamma,
                           std::uint64_t seed, std::int64_t iterations,
                           const std::string& cache_dir, std::ostream* progress,
                           std::vector<TrainLogRow>* log_out) {
    ModelConfig mcfg = cfg.model_config();
    mcfg.label_aware = label_aware;
    TrainConfig tcfg = cfg.train_config();
    tcfg.iterations = iterations;
    tcfg.gamma = gamma;
    tcfg.seed = seed;
    tcfg.checkpoint_path.clear();
    Sim1Source source(gamma, tcfg.gamma_exact, cfg.context_rule(),
                      cfg.get_int("data.per_group"), cfg.get_int("data.train_points"),
                      cfg.sim1_options());
    char tag[96];
    std::snprintf(tag, sizeof(tag), "sim1_%s_g%g_s%llu_i%lld", label_aware ? "lanp" : "anp",
                  gamma, (unsigned long long)seed, (long long)iterations);
    return train_or_load(mcfg, tcfg, source, cache_dir, tag, cfg.render(), progress, log_out);
}

Sim1StudyResult run_sim1(const RunConfig& cfg, const Sim1StudyOptions& opts) {
    Sim1StudyResult result;
    result.report.config_echo = cfg.render();
    const double tau = cfg.get_double("context.tau");
    const RmseSpec spec = RmseSpec::even(tau, cfg.get_int("eval.grid_points"));
    const int test_points = cfg.get_int("data.test_points");
    const bool continuity_fix = cfg.get_bool("data.continuity_fix");

    for (int seed = 0; seed < opts.seeds; ++seed) {
        RngStream suite_rng((std::uint64_t)(9000 + seed), 0x7e57);
        TestSuite rmse_suite =
            gen_test_suite(SimSetting::kSim1, suite_rng, 20, test_points, 2.0, continuity_fix);
        RngStream acc_rng((std::uint64_t)(9100 + seed), 0x7e57);
        TestSuite wide_suite = gen_test_suite(
            SimSetting::kSim1, acc_rng,
            std::max(opts.label_acc_units_per_group, opts.latent_units_per_group), test_points,
            2.0, continuity_fix);

        struct ModelRun {
            std::string name;
            double gamma;
            bool label_aware;
        };
        std::vector<ModelRun> runs;
        if (opts.include_anp) runs.push_back({"anp", std::nan(""), false});
        for (double g : opts.gammas) runs.push_back({"lanp", g, true});

        for (const ModelRun& run : runs) {
            LanpModel model = train_sim1_model(cfg, run.label_aware,
                                               run.label_aware ? run.gamma : 1.0,
                                               (std::uint64_t)(seed + 1), opts.iterations,
                                               opts.cache_dir, opts.progress);
            ParameterStore before = model.params();
            for (double alpha : opts.alphas) {
                double rmse_acc[2] = {0.0, 0.0};
                int counts[2] = {0, 0};
                for (const GeneratedSignal& gs : rmse_suite.units) {
                    SplitSet split = alpha_stage(gs.signal, alpha, tau);
                    std::optional<int> label =
                        run.label_aware ? gs.signal.label : std::nullopt;
                    double r = rmse_curve(model, split.contexts, label, gs.truth, spec);
                    rmse_acc[*gs.signal.label] += r;
                    counts[*gs.signal.label] += 1;
                }
                ReportRow row;
                row.condition = "sim1";
                row.model = run.name;
                row.gamma = run.gamma;
                row.alpha = alpha;
                row.seed = (std::uint64_t)seed;
                row.rmse_group1 = rmse_acc[0] / counts[0];
                row.rmse_group2 = rmse_acc[1] / counts[1];
                if (run.label_aware) {
                    // first label_acc_units_per_group units of each group
                    std::vector<Signal> subset;
                    int per_group[2] = {0, 0};
                    for (const GeneratedSignal& gs : wide_suite.units) {
                        if (per_group[*gs.signal.label] < opts.label_acc_units_per_group) {
                            subset.push_back(gs.signal);
                            per_group[*gs.signal.label]++;
                        }
                    }
                    row.label_acc = label_accuracy(model, subset, alpha, tau);
                }
                result.report.rows.push_back(row);
            }
            // dormant-stage latent export
            {
                std::vector<Signal> units;
                int per_group[2] = {0, 0};
                for (const GeneratedSignal& gs : wide_suite.units) {
                    if (per_group[*gs.signal.label] < opts.latent_units_per_group) {
                        units.push_back(gs.signal);
                        per_group[*gs.signal.label]++;
                    }
                }
                LatentMeanTable table =
                    model.export_latent_means(units, opts.latent_alpha, tau);
                SeparationRow sep = latent_separation(table);
                sep.model = run.name;
                sep.gamma = run.gamma;
                sep.seed = (std::uint64_t)seed;
                result.separation.push_back(sep);
                result.latent_tables.push_back(std::move(table));
            }
            if (!model.params().bitwise_equal(before))
                throw NumericError("run_sim1: evaluation mutated parameters");
        }
    }
    return result;
}

ExperimentReport run_augmentation_study(const RunConfig& cfg,
                                        const AugmentationStudyOptions& opts) {
    ExperimentReport report;
    report.config_echo = cfg.render();
    const double tau = cfg.get_double("context.tau");
    const RmseSpec spec = RmseSpec::even(tau, cfg.get_int("eval.grid_points"));
    const int grid_size = cfg.get_int("aug.grid_size");
    const double rho = cfg.get_double("aug.rho");
    const int em_iters = cfg.get_int("aug.em_iterations");
    const double em_tol = cfg.get_double("aug.em_tol");
    const int synth_points = cfg.get_int("aug.points");

    for (double delta : opts.deltas) {
        for (int seed = 0; seed < opts.seeds; ++seed) {
            RngStream pool_rng((std::uint64_t)(7000 + seed),
                               0xa0 + (std::uint64_t)(delta * 100));
            StudyPool pool = make_sim2_study_pool(delta, pool_rng, 8, 4,
                                                  cfg.get_int("data.train_points"));
            RngStream suite_rng((std::uint64_t)(7500 + seed),
                                0xb0 + (std::uint64_t)(delta * 100));
            TestSuite suite = gen_test_suite(SimSetting::kSim2, suite_rng, 20,
                                             cfg.get_int("data.test_points"), delta);

            ModelConfig mcfg = cfg.model_config();
            TrainConfig tcfg = cfg.train_config();
            tcfg.iterations = opts.iterations;
            tcfg.seed = (std::uint64_t)(seed + 1);
            tcfg.checkpoint_path.clear();

            for (int variant = 0; variant < 2; ++variant) {
                const bool augmented = variant == 1;
                std::unique_ptr<PoolSource> source;
                if (!augmented) {
                    source = std::make_unique<PoolSource>(pool.labeled, pool.unlabeled,
                                                          BatchSizes{8, 8, 0},
                                                          cfg.context_rule());
                } else {
                    FpcaResult fpca = fit_fpca(pool.all, grid_size, rho);
                    int q = cfg.get_int("aug.components");
                    if (q <= 0) q = mcfg.classes;
                    RngStream gmm_rng((std::uint64_t)(7900 + seed),
                                      0xc0 + (std::uint64_t)(delta * 100));
                    GmmModel gmm = fit_gmm(fpca.scores, q, gmm_rng, em_iters, em_tol);
                    FunctionalBasis basis = fpca.basis;
                    SynthesisOptions sopts;
                    sopts.n_points = synth_points;
                    sopts.add_noise = cfg.get_bool("aug.noise");
                    sopts.noise_sd = cfg.get_double("aug.noise_sd");
                    source = std::make_unique<PoolSource>(
                        pool.labeled, std::vector<Signal>{}, BatchSizes{8, 0, 8},
                        cfg.context_rule(),
                        [basis, gmm, sopts](int n, RngStream& r) {
                            return sample_synthetic(basis, gmm, n, r, sopts);
                        });
                }
                char tag[96];
                std::snprintf(tag, sizeof(tag), "aug_d%g_s%d_i%lld_%s", delta, seed,
                              (long long)opts.iterations, augmented ? "aug" : "orig");
                LanpModel model = train_or_load(mcfg, tcfg, *source, opts.cache_dir, tag,
                                                report.config_echo, opts.progress, nullptr);

                for (double alpha : opts.alphas) {
                    double rmse_acc[2] = {0.0, 0.0};
                    int counts[2] = {0, 0};
                    for (const GeneratedSignal& gs : suite.units) {
                        SplitSet split = alpha_stage(gs.signal, alpha, tau);
                        double r =
                            rmse_curve(model, split.contexts, gs.signal.label, gs.truth, spec);
                        rmse_acc[*gs.signal.label] += r;
                        counts[*gs.signal.label] += 1;
                    }
                    ReportRow row;
                    char cond[32];
                    std::snprintf(cond, sizeof(cond), "aug_d%g", delta);
                    row.condition = cond;
                    row.model = augmented ? "augmented" : "original";
                    row.alpha = alpha;
                    row.seed = (std::uint64_t)seed;
                    row.rmse_group1 = rmse_acc[0] / counts[0];
                    row.rmse_group2 = rmse_acc[1] / counts[1];
                    report.rows.push_back(row);
                }
            }
        }
    }
    return report;
}

ExperimentReport loocv(std::span<const Signal> dataset, const RunConfig& cfg,
                       const LoocvOptions& opts) {
    if (dataset.size() < 2) throw DataError("loocv: need at least 2 units");
    ExperimentReport report;
    report.config_echo = cfg.render();
    double tau = 0.0;
    for (const Signal& s : dataset)
        for (const Observation& o : s.obs) tau = std::max(tau, o.x);

    for (std::size_t fold = 0; fold < dataset.size(); ++fold) {
        const Signal& held_out = dataset[fold];
        std::vector<Signal> labeled, unlabeled, all;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (i == fold) continue;
            all.push_back(dataset[i]);
            (dataset[i].label ? labeled : unlabeled).push_back(dataset[i]);
        }
        BatchSizes sizes;
        sizes.labeled = std::min<int>((int)labeled.size(), cfg.get_int("train.batch_labeled"));
        sizes.unlabeled =
            std::min<int>((int)unlabeled.size(), cfg.get_int("train.batch_unlabeled"));
        sizes.synthetic = 0;
        PoolSource::SyntheticGenerator synth;
        if (opts.augment) {
            FpcaResult fpca =
                fit_fpca(all, cfg.get_int("aug.grid_size"), cfg.get_double("aug.rho"));
            RngStream gmm_rng((std::uint64_t)(8800 + fold), 0xd0);
            int q = cfg.get_int("aug.components");
            if (q <= 0) q = cfg.get_int("model.classes");
            GmmModel gmm = fit_gmm(fpca.scores, q, gmm_rng, cfg.get_int("aug.em_iterations"),
                                   cfg.get_double("aug.em_tol"));
            FunctionalBasis basis = fpca.basis;
            SynthesisOptions sopts;
            sopts.n_points = cfg.get_int("aug.points");
            synth = [basis, gmm, sopts](int n, RngStream& r) {
                return sample_synthetic(basis, gmm, n, r, sopts);
            };
            sizes.synthetic = opts.synthetic_per_batch;
        }
        ContextRule rule = cfg.context_rule();
        rule.tau = tau;
        PoolSource source(labeled, unlabeled, sizes, rule, synth);

        ModelConfig mcfg = cfg.model_config();
        TrainConfig tcfg = cfg.train_config();
        tcfg.iterations = opts.iterations;
        tcfg.seed = (std::uint64_t)(fold + 1);
        tcfg.checkpoint_path.clear();
        if (opts.progress)
            (*opts.progress) << "[loocv] fold " << fold << " unit " << held_out.unit_id << "\n";
        TrainResult res = train(mcfg, tcfg, source, report.config_echo, nullptr);

        for (double alpha : opts.alphas) {
            SplitSet split = alpha_stage(held_out, alpha, tau);
            // held-out observations serve as the truth
            std::vector<double> xs;
            for (const Observation& o : held_out.obs) xs.push_back(o.x);
            std::optional<int> label_for_curve = held_out.label;
            std::vector<double> mean =
                res.model.predictive_mean(split.contexts, xs, label_for_curve);
            double acc = 0.0;
            for (std::size_t i = 0; i < xs.size(); ++i) {
                double d = mean[i] - held_out.obs[i].y;
                acc += d * d;
            }
            ReportRow row;
            row.condition = "loocv";
            row.model = mcfg.label_aware ? "lanp" : "anp";
            row.alpha = alpha;
            row.seed = (std::uint64_t)fold;
            row.rmse_group1 = std::sqrt(acc / (double)xs.size());
            if (held_out.label && mcfg.label_aware) {
                auto [pred, probs] = res.model.predict_label(split.contexts);
                row.label_acc = pred == *held_out.label ? 1.0 : 0.0;
            }
            report.rows.push_back(row);
        }
    }
    return report;
}

} // namespace lanp
