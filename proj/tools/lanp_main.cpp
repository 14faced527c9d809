// lanp: train, stream, augment, and benchmark label-aware neural processes
// on condition-monitoring signals.
#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "lanp/csv.hpp"
#include "lanp/evaluation.hpp"

using namespace lanp;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

RunConfig load_config(const std::string& config_path,
                      const std::vector<std::string>& overrides) {
    RunConfig cfg = config_path.empty() ? RunConfig() : RunConfig::from_file(config_path);
    for (const std::string& kv : overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ConfigError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

std::vector<Signal> suite_signals(const TestSuite& suite) {
    std::vector<Signal> out;
    for (const GeneratedSignal& gs : suite.units) out.push_back(gs.signal);
    return out;
}

int cmd_generate(const std::string& setting_name, const RunConfig& cfg, bool test_mode,
                 std::uint64_t seed, const std::string& out_signals,
                 const std::string& out_labels) {
    SimSetting setting = parse_setting(setting_name);
    RngStream rng(seed, 0x9e);
    std::vector<Signal> signals;
    if (test_mode) {
        TestSuite suite = gen_test_suite(setting, rng, 20, cfg.get_int("data.test_points"),
                                         cfg.get_double("data.delta"),
                                         cfg.get_bool("data.continuity_fix"));
        signals = suite_signals(suite);
    } else {
        const int per_group = cfg.get_int("data.per_group");
        const int points = cfg.get_int("data.train_points");
        for (int group = 0; group < 2; ++group) {
            for (int i = 0; i < per_group; ++i) {
                GeneratedSignal gs =
                    setting == SimSetting::kSim1
                        ? gen_sim1_signal(group, rng, points, false, false, cfg.sim1_options())
                        : gen_sim2_signal(group, rng, points, false, false, cfg.sim2_options());
                char id[32];
                std::snprintf(id, sizeof(id), "g%d_%02d", group + 1, i);
                gs.signal.unit_id = id;
                signals.push_back(gs.signal);
            }
        }
    }
    write_signals_csv(out_signals, signals);
    if (!out_labels.empty()) write_labels_csv(out_labels, signals);
    std::cout << "wrote " << signals.size() << " signals to " << out_signals << "\n";
    return 0;
}

int cmd_train(const RunConfig& cfg, const std::string& signals_path,
              const std::string& labels_path, const std::string& out_ckpt,
              const std::string& log_path) {
    ModelConfig mcfg = cfg.model_config();
    TrainConfig tcfg = cfg.train_config();
    tcfg.checkpoint_path = out_ckpt;

    std::unique_ptr<BatchSource> source;
    if (!signals_path.empty()) {
        std::vector<Signal> pool = load_signals_csv(signals_path, labels_path);
        std::vector<Signal> labeled, unlabeled;
        for (Signal& s : pool) (s.label ? labeled : unlabeled).push_back(std::move(s));
        if (tcfg.batch.labeled > 0 && labeled.empty())
            throw DataError("train: labeled episodes requested but no labels provided "
                            "(missing labels file?)");
        source = std::make_unique<PoolSource>(std::move(labeled), std::move(unlabeled),
                                              tcfg.batch, cfg.context_rule());
    } else if (cfg.get("data.setting") == "sim1") {
        source = std::make_unique<Sim1Source>(tcfg.gamma, tcfg.gamma_exact, cfg.context_rule(),
                                              cfg.get_int("data.per_group"),
                                              cfg.get_int("data.train_points"),
                                              cfg.sim1_options());
    } else {
        throw ConfigError("train: on-the-fly generation supports data.setting=sim1; "
                          "pass --signals for fixed pools");
    }

    std::ofstream log_file;
    std::ostream* log_stream = nullptr;
    if (!log_path.empty()) {
        log_file.open(log_path, std::ios::trunc);
        if (!log_file) throw IoError("cannot open '" + log_path + "' for writing");
        log_file << "iter,objective,wallclock_ms\n";
        log_stream = &log_file;
    }
    TrainResult res = train(mcfg, tcfg, *source, cfg.render(), log_stream);
    std::cout << "trained " << tcfg.iterations << " iterations";
    if (res.aborted_steps > 0) std::cout << " (" << res.aborted_steps << " aborted steps)";
    std::cout << ", checkpoint: " << out_ckpt << "\n";
    return 0;
}

LanpModel model_from_checkpoint(const std::string& path, RunConfig* cfg_out) {
    Checkpoint ckpt = load_checkpoint(path);
    RunConfig cfg = ckpt.config_text.empty()
                        ? RunConfig()
                        : RunConfig::from_text(ckpt.config_text, path + "#config");
    LanpModel model(cfg.model_config(), ckpt.params);
    model.set_trained_iterations(ckpt.iteration);
    if (cfg_out) *cfg_out = cfg;
    return model;
}

int cmd_stream(const std::string& ckpt_path, const std::string& signals_path,
               const std::string& labels_path, const std::string& unit_id,
               const std::string& out_dir, int grid_points, std::uint64_t seed) {
    RunConfig cfg;
    LanpModel model = model_from_checkpoint(ckpt_path, &cfg);
    std::vector<Signal> pool = load_signals_csv(signals_path, labels_path);
    const Signal* unit = nullptr;
    for (const Signal& s : pool)
        if (s.unit_id == unit_id) unit = &s;
    if (!unit) throw DataError("stream: unknown unit id '" + unit_id + "'");

    std::filesystem::create_directories(out_dir);
    const double tau = cfg.get_double("context.tau");
    if (grid_points <= 0) grid_points = cfg.get_int("eval.grid_points");
    RmseSpec spec = RmseSpec::even(tau, grid_points);
    RngStream rng(seed, 0x57a);

    std::ofstream latency(out_dir + "/latency.csv", std::ios::trunc);
    latency << "arrival_index,latency_ms,label_pred,label_probs\n";
    std::vector<Observation> contexts;
    int arrival = 0;
    for (const Observation& o : unit->obs) {
        contexts.push_back(o);
        ++arrival;
        const auto t0 = std::chrono::steady_clock::now();
        std::optional<int> label;
        std::vector<double> probs;
        if (model.config().label_aware) {
            auto [pred, p] = model.predict_label(contexts);
            label = pred;
            probs = p;
        }
        std::vector<PredictiveMoments> pm = model.predict_grid(
            contexts, spec.grid, model.config().pred_samples, label, rng);
        const auto t1 = std::chrono::steady_clock::now();
        double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();

        char name[64];
        std::snprintf(name, sizeof(name), "%s/prediction_%03d.csv", out_dir.c_str(), arrival);
        std::ofstream pred(name, std::ios::trunc);
        pred << "x,mean,var\n";
        for (std::size_t i = 0; i < spec.grid.size(); ++i)
            pred << format_double(spec.grid[i]) << ',' << format_double(pm[i].mean) << ','
                 << format_double(pm[i].variance) << '\n';

        latency << arrival << ',' << format_double(ms) << ','
                << (label ? std::to_string(*label) : "") << ',';
        for (std::size_t i = 0; i < probs.size(); ++i)
            latency << (i ? ";" : "") << format_double(probs[i]);
        latency << '\n';
    }
    std::cout << "streamed " << arrival << " arrivals into " << out_dir << "\n";
    return 0;
}

int cmd_augment(const RunConfig& cfg, const std::string& signals_path,
                const std::string& labels_path, int n, std::uint64_t seed,
                const std::string& out_signals, const std::string& out_basis) {
    std::vector<Signal> pool = load_signals_csv(signals_path, labels_path);
    if (pool.size() < 2) throw DataError("augment: need at least 2 input signals");
    FpcaResult fpca =
        fit_fpca(pool, cfg.get_int("aug.grid_size"), cfg.get_double("aug.rho"));

    if (!out_basis.empty()) {
        std::ofstream f(out_basis, std::ios::trunc);
        f << "grid_x,beta";
        for (std::size_t n2 = 0; n2 < fpca.basis.components(); ++n2) f << ",psi_" << (n2 + 1);
        f << '\n';
        for (std::size_t i = 0; i < fpca.basis.grid.size(); ++i) {
            f << format_double(fpca.basis.grid[i]) << ',' << format_double(fpca.basis.mean[i]);
            for (std::size_t n2 = 0; n2 < fpca.basis.components(); ++n2)
                f << ',' << format_double(fpca.basis.eigenfunctions[n2][i]);
            f << '\n';
        }
    }

    if (n > 0) {
        bool any_label = false;
        for (const Signal& s : pool) any_label |= s.label.has_value();
        int q = cfg.get_int("aug.components");
        if (q <= 0) q = any_label ? cfg.get_int("model.classes") : 2;
        RngStream gmm_rng(seed, 0x96e);
        GmmModel gmm = fit_gmm(fpca.scores, q, gmm_rng, cfg.get_int("aug.em_iterations"),
                               cfg.get_double("aug.em_tol"));
        SynthesisOptions sopts;
        sopts.n_points = cfg.get_int("aug.points");
        sopts.add_noise = cfg.get_bool("aug.noise");
        sopts.noise_sd = cfg.get_double("aug.noise_sd");
        RngStream rng(seed, 0x5a9);
        std::vector<Signal> synth = sample_synthetic(fpca.basis, gmm, n, rng, sopts);
        write_signals_csv(out_signals, synth);
        std::cout << "wrote " << synth.size() << " synthetic signals to " << out_signals
                  << "\n";
    }
    return 0;
}

int cmd_benchmark(const RunConfig& cfg, const std::string& suite, int seeds,
                  std::int64_t iterations, bool smoke, const std::string& out_dir,
                  const std::string& data_path, const std::string& labels_path,
                  const std::string& cache_dir) {
    std::filesystem::create_directories(out_dir);
    ExperimentReport report;
    if (iterations <= 0) iterations = cfg.get_int64("train.iterations");
    if (smoke) iterations = std::min<std::int64_t>(iterations, 200);

    if (suite == "sim1") {
        Sim1StudyOptions opts;
        opts.gammas = cfg.get_double_list("eval.gammas");
        opts.alphas = cfg.get_double_list("eval.alphas");
        opts.seeds = seeds > 0 ? seeds : cfg.get_int("eval.seeds");
        opts.iterations = iterations;
        opts.progress = &std::cerr;
        opts.cache_dir = cache_dir;
        if (smoke) {
            opts.label_acc_units_per_group = 20;
            opts.latent_units_per_group = 20;
        }
        Sim1StudyResult res = run_sim1(cfg, opts);
        report = std::move(res.report);
        for (std::size_t i = 0; i < res.separation.size(); ++i) {
            char name[96];
            std::snprintf(name, sizeof(name), "%s/latent_means_%s_s%llu.csv", out_dir.c_str(),
                          res.separation[i].model.c_str(),
                          (unsigned long long)res.separation[i].seed);
            write_latent_means_csv(name, res.latent_tables[i]);
        }
    } else if (suite == "augmentation") {
        AugmentationStudyOptions opts;
        opts.alphas = {0.25, 0.5, 0.75};
        opts.seeds = seeds > 0 ? seeds : cfg.get_int("eval.seeds");
        opts.iterations = iterations;
        opts.progress = &std::cerr;
        opts.cache_dir = cache_dir;
        report = run_augmentation_study(cfg, opts);
    } else if (suite == "loocv") {
        std::vector<Signal> dataset;
        if (!data_path.empty()) {
            dataset = load_signals_csv(data_path, labels_path);
        } else {
            // 23 synthetic labeled units standing in for the battery cells
            RngStream rng(23, 0x10c);
            Sim2Options sopts = cfg.sim2_options();
            for (int i = 0; i < 23; ++i) {
                int group = i < 14 ? 0 : 1;
                GeneratedSignal gs = gen_sim2_signal(group, rng, 45, false, false, sopts);
                char id[32];
                std::snprintf(id, sizeof(id), "cell_%02d", i + 1);
                gs.signal.unit_id = id;
                dataset.push_back(gs.signal);
            }
        }
        LoocvOptions opts;
        opts.alphas = cfg.get_double_list("eval.alphas");
        opts.iterations = iterations;
        opts.progress = &std::cerr;
        report = loocv(dataset, cfg, opts);
    } else if (suite == "latency") {
        LanpModel model =
            train_sim1_model(cfg, cfg.get_bool("model.label_aware"), 0.5, 1,
                             smoke ? iterations : std::min<std::int64_t>(iterations, 2000),
                             cache_dir, &std::cerr);
        RngStream rng(31, 0x7a7);
        GeneratedSignal gs = gen_sim1_signal(0, rng, 20, false, true, cfg.sim1_options());
        RmseSpec spec = RmseSpec::even(cfg.get_double("context.tau"),
                                       cfg.get_int("eval.latency_grid"));
        RngStream prng(32, 0);
        LatencyStats stats = time_online_update(model, gs.signal, spec.grid,
                                                cfg.get_int("model.pred_samples"), prng);
        if (!stats.params_unchanged)
            throw NumericError("latency: online updates mutated parameters");
        for (std::size_t i = 0; i < stats.per_update_ms.size(); ++i) {
            ReportRow row;
            row.condition = "latency";
            row.model = cfg.get_bool("model.label_aware") ? "lanp" : "anp";
            row.seed = i + 1;
            row.latency_ms = stats.per_update_ms[i];
            report.rows.push_back(row);
        }
        std::cout << "mean latency " << stats.mean_ms << " ms over "
                  << stats.per_update_ms.size() << " updates\n";
        report.config_echo = cfg.render();
    } else {
        throw ConfigError("unknown suite '" + suite +
                          "' (expected sim1, augmentation, loocv, or latency)");
    }

    report.write_csv(out_dir + "/report.csv");
    report.write_json(out_dir + "/summary.json");
    std::cout << "report: " << out_dir << "/report.csv\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"label-aware neural processes for condition-monitoring signals"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    std::uint64_t seed = 1;
    app.add_option("--config", config_path, "run configuration file (key=value lines)");
    app.add_option("--set", overrides, "override a configuration key (key=value)");

    auto* generate = app.add_subcommand("generate", "write synthetic signal CSV files");
    std::string setting = "sim1", out_signals = "signals.csv", out_labels = "labels.csv";
    bool test_mode = false;
    generate->add_option("--setting", setting, "sim1 | sim2");
    generate->add_flag("--test", test_mode, "evenly spaced test suite (20 per group)");
    generate->add_option("--seed", seed, "generator seed");
    generate->add_option("--out", out_signals, "signals CSV path");
    generate->add_option("--labels-out", out_labels, "labels CSV path (empty to skip)");

    auto* train_cmd = app.add_subcommand("train", "train a model and write a checkpoint");
    std::string signals_path, labels_path, out_ckpt = "model.ckpt", log_path;
    double gamma = -1.0;
    std::int64_t iterations_flag = -1;
    bool smoke = false;
    train_cmd->add_option("--signals", signals_path, "training signals CSV (else generated)");
    train_cmd->add_option("--labels", labels_path, "labels CSV for --signals");
    train_cmd->add_option("--out", out_ckpt, "checkpoint path");
    train_cmd->add_option("--log", log_path, "training log CSV path");
    train_cmd->add_option("--gamma", gamma, "labeled fraction override");
    train_cmd->add_option("--iterations", iterations_flag, "iteration override");
    train_cmd->add_option("--seed", seed, "seed override");
    train_cmd->add_flag("--smoke", smoke, "cap iterations at 200 for a quick run");

    auto* stream_cmd =
        app.add_subcommand("stream", "replay a unit's observations through a checkpoint");
    std::string ckpt_path, unit_id, out_dir = "stream_out";
    int grid_points = 0;
    stream_cmd->add_option("--checkpoint", ckpt_path, "trained checkpoint")->required();
    stream_cmd->add_option("--signals", signals_path, "signals CSV")->required();
    stream_cmd->add_option("--labels", labels_path, "labels CSV");
    stream_cmd->add_option("--unit", unit_id, "unit id to replay")->required();
    stream_cmd->add_option("--out", out_dir, "output directory");
    stream_cmd->add_option("--grid", grid_points, "prediction grid size");
    stream_cmd->add_option("--seed", seed, "prediction sampling seed");

    auto* augment_cmd =
        app.add_subcommand("augment", "fit FPCA+GMM and sample synthetic signals");
    int n_synth = 8;
    std::string out_basis = "basis.csv";
    augment_cmd->add_option("--signals", signals_path, "input signals CSV")->required();
    augment_cmd->add_option("--labels", labels_path, "labels CSV");
    augment_cmd->add_option("-n,--count", n_synth, "synthetic signals to sample");
    augment_cmd->add_option("--seed", seed, "sampling seed");
    augment_cmd->add_option("--out", out_signals, "synthetic signals CSV path");
    augment_cmd->add_option("--basis-out", out_basis, "basis CSV path");

    auto* bench_cmd = app.add_subcommand("benchmark", "run an experiment suite");
    std::string suite = "sim1", bench_out = "bench_out", data_path, cache_dir;
    int bench_seeds = 0;
    bench_cmd->add_option("--suite", suite, "sim1 | augmentation | loocv | latency");
    bench_cmd->add_option("--seeds", bench_seeds, "seeds per condition");
    bench_cmd->add_option("--iterations", iterations_flag, "training iterations");
    bench_cmd->add_flag("--smoke", smoke, "cap iterations for a quick run");
    bench_cmd->add_option("--out", bench_out, "report directory");
    bench_cmd->add_option("--data", data_path, "external signals CSV (loocv)");
    bench_cmd->add_option("--labels", labels_path, "labels CSV for --data");
    bench_cmd->add_option("--cache", cache_dir, "checkpoint cache directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        RunConfig cfg = load_config(config_path, overrides);
        if (*generate) {
            cfg.set("data.setting", setting);
            return cmd_generate(setting, cfg, test_mode, seed, out_signals, out_labels);
        }
        if (*train_cmd) {
            if (gamma >= 0.0) cfg.set("train.gamma", format_double(gamma));
            if (iterations_flag >= 0)
                cfg.set("train.iterations", std::to_string(iterations_flag));
            if (smoke)
                cfg.set("train.iterations",
                        std::to_string(std::min<std::int64_t>(
                            cfg.get_int64("train.iterations"), 200)));
            if (seed != 1 || !train_cmd->get_option("--seed")->empty())
                cfg.set("train.seed", std::to_string(seed));
            return cmd_train(cfg, signals_path, labels_path, out_ckpt, log_path);
        }
        if (*stream_cmd)
            return cmd_stream(ckpt_path, signals_path, labels_path, unit_id, out_dir,
                              grid_points, seed);
        if (*augment_cmd)
            return cmd_augment(cfg, signals_path, labels_path, n_synth, seed, out_signals,
                               out_basis);
        if (*bench_cmd)
            return cmd_benchmark(cfg, suite, bench_seeds, iterations_flag, smoke, bench_out,
                                 data_path, labels_path, cache_dir);
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
}
