#pragma once
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lanp/runconfig.hpp"

namespace lanp {

struct RmseSpec {
    std::vector<double> grid;

    // n points evenly spaced over (0, tau]: x_i = i * tau / n
    static RmseSpec even(double tau, int n);
};

// sqrt(mean over the grid of (predictive mean - truth)^2)
double rmse_curve(const LanpModel& model, std::span<const Observation> contexts,
                  std::optional<int> label, const std::function<double(double)>& truth,
                  const RmseSpec& spec);

// Fraction of units whose predicted label matches the ground truth, with
// contexts built by the alpha rule.
double label_accuracy(const LanpModel& model, std::span<const Signal> test_set, double alpha,
                      double domain_end);

struct LatencyStats {
    std::vector<double> per_update_ms;
    double mean_ms = 0.0;
    double max_ms = 0.0;
    bool params_unchanged = false;
};

// Replay the signal's observations one at a time; after each arrival re-run
// a full prediction over the grid and record the wall-clock. Parameters are
// byte-compared around every update.
LatencyStats time_online_update(const LanpModel& model, const Signal& signal,
                                std::span<const double> grid, int k, RngStream& rng);

struct ReportRow {
    std::string condition;
    std::string model;
    double gamma = std::nan("");
    double alpha = std::nan("");
    std::uint64_t seed = 0;
    double rmse_group1 = std::nan("");
    double rmse_group2 = std::nan("");
    double label_acc = std::nan("");
    double latency_ms = std::nan("");
};

struct ExperimentReport {
    std::vector<ReportRow> rows;
    std::string config_echo;

    void write_csv(const std::string& path) const;
    // means/sds grouped over seeds per (condition, model, gamma, alpha)
    void write_json(const std::string& path) const;
    void append(const ExperimentReport& other);
};

// mean over matching rows of the selected metric (NaN rows skipped)
double report_mean(const ExperimentReport& report, const std::string& condition,
                   const std::string& model, std::optional<double> gamma,
                   std::optional<double> alpha,
                   double ReportRow::*metric = &ReportRow::rmse_group1);

struct SeparationRow {
    std::string model;
    double gamma = std::nan("");
    std::uint64_t seed = 0;
    double between = 0.0;     // distance of the two group centroids
    double within_mean = 0.0; // mean distance of units to their own centroid
};

SeparationRow latent_separation(const LatentMeanTable& table);

void write_latent_means_csv(const std::string& path, const LatentMeanTable& table);

// ---- experiment harnesses ----

struct Sim1StudyOptions {
    std::vector<double> gammas{0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<double> alphas{0.3, 0.5, 0.7};
    int seeds = 3;
    std::int64_t iterations = 25000;
    bool include_anp = true;
    int label_acc_units_per_group = 100;
    int latent_units_per_group = 100;
    double latent_alpha = 0.3;
    std::ostream* progress = nullptr;
    // reuse/persist trained checkpoints keyed by (model, gamma, seed)
    std::string cache_dir;
};

struct Sim1StudyResult {
    ExperimentReport report;             // rmse + label-accuracy rows
    std::vector<SeparationRow> separation;
    std::vector<LatentMeanTable> latent_tables; // parallel to separation rows
};

// Trains LANP per gamma and ANP once per seed on fresh sim1 batches, then
// evaluates per-group RMSE over the alpha stages (true labels supplied to
// the label-aware model), label accuracy, and the dormant-stage latent
// separation.
Sim1StudyResult run_sim1(const RunConfig& cfg, const Sim1StudyOptions& opts);

struct AugmentationStudyOptions {
    std::vector<double> deltas{0.5, 2.0};
    std::vector<double> alphas{0.25, 0.5, 0.75};
    int seeds = 5;
    std::int64_t iterations = 25000;
    std::ostream* progress = nullptr;
    std::string cache_dir;
};

// 16-signal fixed pools per seed; "original" trains on the 8 labeled + 8
// unlabeled originals, "augmented" on the 8 labeled originals plus 8 fresh
// synthetic signals per batch.
ExperimentReport run_augmentation_study(const RunConfig& cfg,
                                        const AugmentationStudyOptions& opts);

struct LoocvOptions {
    std::vector<double> alphas{0.3, 0.5, 0.7};
    std::int64_t iterations = 2000;
    bool augment = false;
    int synthetic_per_batch = 8;
    std::ostream* progress = nullptr;
};

// One fold per unit: train on the rest, evaluate curve RMSE against the
// held-out observations and label correctness. Units without labels are
// reported with label_acc = NaN.
ExperimentReport loocv(std::span<const Signal> dataset, const RunConfig& cfg,
                       const LoocvOptions& opts);

// Train (or load from cache) one model on sim1 batches. Exposed for the
// latency benchmark and the acceptance suite.
LanpModel train_sim1_model(const RunConfig& cfg, bool label_aware, double gamma,
                           std::uint64_t seed, std::int64_t iterations,
                           const std::string& cache_dir = {},
                           std::ostream* progress = nullptr,
                           std::vector<TrainLogRow>* log_out = nullptr);

} // namespace lanp
