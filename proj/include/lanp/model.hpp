#pragma once
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lanp/networks.hpp"

namespace lanp {

struct Observation {
    double x = 0.0;
    double y = 0.0;
};

// One unit's condition-monitoring trajectory, sorted by x ascending.
struct Signal {
    std::string unit_id;
    std::vector<Observation> obs;
    std::optional<int> label;
};

struct SplitSet {
    std::vector<Observation> contexts;
    std::vector<Observation> targets;
};

// One training episode: a context/target split plus the unit label when known.
struct Episode {
    SplitSet split;
    std::optional<int> label;
};

struct ModelConfig {
    int d_in = 1;  // observation inputs are scalar (time); kept for config echo
    int d_out = 1;
    int classes = 2;
    int d_lat = 8;
    int hidden = 128;
    AttentionConfig self_attention{AttentionConfig::Kind::kMultiHead, 4, 128};
    int cross_heads = 4;
    bool use_cross_attention = true;
    double lambda = 0.1;      // classifier regularizer weight
    int pred_samples = 50;    // K
    bool label_aware = true;  // false -> ANP baseline (no label machinery)
    double sigma_d_floor = 0.01;
    double sigma_e_floor = 0.001;
    bool unlabeled_weights_from_targets = true; // weights/entropy from w_T (else w_C)

    void validate() const;
};

struct PredictiveMoments {
    double mean = 0.0;
    double variance = 0.0;       // encoding variance + noise_variance
    double noise_variance = 0.0; // decoder sigma^2 at the latent mean
    std::vector<double> samples; // per-sample decoder means
};

struct LatentExportRow {
    std::string unit_id;
    int group = -1; // true label when present, else the inferred one
    std::vector<double> mean;
};

struct LatentMeanTable {
    bool untrained = false;
    std::vector<LatentExportRow> rows;
};

// Observations with x <= x_max; falls back to the single earliest
// observation when the threshold excludes everything.
std::vector<Observation> observations_up_to(const Signal& signal, double x_max);

// Label-aware neural process: set encoders u/v/w, classifier head phi,
// latent heads mu_e/sigma_e, and a label-conditioned decoder. With
// label_aware=false the label pathway is absent and the model is the
// attentive latent-NP baseline over the same substrate.
class LanpModel {
public:
    LanpModel(ModelConfig cfg, std::uint64_t init_seed);
    LanpModel(ModelConfig cfg, ParameterStore params);

    const ModelConfig& config() const { return cfg_; }
    const ParameterStore& params() const { return params_; }
    ParameterStore& params() { return params_; }

    std::int64_t trained_iterations() const { return trained_iterations_; }
    void set_trained_iterations(std::int64_t n) { trained_iterations_ = n; }

    // ---- encoders / decoder (eager views of the graph builders) ----
    Tensor encode_u(std::span<const Observation> set,
                    std::optional<double> query_x = std::nullopt) const;
    std::pair<Tensor, std::vector<double>> encode_w(std::span<const Observation> set) const;
    LatentGaussian encode_z(std::span<const Observation> set,
                            std::optional<int> label) const;
    std::pair<double, double> decode(double x, std::optional<int> label, const Tensor& u_c,
                                     const Tensor& z) const;

    // ---- objectives ----
    double elbo_labeled(const SplitSet& split, int label, const Tensor& noise) const;
    // labeled bound without its log q(c|w_C) term (the L_U summand)
    double elbo_labeled_core(const SplitSet& split, int label, const Tensor& noise) const;
    double elbo_unlabeled(const SplitSet& split, const Tensor& noise) const;
    double batch_objective(std::span<const Episode> episodes, double lambda,
                           std::span<const Tensor> noises) const;

    // Episode contribution to the regularized objective (maximized):
    // labeled -> L_L + lambda log q(c|w_C); unlabeled -> L_U.
    Value build_episode_objective(Ctx& ctx, const Episode& episode, const Tensor& noise,
                                  double lambda) const;

    // ---- prediction (no parameter mutation) ----
    // decoder mean at the latent mean, one value per grid point (the
    // K-sample machinery only affects the variance, not this path)
    std::vector<double> predictive_mean(std::span<const Observation> contexts,
                                        std::span<const double> xs,
                                        std::optional<int> label) const;
    PredictiveMoments predict(std::span<const Observation> contexts, double x, int k,
                              std::optional<int> label, RngStream& rng) const;
    std::vector<PredictiveMoments> predict_grid(std::span<const Observation> contexts,
                                                std::span<const double> xs, int k,
                                                std::optional<int> label,
                                                RngStream& rng) const;
    std::pair<int, std::vector<double>> predict_label(
        std::span<const Observation> contexts) const;

    LatentMeanTable export_latent_means(std::span<const Signal> units, double alpha,
                                        double domain_end) const;

private:
    struct EpisodePieces; // shared encodings for one episode build

    Value encoder_reps(Ctx& ctx, const Mlp& mlp, const SelfAttention& sa, Value xy) const;
    Value u_context_for(Ctx& ctx, std::span<const Observation> contexts, Value queries_x,
                        Value* u_values_cache) const;
    std::pair<Value, Value> z_heads(Ctx& ctx, Value vbar, std::optional<int> label) const;
    std::pair<Value, Value> decode_rows(Ctx& ctx, Value xs, std::optional<int> label, Value u,
                                        Value z_rows) const;
    Value class_logits(Ctx& ctx, Value wbar) const;
    Value log_prob_of_class(Ctx& ctx, Value logits, int label) const;
    EpisodePieces episode_pieces(Ctx& ctx, const SplitSet& split, const Tensor& noise) const;
    Value episode_core(Ctx& ctx, const EpisodePieces& pieces,
                       std::optional<int> label) const;

    ModelConfig cfg_;
    ParameterStore params_;
    Mlp enc_u_, enc_v_, enc_w_;
    SelfAttention sa_u_, sa_v_, sa_w_;
    CrossAttention cross_;
    Mlp u_proj_; // 128 -> d_lat for mean aggregation
    Mlp head_mu_e_, head_sigma_e_, head_phi_;
    Mlp dec_mu_, dec_sigma_;
    std::int64_t trained_iterations_ = 0;
};

Tensor observations_xy(std::span<const Observation> obs);
Tensor observations_x(std::span<const Observation> obs);
Tensor observations_y(std::span<const Observation> obs);

} // namespace lanp
