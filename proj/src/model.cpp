#include "lanp/model.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "lanp/parallel.hpp"

namespace lanp {

void ModelConfig::validate() const {
    if (d_in != 1 || d_out != 1)
        throw DomainError("ModelConfig: this build handles scalar x and y (d_in = d_out = 1)");
    if (classes < 1) throw DomainError("ModelConfig: classes must be >= 1");
    if (d_lat < 1) throw DomainError("ModelConfig: d_lat must be >= 1");
    if (hidden < 1) throw DomainError("ModelConfig: hidden width must be >= 1");
    if (lambda < 0.0) throw DomainError("ModelConfig: lambda must be >= 0");
    if (pred_samples < 1) throw DomainError("ModelConfig: prediction samples must be >= 1");
    if (sigma_d_floor <= 0.0 || sigma_e_floor <= 0.0)
        throw DomainError("ModelConfig: sigma floors must be positive");
}

std::vector<Observation> observations_up_to(const Signal& signal, double x_max) {
    std::vector<Observation> out;
    for (const Observation& o : signal.obs)
        if (o.x <= x_max) out.push_back(o);
    if (out.empty() && !signal.obs.empty()) out.push_back(signal.obs.front());
    return out;
}

Tensor observations_xy(std::span<const Observation> obs) {
    Tensor t({obs.size(), 2});
    for (std::size_t i = 0; i < obs.size(); ++i) {
        t.at(i, 0) = obs[i].x;
        t.at(i, 1) = obs[i].y;
    }
    return t;
}

Tensor observations_x(std::span<const Observation> obs) {
    Tensor t({obs.size(), 1});
    for (std::size_t i = 0; i < obs.size(); ++i) t[i] = obs[i].x;
    return t;
}

Tensor observations_y(std::span<const Observation> obs) {
    Tensor t({obs.size(), 1});
    for (std::size_t i = 0; i < obs.size(); ++i) t[i] = obs[i].y;
    return t;
}

namespace {

Tensor one_hot(int label, int classes) {
    Tensor t({1, (std::size_t)classes});
    t[(std::size_t)label] = 1.0;
    return t;
}

int check_label(std::optional<int> label, int classes, bool required) {
    if (!label) {
        if (required) throw DomainError("LanpModel: label required here");
        return -1;
    }
    if (*label < 0 || *label >= classes) throw DomainError("LanpModel: label out of range");
    return *label;
}

} // namespace

LanpModel::LanpModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int dm = cfg_.self_attention.model_dim;
    const int in_dim = cfg_.d_in + cfg_.d_out;
    enc_u_ = Mlp("enc_u", {in_dim, dm, {cfg_.hidden}, MlpConfig::Final::kNone, 0.0});
    enc_v_ = Mlp("enc_v", {in_dim, dm, {cfg_.hidden}, MlpConfig::Final::kNone, 0.0});
    sa_u_ = SelfAttention("sa_u", cfg_.self_attention);
    sa_v_ = SelfAttention("sa_v", cfg_.self_attention);
    AttentionConfig cross_cfg{AttentionConfig::Kind::kMultiHead, cfg_.cross_heads, dm};
    cross_ = CrossAttention("cross", cross_cfg, cfg_.d_in, cfg_.d_lat);
    u_proj_ = Mlp("u_proj", {dm, cfg_.d_lat, {}, MlpConfig::Final::kNone, 0.0});
    int mu_e_in = dm + (cfg_.label_aware ? cfg_.classes : 0);
    head_mu_e_ = Mlp("mu_e", {mu_e_in, cfg_.d_lat, {}, MlpConfig::Final::kNone, 0.0});
    head_sigma_e_ = Mlp("sigma_e", {dm, cfg_.d_lat, {}, MlpConfig::Final::kSoftplusFloor,
                                    cfg_.sigma_e_floor});
    int dec_in = cfg_.d_in + (cfg_.label_aware ? cfg_.classes : 0) + 2 * cfg_.d_lat;
    dec_mu_ = Mlp("dec_mu",
                  {dec_in, cfg_.d_out, {cfg_.hidden, cfg_.hidden}, MlpConfig::Final::kNone, 0.0});
    dec_sigma_ = Mlp("dec_sigma", {dec_in, cfg_.d_out, {cfg_.hidden, cfg_.hidden},
                                   MlpConfig::Final::kSoftplusFloor, cfg_.sigma_d_floor});

    RngStream init(init_seed, 0x1a9b);
    enc_u_.init(params_, init);
    enc_v_.init(params_, init);
    sa_u_.init(params_, init);
    sa_v_.init(params_, init);
    if (cfg_.use_cross_attention)
        cross_.init(params_, init);
    else
        u_proj_.init(params_, init);
    head_mu_e_.init(params_, init);
    head_sigma_e_.init(params_, init);
    dec_mu_.init(params_, init);
    dec_sigma_.init(params_, init);
    if (cfg_.label_aware) {
        enc_w_ = Mlp("enc_w", {in_dim, dm, {cfg_.hidden}, MlpConfig::Final::kNone, 0.0});
        sa_w_ = SelfAttention("sa_w", cfg_.self_attention);
        head_phi_ = Mlp("phi", {dm, cfg_.classes, {}, MlpConfig::Final::kNone, 0.0});
        enc_w_.init(params_, init);
        sa_w_.init(params_, init);
        head_phi_.init(params_, init);
    }
}

LanpModel::LanpModel(ModelConfig cfg, ParameterStore params)
    : LanpModel(std::move(cfg), std::uint64_t{0}) {
    if (params.size() != params_.size())
        throw DataError("LanpModel: parameter set does not match configuration");
    for (auto& [name, t] : params_) {
        const Tensor& src = params.at(name);
        if (!src.same_shape(t))
            throw DataError("LanpModel: parameter '" + name + "' shape mismatch");
        t = src;
    }
}

// ---- internal builders ----

Value LanpModel::encoder_reps(Ctx& ctx, const Mlp& mlp, const SelfAttention& sa,
                              Value xy) const {
    return sa.forward(ctx, mlp.forward(ctx, xy));
}

Value LanpModel::u_context_for(Ctx& ctx, std::span<const Observation> contexts,
                               Value queries_x, Value* u_values_cache) const {
    if (contexts.empty()) throw DomainError("encode_u: empty context set");
    Value u_vals;
    if (u_values_cache && u_values_cache->valid()) {
        u_vals = *u_values_cache;
    } else {
        u_vals = encoder_reps(ctx, enc_u_, sa_u_, ctx.g.constant(observations_xy(contexts)));
        if (u_values_cache) *u_values_cache = u_vals;
    }
    if (cfg_.use_cross_attention) {
        Value keys = ctx.g.constant(observations_x(contexts));
        return cross_.forward(ctx, keys, u_vals, queries_x);
    }
    Value mean = ctx.g.col_mean(u_vals);
    return ctx.g.repeat_rows(u_proj_.forward(ctx, mean), queries_x.rows());
}

std::pair<Value, Value> LanpModel::z_heads(Ctx& ctx, Value vbar,
                                           std::optional<int> label) const {
    Value mu_in = vbar;
    if (cfg_.label_aware) {
        int c = check_label(label, cfg_.classes, true);
        mu_in = ctx.g.concat_cols({ctx.g.constant(one_hot(c, cfg_.classes)), vbar});
    }
    Value mu = head_mu_e_.forward(ctx, mu_in);
    Value sigma = head_sigma_e_.forward(ctx, vbar); // variance sees the set only, not c
    return {mu, sigma};
}

std::pair<Value, Value> LanpModel::decode_rows(Ctx& ctx, Value xs, std::optional<int> label,
                                               Value u, Value z_rows) const {
    std::vector<Value> parts;
    parts.push_back(xs);
    if (cfg_.label_aware) {
        int c = check_label(label, cfg_.classes, true);
        parts.push_back(ctx.g.repeat_rows(ctx.g.constant(one_hot(c, cfg_.classes)), xs.rows()));
    }
    parts.push_back(u);
    parts.push_back(z_rows.rows() == xs.rows() ? z_rows
                                               : ctx.g.repeat_rows(z_rows, xs.rows()));
    Value input = ctx.g.concat_cols(parts);
    return {dec_mu_.forward(ctx, input), dec_sigma_.forward(ctx, input)};
}

Value LanpModel::class_logits(Ctx& ctx, Value wbar) const {
    return head_phi_.forward(ctx, wbar);
}

// log softmax(logits)[label]; the max shift is a build-time constant so the
// expression stays finite for extreme logits
Value LanpModel::log_prob_of_class(Ctx& ctx, Value logits, int label) const {
    Graph& g = ctx.g;
    const Tensor& lv = logits.val();
    double mx = lv[0];
    for (std::size_t i = 1; i < lv.numel(); ++i) mx = std::max(mx, lv[i]);
    Value shifted = g.shift(logits, -mx);
    Value lse = g.log(g.sum_all(g.exp(shifted)));
    return g.sub(g.slice_cols(shifted, (std::size_t)label, (std::size_t)label + 1), lse);
}

struct LanpModel::EpisodePieces {
    Value xs_t, ys_t;
    Value u_t; // T x d_lat, per-target context representation
    Value vbar_t, vbar_c;
    Value sigma_t, sigma_c; // shared across classes
    Value noise;
};

LanpModel::EpisodePieces LanpModel::episode_pieces(Ctx& ctx, const SplitSet& split,
                                                   const Tensor& noise) const {
    if (split.contexts.empty()) throw DomainError("episode: empty context set");
    if (split.targets.empty()) throw DomainError("episode: empty target set");
    if (noise.numel() != (std::size_t)cfg_.d_lat)
        throw ShapeError("episode: noise must have d_lat entries");
    Graph& g = ctx.g;
    EpisodePieces p;
    p.xs_t = g.constant(observations_x(split.targets));
    p.ys_t = g.constant(observations_y(split.targets));
    p.u_t = u_context_for(ctx, split.contexts, p.xs_t, nullptr);
    p.vbar_t = g.col_mean(
        encoder_reps(ctx, enc_v_, sa_v_, g.constant(observations_xy(split.targets))));
    p.vbar_c = g.col_mean(
        encoder_reps(ctx, enc_v_, sa_v_, g.constant(observations_xy(split.contexts))));
    p.sigma_t = head_sigma_e_.forward(ctx, p.vbar_t);
    p.sigma_c = head_sigma_e_.forward(ctx, p.vbar_c);
    p.noise = g.constant(noise);
    return p;
}

// sum_T log p(y | x, c, u_C, z) - KL(q(z|c,v_T) || q(z|c,v_C)), single-sample
Value LanpModel::episode_core(Ctx& ctx, const EpisodePieces& p,
                              std::optional<int> label) const {
    Graph& g = ctx.g;
    Value mu_t, mu_c;
    if (cfg_.label_aware) {
        int c = check_label(label, cfg_.classes, true);
        Value onehot = g.constant(one_hot(c, cfg_.classes));
        mu_t = head_mu_e_.forward(ctx, g.concat_cols({onehot, p.vbar_t}));
        mu_c = head_mu_e_.forward(ctx, g.concat_cols({onehot, p.vbar_c}));
    } else {
        mu_t = head_mu_e_.forward(ctx, p.vbar_t);
        mu_c = head_mu_e_.forward(ctx, p.vbar_c);
    }
    Value z = reparam_sample(mu_t, p.sigma_t, p.noise);
    auto [dec_mu, dec_sigma] = decode_rows(ctx, p.xs_t, label, p.u_t, z);
    Value loglik = gaussian_log_pdf(p.ys_t, dec_mu, dec_sigma);
    Value kl = kl_diag_gaussians(mu_t, p.sigma_t, mu_c, p.sigma_c);
    return g.sub(loglik, kl);
}

Value LanpModel::build_episode_objective(Ctx& ctx, const Episode& episode,
                                         const Tensor& noise, double lambda) const {
    Graph& g = ctx.g;
    EpisodePieces p = episode_pieces(ctx, episode.split, noise);
    if (!cfg_.label_aware) return episode_core(ctx, p, std::nullopt);

    if (episode.label) {
        int c = check_label(episode.label, cfg_.classes, true);
        Value core = episode_core(ctx, p, c);
        Value wbar_c = g.col_mean(encoder_reps(
            ctx, enc_w_, sa_w_, g.constant(observations_xy(episode.split.contexts))));
        Value log_q = log_prob_of_class(ctx, class_logits(ctx, wbar_c), c);
        // L_L plus the lambda-weighted classifier regularizer
        return g.add(core, g.scale(g.sum_all(log_q), 1.0 + lambda));
    }

    // unlabeled: class mixture of label-free bounds plus the entropy reward
    std::span<const Observation> w_side =
        cfg_.unlabeled_weights_from_targets
            ? std::span<const Observation>(episode.split.targets)
            : std::span<const Observation>(episode.split.contexts);
    Value wbar =
        g.col_mean(encoder_reps(ctx, enc_w_, sa_w_, g.constant(observations_xy(w_side))));
    Value probs = g.row_softmax(class_logits(ctx, wbar));
    Value total;
    for (int l = 0; l < cfg_.classes; ++l) {
        Value weight = g.slice_cols(probs, (std::size_t)l, (std::size_t)l + 1);
        Value term = g.mul(weight, episode_core(ctx, p, l));
        total = (l == 0) ? term : g.add(total, term);
    }
    return g.add(g.sum_all(total), g.entropy(probs));
}

// ---- eager objective wrappers ----

double LanpModel::elbo_labeled(const SplitSet& split, int label, const Tensor& noise) const {
    if (!cfg_.label_aware)
        throw DomainError("elbo_labeled: model runs with label_aware = false");
    Graph g;
    Ctx ctx{g, params_};
    EpisodePieces p = episode_pieces(ctx, split, noise);
    Value core = episode_core(ctx, p, label);
    Value wbar_c = g.col_mean(
        encoder_reps(ctx, enc_w_, sa_w_, g.constant(observations_xy(split.contexts))));
    Value log_q = log_prob_of_class(ctx, class_logits(ctx, wbar_c), label);
    return g.add(core, g.sum_all(log_q)).scalar();
}

double LanpModel::elbo_labeled_core(const SplitSet& split, int label,
                                    const Tensor& noise) const {
    Graph g;
    Ctx ctx{g, params_};
    EpisodePieces p = episode_pieces(ctx, split, noise);
    return episode_core(ctx, p, cfg_.label_aware ? std::optional<int>(label) : std::nullopt)
        .scalar();
}

double LanpModel::elbo_unlabeled(const SplitSet& split, const Tensor& noise) const {
    Graph g;
    Ctx ctx{g, params_};
    Episode ep{split, std::nullopt};
    return build_episode_objective(ctx, ep, noise, 0.0).scalar();
}

double LanpModel::batch_objective(std::span<const Episode> episodes, double lambda,
                                  std::span<const Tensor> noises) const {
    if (episodes.empty()) throw DomainError("batch_objective: empty batch");
    if (noises.size() != episodes.size())
        throw ShapeError("batch_objective: one noise vector per episode required");
    double total = 0.0;
    for (std::size_t i = 0; i < episodes.size(); ++i) {
        Graph g;
        Ctx ctx{g, params_};
        total += build_episode_objective(ctx, episodes[i], noises[i], lambda).scalar();
    }
    return total;
}

// ---- eager encoder views ----

Tensor LanpModel::encode_u(std::span<const Observation> set,
                           std::optional<double> query_x) const {
    if (set.empty()) throw DomainError("encode_u: empty set");
    Graph g;
    Ctx ctx{g, params_};
    if (cfg_.use_cross_attention) {
        if (!query_x) throw DomainError("encode_u: query_x required with cross-attention");
        Tensor q({1, 1});
        q[0] = *query_x;
        return u_context_for(ctx, set, g.constant(q), nullptr).val();
    }
    Value u_vals = encoder_reps(ctx, enc_u_, sa_u_, g.constant(observations_xy(set)));
    return u_proj_.forward(ctx, g.col_mean(u_vals)).val();
}

std::pair<Tensor, std::vector<double>> LanpModel::encode_w(
    std::span<const Observation> set) const {
    if (!cfg_.label_aware) throw DomainError("encode_w: model runs with label_aware = false");
    if (set.empty()) throw DomainError("encode_w: empty set");
    Graph g;
    Ctx ctx{g, params_};
    Value wbar = g.col_mean(encoder_reps(ctx, enc_w_, sa_w_, g.constant(observations_xy(set))));
    Value probs = g.row_softmax(class_logits(ctx, wbar));
    const Tensor& pv = probs.val();
    return {wbar.val(), std::vector<double>(pv.data(), pv.data() + pv.numel())};
}

LatentGaussian LanpModel::encode_z(std::span<const Observation> set,
                                   std::optional<int> label) const {
    if (set.empty()) throw DomainError("encode_z: empty set");
    Graph g;
    Ctx ctx{g, params_};
    Value vbar = g.col_mean(encoder_reps(ctx, enc_v_, sa_v_, g.constant(observations_xy(set))));
    auto [mu, sigma] = z_heads(ctx, vbar, label);
    return LatentGaussian{mu.val(), sigma.val()};
}

std::pair<double, double> LanpModel::decode(double x, std::optional<int> label,
                                            const Tensor& u_c, const Tensor& z) const {
    if (u_c.numel() != (std::size_t)cfg_.d_lat || z.numel() != (std::size_t)cfg_.d_lat)
        throw ShapeError("decode: u_C and z must have d_lat entries");
    Graph g;
    Ctx ctx{g, params_};
    Tensor xs({1, 1});
    xs[0] = x;
    Tensor u_row({1, (std::size_t)cfg_.d_lat});
    Tensor z_row({1, (std::size_t)cfg_.d_lat});
    for (std::size_t i = 0; i < u_row.numel(); ++i) {
        u_row[i] = u_c[i];
        z_row[i] = z[i];
    }
    auto [mu, sigma] =
        decode_rows(ctx, g.constant(xs), label, g.constant(u_row), g.constant(z_row));
    return {mu.val()[0], sigma.val()[0]};
}

// ---- prediction ----

std::pair<int, std::vector<double>> LanpModel::predict_label(
    std::span<const Observation> contexts) const {
    auto [wbar, probs] = encode_w(contexts);
    int best = 0;
    for (int l = 1; l < (int)probs.size(); ++l)
        if (probs[(std::size_t)l] > probs[(std::size_t)best]) best = l; // ties keep lowest index
    return {best, probs};
}

std::vector<double> LanpModel::predictive_mean(std::span<const Observation> contexts,
                                               std::span<const double> xs,
                                               std::optional<int> label) const {
    if (contexts.empty()) throw DomainError("predict: empty context set");
    if (xs.empty()) return {};
    Graph g;
    Ctx ctx{g, params_};
    std::optional<int> label_used = label;
    if (cfg_.label_aware) {
        if (!label_used) label_used = predict_label(contexts).first;
        check_label(label_used, cfg_.classes, true);
    } else {
        label_used.reset();
    }
    Tensor grid = Tensor::uninit(xs.size(), 1);
    for (std::size_t i = 0; i < xs.size(); ++i) grid[i] = xs[i];
    Value grid_v = g.constant(std::move(grid));
    Value u = u_context_for(ctx, contexts, grid_v, nullptr);
    Value vbar =
        g.col_mean(encoder_reps(ctx, enc_v_, sa_v_, g.constant(observations_xy(contexts))));
    auto [mu_e, sigma_e] = z_heads(ctx, vbar, label_used);
    auto [mean_mu, mean_sigma] = decode_rows(ctx, grid_v, label_used, u, mu_e);
    const Tensor& mv = mean_mu.val();
    return std::vector<double>(mv.data(), mv.data() + mv.numel());
}

std::vector<PredictiveMoments> LanpModel::predict_grid(std::span<const Observation> contexts,
                                                       std::span<const double> xs, int k,
                                                       std::optional<int> label,
                                                       RngStream& rng) const {
    if (contexts.empty()) throw DomainError("predict: empty context set");
    if (k < 1) throw DomainError("predict: K must be >= 1");
    const std::size_t m = xs.size();
    if (m == 0) return {};

    Graph g;
    Ctx ctx{g, params_};
    std::optional<int> label_used = label;
    if (cfg_.label_aware) {
        if (!label_used) label_used = predict_label(contexts).first;
        check_label(label_used, cfg_.classes, true);
    } else {
        label_used.reset();
    }

    Tensor grid({m, 1});
    for (std::size_t i = 0; i < m; ++i) grid[i] = xs[i];
    Value grid_v = g.constant(grid);
    Value u = u_context_for(ctx, contexts, grid_v, nullptr); // m x d_lat
    Value vbar =
        g.col_mean(encoder_reps(ctx, enc_v_, sa_v_, g.constant(observations_xy(contexts))));
    auto [mu_e, sigma_e] = z_heads(ctx, vbar, label_used);
    auto [mean_mu, mean_sigma] = decode_rows(ctx, grid_v, label_used, u, mu_e);

    // K latent draws decoded in one batched pass over (sample, grid) rows
    const std::size_t d_lat = (std::size_t)cfg_.d_lat;
    const Tensor& mu_v = mu_e.val();
    const Tensor& sg_v = sigma_e.val();
    const Tensor& u_v = u.val();
    const std::size_t cls = cfg_.label_aware ? (std::size_t)cfg_.classes : 0;
    const std::size_t in_dim = 1 + cls + 2 * d_lat;
    // The first decoder layer splits into a shared base over grid rows plus a
    // per-sample rank-1 term from z·W_bottom, so the K-sample pass costs one
    // small gemm per layer instead of a (K·m)-row input build.
    using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const std::size_t in_base = 1 + cls + d_lat;
    const Tensor& w1 = params_.at("dec_mu.fc1.w");
    const Tensor& b1 = params_.at("dec_mu.fc1.b");
    const Tensor& w2 = params_.at("dec_mu.fc2.w");
    const Tensor& b2 = params_.at("dec_mu.fc2.b");
    const Tensor& w3 = params_.at("dec_mu.out.w");
    const Tensor& b3 = params_.at("dec_mu.out.b");
    const std::size_t h = w1.cols();
    Eigen::Map<const EMat> w1m(w1.data(), (Eigen::Index)w1.rows(), (Eigen::Index)h);
    Eigen::Map<const EMat> w2m(w2.data(), (Eigen::Index)w2.rows(), (Eigen::Index)w2.cols());
    Eigen::Map<const EMat> w3m(w3.data(), (Eigen::Index)w3.rows(), (Eigen::Index)w3.cols());
    Eigen::Map<const Eigen::RowVectorXd> b1m(b1.data(), (Eigen::Index)h);
    Eigen::Map<const Eigen::RowVectorXd> b2m(b2.data(), (Eigen::Index)w2.cols());

    EMat base(m, in_base);
    for (std::size_t i = 0; i < m; ++i) {
        base(i, 0) = xs[i];
        for (std::size_t j = 0; j < cls; ++j) base(i, 1 + j) = 0.0;
        if (cls > 0) base(i, 1 + (std::size_t)*label_used) = 1.0;
        for (std::size_t j = 0; j < d_lat; ++j) base(i, 1 + cls + j) = u_v.at(i, j);
    }
    EMat base_pre = (base * w1m.topRows((Eigen::Index)in_base)).rowwise() + b1m;

    EMat z_draws(k, d_lat); // drawn sequentially so the stream stays deterministic
    for (int s = 0; s < k; ++s)
        for (std::size_t j = 0; j < d_lat; ++j)
            z_draws(s, j) = mu_v[j] + sg_v[j] * rng.normal();
    EMat z_pre = z_draws * w1m.bottomRows((Eigen::Index)d_lat);

    std::vector<double> sm(m * (std::size_t)k);
    parallel_chunks((std::size_t)k, thread_count(), [&](std::size_t klo, std::size_t khi) {
        // per-sample blocks keep the working set inside L2
        EMat h1(m, h), h2(m, w2.cols());
        Eigen::VectorXd outv(m);
        for (std::size_t s = klo; s < khi; ++s) {
            h1 = (base_pre.rowwise() + z_pre.row((Eigen::Index)s)).cwiseMax(0.0);
            h2.noalias() = h1 * w2m;
            h2 = (h2.rowwise() + b2m).cwiseMax(0.0);
            outv.noalias() = h2 * w3m;
            for (std::size_t i = 0; i < m; ++i) sm[s * m + i] = outv[(Eigen::Index)i] + b3[0];
        }
    });

    std::vector<PredictiveMoments> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        PredictiveMoments& pm = out[i];
        pm.mean = mean_mu.val()[i];
        const double sd = mean_sigma.val()[i];
        pm.noise_variance = sd * sd;
        pm.samples.resize((std::size_t)k);
        double avg = 0.0;
        for (int s = 0; s < k; ++s) {
            pm.samples[(std::size_t)s] = sm[(std::size_t)s * m + i];
            avg += pm.samples[(std::size_t)s];
        }
        avg /= (double)k;
        double var = 0.0; // two-pass form of (1/K)Σŷ² - ((1/K)Σŷ)², never negative
        for (int s = 0; s < k; ++s) {
            const double d = pm.samples[(std::size_t)s] - avg;
            var += d * d;
        }
        pm.variance = var / (double)k + pm.noise_variance;
    }
    return out;
}

PredictiveMoments LanpModel::predict(std::span<const Observation> contexts, double x, int k,
                                     std::optional<int> label, RngStream& rng) const {
    const double xs[1] = {x};
    return predict_grid(contexts, xs, k, label, rng)[0];
}

LatentMeanTable LanpModel::export_latent_means(std::span<const Signal> units, double alpha,
                                               double domain_end) const {
    LatentMeanTable table;
    table.untrained = trained_iterations_ == 0;
    for (const Signal& s : units) {
        std::vector<Observation> contexts = observations_up_to(s, alpha * domain_end);
        std::optional<int> label = s.label;
        if (cfg_.label_aware && !label) label = predict_label(contexts).first;
        LatentGaussian zg = encode_z(contexts, cfg_.label_aware ? label : std::nullopt);
        LatentExportRow row;
        row.unit_id = s.unit_id;
        row.group = label.value_or(-1);
        row.mean.assign(zg.mean.data(), zg.mean.data() + zg.mean.numel());
        table.rows.push_back(std::move(row));
    }
    return table;
}

} // namespace lanp
