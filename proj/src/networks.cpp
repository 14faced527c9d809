#include "lanp/networks.hpp"

#include <cmath>

namespace lanp {

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, std::size_t rows,
                   std::size_t cols, const RngStream& base, const std::string& name) {
    RngStream rng = base.substream(fnv1a64(name));
    const double bound = std::sqrt(6.0 / (double)(fan_in + fan_out));
    Tensor t({rows, cols});
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.uniform(-bound, bound);
    return t;
}

namespace {

void add_affine(ParameterStore& store, const RngStream& base, const std::string& name,
                std::size_t in, std::size_t out) {
    store.add(name + ".w", xavier_init(in, out, in, out, base, name + ".w"));
    store.add(name + ".b", Tensor::zeros(1, out));
}

Value affine(Ctx& ctx, const std::string& name, Value x) {
    return ctx.g.affine(x, ctx.param(name + ".w"), ctx.param(name + ".b"));
}

Value affine_relu(Ctx& ctx, const std::string& name, Value x) {
    return ctx.g.affine_relu(x, ctx.param(name + ".w"), ctx.param(name + ".b"));
}

} // namespace

// ---- Mlp ----

Mlp::Mlp(std::string prefix, MlpConfig cfg) : prefix_(std::move(prefix)), cfg_(std::move(cfg)) {
    if (cfg_.input_dim <= 0 || cfg_.output_dim <= 0)
        throw DomainError("Mlp: dimensions must be positive");
    for (int h : cfg_.hidden)
        if (h <= 0) throw DomainError("Mlp: hidden widths must be positive");
}

void Mlp::init(ParameterStore& store, const RngStream& base) const {
    std::size_t in = (std::size_t)cfg_.input_dim;
    for (std::size_t k = 0; k < cfg_.hidden.size(); ++k) {
        std::size_t out = (std::size_t)cfg_.hidden[k];
        add_affine(store, base, prefix_ + ".fc" + std::to_string(k + 1), in, out);
        in = out;
    }
    add_affine(store, base, prefix_ + ".out", in, (std::size_t)cfg_.output_dim);
}

Value Mlp::forward(Ctx& ctx, Value input) const {
    if (input.cols() != (std::size_t)cfg_.input_dim)
        throw ShapeError("Mlp '" + prefix_ + "': input dim mismatch");
    Value h = input;
    for (std::size_t k = 0; k < cfg_.hidden.size(); ++k)
        h = affine_relu(ctx, prefix_ + ".fc" + std::to_string(k + 1), h);
    Value out = affine(ctx, prefix_ + ".out", h);
    switch (cfg_.final_act) {
        case MlpConfig::Final::kNone: return out;
        case MlpConfig::Final::kSoftplusFloor:
            return ctx.g.shift(ctx.g.softplus(out), cfg_.floor);
        case MlpConfig::Final::kSoftmax: return ctx.g.row_softmax(out);
    }
    return out;
}

// ---- SelfAttention ----

SelfAttention::SelfAttention(std::string prefix, AttentionConfig cfg)
    : prefix_(std::move(prefix)), cfg_(cfg) {
    if (cfg_.kind == AttentionConfig::Kind::kDotProduct) cfg_.heads = 1;
    if (cfg_.kind != AttentionConfig::Kind::kUniform && cfg_.model_dim % cfg_.heads != 0)
        throw DomainError("SelfAttention: model_dim must be divisible by heads");
}

void SelfAttention::init(ParameterStore& store, const RngStream& base) const {
    if (cfg_.kind == AttentionConfig::Kind::kUniform) return;
    std::size_t d = (std::size_t)cfg_.model_dim;
    add_affine(store, base, prefix_ + ".q", d, d);
    add_affine(store, base, prefix_ + ".k", d, d);
    add_affine(store, base, prefix_ + ".v", d, d);
    add_affine(store, base, prefix_ + ".o", d, d);
}

namespace {

// softmax(Q Kᵀ / sqrt(d_head)) V, heads sliced out of the projected matrices
Value multihead_attend(Ctx& ctx, Value q, Value k, Value v, int heads) {
    Graph& g = ctx.g;
    std::size_t d = q.cols();
    std::size_t dh = d / (std::size_t)heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt((double)dh);
    std::vector<Value> head_outs;
    head_outs.reserve((std::size_t)heads);
    for (int h = 0; h < heads; ++h) {
        std::size_t lo = (std::size_t)h * dh, hi = lo + dh;
        Value qh = g.slice_cols(q, lo, hi);
        Value kh = g.slice_cols(k, lo, hi);
        Value vh = g.slice_cols(v, lo, hi);
        Value scores = g.scale(g.matmul(qh, g.transpose(kh)), inv_sqrt_dh);
        head_outs.push_back(g.matmul(g.row_softmax(scores), vh));
    }
    return head_outs.size() == 1 ? head_outs[0] : g.concat_cols(head_outs);
}

} // namespace

Value SelfAttention::forward(Ctx& ctx, Value reps) const {
    if (reps.rows() == 0) throw ShapeError("SelfAttention: empty set");
    if (cfg_.kind == AttentionConfig::Kind::kUniform)
        return ctx.g.repeat_rows(ctx.g.col_mean(reps), reps.rows());
    if (reps.cols() != (std::size_t)cfg_.model_dim)
        throw ShapeError("SelfAttention: representation dim mismatch");
    Value q = affine(ctx, prefix_ + ".q", reps);
    Value k = affine(ctx, prefix_ + ".k", reps);
    Value v = affine(ctx, prefix_ + ".v", reps);
    Value attended = multihead_attend(ctx, q, k, v, cfg_.heads);
    return affine(ctx, prefix_ + ".o", attended);
}

// ---- CrossAttention ----

CrossAttention::CrossAttention(std::string prefix, AttentionConfig cfg, int input_dim,
                               int out_dim)
    : prefix_(std::move(prefix)), cfg_(cfg), input_dim_(input_dim), out_dim_(out_dim) {
    if (cfg_.kind == AttentionConfig::Kind::kDotProduct) cfg_.heads = 1;
    if (cfg_.kind != AttentionConfig::Kind::kUniform && cfg_.model_dim % cfg_.heads != 0)
        throw DomainError("CrossAttention: model_dim must be divisible by heads");
}

void CrossAttention::init(ParameterStore& store, const RngStream& base) const {
    std::size_t d = (std::size_t)cfg_.model_dim;
    if (cfg_.kind != AttentionConfig::Kind::kUniform) {
        // shared embedding of raw inputs for keys and the query
        add_affine(store, base, prefix_ + ".embed.fc1", (std::size_t)input_dim_, d);
        add_affine(store, base, prefix_ + ".embed.fc2", d, d);
        add_affine(store, base, prefix_ + ".q", d, d);
        add_affine(store, base, prefix_ + ".k", d, d);
        add_affine(store, base, prefix_ + ".v", d, d);
        add_affine(store, base, prefix_ + ".o", d, d);
    }
    add_affine(store, base, prefix_ + ".final", d, (std::size_t)out_dim_);
}

Value CrossAttention::forward(Ctx& ctx, Value keys_x, Value values, Value queries_x) const {
    Graph& g = ctx.g;
    if (keys_x.rows() == 0) throw ShapeError("CrossAttention: empty context set");
    if (keys_x.rows() != values.rows())
        throw ShapeError("CrossAttention: key/value count mismatch");
    if (cfg_.kind == AttentionConfig::Kind::kUniform) {
        Value mean = g.col_mean(values);
        return affine(ctx, prefix_ + ".final", g.repeat_rows(mean, queries_x.rows()));
    }
    auto embed = [&](Value x) {
        Value h = affine_relu(ctx, prefix_ + ".embed.fc1", x);
        return affine_relu(ctx, prefix_ + ".embed.fc2", h);
    };
    Value k = affine(ctx, prefix_ + ".k", embed(keys_x));
    Value q = affine(ctx, prefix_ + ".q", embed(queries_x));
    Value v = affine(ctx, prefix_ + ".v", values);
    Value attended = multihead_attend(ctx, q, k, v, cfg_.heads);
    Value out = affine(ctx, prefix_ + ".o", attended);
    return affine(ctx, prefix_ + ".final", out);
}

} // namespace lanp
