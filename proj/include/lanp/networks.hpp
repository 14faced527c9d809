#pragma once
#include <string>
#include <vector>

#include "lanp/graph.hpp"
#include "lanp/param_store.hpp"
#include "lanp/rng.hpp"

namespace lanp {

// Bundles the tape and the parameters it reads; passed through every
// forward builder.
struct Ctx {
    Graph& g;
    const ParameterStore& params;

    Value param(const std::string& name) { return g.param(params, name); }
};

struct MlpConfig {
    int input_dim = 0;
    int output_dim = 0;
    std::vector<int> hidden = {128, 128}; // empty -> single affine map
    enum class Final { kNone, kSoftplusFloor, kSoftmax };
    Final final_act = Final::kNone;
    double floor = 0.0; // added after softplus for kSoftplusFloor
};

// Fully-connected stack with ReLU between hidden layers. Parameters live in
// the store under "<prefix>.fc<k>.{w,b}" and "<prefix>.out.{w,b}".
class Mlp {
public:
    Mlp() = default;
    Mlp(std::string prefix, MlpConfig cfg);

    void init(ParameterStore& store, const RngStream& base) const;
    Value forward(Ctx& ctx, Value input) const; // [m, in] -> [m, out]

    const MlpConfig& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    std::string prefix_;
    MlpConfig cfg_;
};

struct AttentionConfig {
    enum class Kind { kUniform, kDotProduct, kMultiHead };
    Kind kind = Kind::kMultiHead;
    int heads = 4;
    int model_dim = 128;
};

// Set self-attention. kUniform maps every element to the set mean (no
// parameters); the dot-product kinds use learned Q/K/V projections, scaled
// softmax scores per head, and an output projection.
class SelfAttention {
public:
    SelfAttention() = default;
    SelfAttention(std::string prefix, AttentionConfig cfg);

    void init(ParameterStore& store, const RngStream& base) const;
    Value forward(Ctx& ctx, Value reps) const; // [n, d] -> [n, d]

    const AttentionConfig& config() const { return cfg_; }

private:
    std::string prefix_;
    AttentionConfig cfg_;
};

// Cross-attention from target inputs to context representations. Keys and
// queries are raw inputs passed through one shared embedding MLP into model
// space; values are already model-dim representations. The attended result
// is projected to out_dim.
class CrossAttention {
public:
    CrossAttention() = default;
    CrossAttention(std::string prefix, AttentionConfig cfg, int input_dim, int out_dim);

    void init(ParameterStore& store, const RngStream& base) const;
    // keys_x [n, d_in], values [n, model_dim], queries_x [m, d_in] -> [m, out_dim]
    Value forward(Ctx& ctx, Value keys_x, Value values, Value queries_x) const;

    const AttentionConfig& config() const { return cfg_; }

private:
    std::string prefix_;
    AttentionConfig cfg_;
    int input_dim_ = 0;
    int out_dim_ = 0;
};

// Xavier-uniform tensor, drawn from a substream keyed by the parameter name
// so initialization is independent of registration order.
Tensor xavier_init(std::size_t fan_in, std::size_t fan_out, std::size_t rows,
                   std::size_t cols, const RngStream& base, const std::string& name);

std::uint64_t fnv1a64(const std::string& s);

} // namespace lanp
