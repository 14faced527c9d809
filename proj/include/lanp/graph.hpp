#pragma once
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "lanp/param_store.hpp"
#include "lanp/tensor.hpp"

namespace lanp {

class Graph;

// Lightweight handle to one node of a Graph.
struct Value {
    Graph* g = nullptr;
    int id = -1;

    bool valid() const { return g != nullptr && id >= 0; }
    const Tensor& val() const;
    std::size_t rows() const { return val().rows(); }
    std::size_t cols() const { return val().cols(); }
    double scalar() const;
};

// Reverse-mode tape over rank<=2 tensors. Nodes are created eagerly (the
// forward value is computed at build time) in topological order, so
// backward() is a single reverse sweep. Parameter leaves reference the
// tensors owned by a ParameterStore instead of copying them.
class Graph {
public:
    enum class Op : std::uint8_t {
        kLeaf,
        kAdd,        // a + b; b may be 1xN (row broadcast) or 1x1 (scalar)
        kSub,        // a - b; same broadcast rules
        kMul,        // a ∘ b; same broadcast rules
        kDiv,        // a / b; same broadcast rules
        kNeg,
        kScale,      // c0 * a
        kShift,      // a + c0
        kMatMul,     // [m,k] x [k,n]
        kAffine,     // x·w + bias row
        kAffineRelu, // relu(x·w + bias row), fused
        kTranspose,
        kRelu,
        kSoftplus,   // log(1 + exp(x)), overflow-safe
        kExp,
        kLog,
        kSquare,
        kSqrt,
        kSumAll,     // -> 1x1
        kColSum,     // [m,n] -> 1xn
        kRepeatRows, // [1,n] -> [i0,n]
        kRowSoftmax, // stable softmax along each row
        kConcatCols,
        kSliceCols,  // columns [i0, i1)
        kEntropy,    // 1xN probabilities -> 1x1, 0·log0 := 0
    };

    Value leaf(Tensor v, bool requires_grad = false);
    Value constant(Tensor v) { return leaf(std::move(v), false); }
    Value constant(double v) { return leaf(Tensor::scalar(v), false); }

    // Leaf bound to a named parameter; one node per name per graph.
    Value param(const ParameterStore& store, const std::string& name);

    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value div(Value a, Value b);
    Value neg(Value a);
    Value scale(Value a, double c);
    Value shift(Value a, double c);
    Value matmul(Value a, Value b);
    Value affine(Value x, Value w, Value bias);
    Value affine_relu(Value x, Value w, Value bias);
    Value transpose(Value a);
    Value relu(Value a);
    Value softplus(Value a);
    Value exp(Value a);
    Value log(Value a);
    Value square(Value a);
    Value sqrt(Value a);
    Value sum_all(Value a);
    Value col_sum(Value a);
    Value col_mean(Value a);
    Value repeat_rows(Value a, std::size_t m);
    Value row_softmax(Value a);
    Value concat_cols(const std::vector<Value>& parts);
    Value slice_cols(Value a, std::size_t begin, std::size_t end);
    Value entropy(Value p);

    const Tensor& value(int id) const;
    const Tensor& grad(Value v) const;
    bool has_grad(Value v) const;

    // Seeds d(loss)/d(loss)=1 and sweeps the tape in reverse. loss must be
    // a finite scalar; NumericError otherwise.
    void backward(Value loss);

    // Visit accumulated gradients of all named parameter leaves.
    void for_each_param_grad(
        const std::function<void(const std::string&, const Tensor&)>& fn) const;

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        Op op = Op::kLeaf;
        int a = -1, b = -1;
        std::vector<int> extra; // concat inputs beyond the first two
        Tensor value;
        const Tensor* ext = nullptr; // parameter leaves alias the store
        Tensor grad;
        bool requires_grad = false;
        bool grad_live = false;
        std::size_t i0 = 0, i1 = 0;
        double c0 = 0.0;
    };

    const Tensor& node_value(const Node& n) const { return n.ext ? *n.ext : n.value; }
    Tensor& ensure_grad(int id);
    Value push(Node n);
    Value binary(Op op, Value a, Value b);
    void backprop_node(int id);

    // deque keeps element references stable across pushes; Value::val()
    // hands out tensor references that must outlive later node creation
    std::deque<Node> nodes_;
    std::map<std::string, int> param_nodes_;
};

// ---- distribution primitives (graph-level, differentiable) ----

// sum_i [ -0.5 log(2π) - log σ_i - (y_i - μ_i)^2 / (2 σ_i^2) ]
Value gaussian_log_pdf(Value y, Value mu, Value sigma);

// KL( N(μq, diag σq²) ‖ N(μp, diag σp²) ), summed over dimensions
Value kl_diag_gaussians(Value mu_q, Value sigma_q, Value mu_p, Value sigma_p);

// μ + σ ∘ noise, gradients flow to μ and σ
Value reparam_sample(Value mu, Value sigma, Value noise);

// ---- eager wrappers on plain tensors (spec ops for non-graph callers) ----

struct LatentGaussian {
    Tensor mean;
    Tensor std;
};

double gaussian_log_pdf(const Tensor& y, const Tensor& mu, const Tensor& sigma);
double kl_diag_gaussians(const LatentGaussian& q, const LatentGaussian& p);
double categorical_entropy(const std::vector<double>& p);
Tensor reparam_sample(const LatentGaussian& g, const Tensor& noise);

} // namespace lanp
