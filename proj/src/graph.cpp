#include "lanp/graph.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace lanp {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

CMap emap(const Tensor& t) { return CMap(t.data(), (Eigen::Index)t.rows(), (Eigen::Index)t.cols()); }
MMap emap(Tensor& t) { return MMap(t.data(), (Eigen::Index)t.rows(), (Eigen::Index)t.cols()); }

inline double sigmoid(double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double softplus_stable(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// broadcast class of b against a: 0 = same shape, 1 = row vector, 2 = scalar
int broadcast_kind(const Tensor& a, const Tensor& b) {
    if (b.rows() == 1 && b.cols() == 1 && !(a.rows() == 1 && a.cols() == 1)) return 2;
    if (a.same_shape(b)) return 0;
    if (b.rows() == 1 && b.cols() == a.cols()) return 1;
    throw ShapeError("Graph: incompatible shapes for elementwise op");
}

} // namespace

const Tensor& Value::val() const { return g->value(id); }

double Value::scalar() const {
    const Tensor& t = val();
    if (t.numel() != 1) throw ShapeError("Value::scalar: tensor is not 1x1");
    return t[0];
}

Value Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return Value{this, (int)nodes_.size() - 1};
}

const Tensor& Graph::value(int id) const { return node_value(nodes_[id]); }

Tensor& Graph::ensure_grad(int id) {
    Node& n = nodes_[id];
    if (!n.grad_live) {
        const Tensor& v = node_value(n);
        n.grad = Tensor::zeros(v.rows(), v.cols());
        n.grad_live = true;
    }
    return n.grad;
}

const Tensor& Graph::grad(Value v) const {
    const Node& n = nodes_[v.id];
    if (!n.grad_live) throw KeyError("Graph: no gradient accumulated for node");
    return n.grad;
}

bool Graph::has_grad(Value v) const { return nodes_[v.id].grad_live; }

Value Graph::leaf(Tensor v, bool requires_grad) {
    Node n;
    n.op = Op::kLeaf;
    n.value = std::move(v);
    n.requires_grad = requires_grad;
    return push(n);
}

Value Graph::param(const ParameterStore& store, const std::string& name) {
    auto it = param_nodes_.find(name);
    if (it != param_nodes_.end()) return Value{this, it->second};
    Node n;
    n.op = Op::kLeaf;
    n.ext = &store.at(name);
    n.requires_grad = true;
    Value v = push(n);
    param_nodes_.emplace(name, v.id);
    return v;
}

Value Graph::binary(Op op, Value a, Value b) {
    const Tensor& ta = value(a.id);
    const Tensor& tb = value(b.id);
    int bk = broadcast_kind(ta, tb);
    Node n;
    n.op = op;
    n.a = a.id;
    n.b = b.id;
    n.i0 = (std::size_t)bk;
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    const double* pa = ta.data();
    const double* pb = tb.data();
    double* po = n.value.data();
    std::size_t rows = ta.rows(), cols = ta.cols(), total = rows * cols;
    auto apply = [&](auto f) {
        if (bk == 0) {
            for (std::size_t i = 0; i < total; ++i) po[i] = f(pa[i], pb[i]);
        } else if (bk == 1) {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c)
                    po[r * cols + c] = f(pa[r * cols + c], pb[c]);
        } else {
            double s = pb[0];
            for (std::size_t i = 0; i < total; ++i) po[i] = f(pa[i], s);
        }
    };
    switch (op) {
        case Op::kAdd: apply([](double x, double y) { return x + y; }); break;
        case Op::kSub: apply([](double x, double y) { return x - y; }); break;
        case Op::kMul: apply([](double x, double y) { return x * y; }); break;
        case Op::kDiv: apply([](double x, double y) { return x / y; }); break;
        default: throw DomainError("Graph::binary: not a binary op");
    }
    return push(std::move(n));
}

Value Graph::add(Value a, Value b) { return binary(Op::kAdd, a, b); }
Value Graph::sub(Value a, Value b) { return binary(Op::kSub, a, b); }
Value Graph::mul(Value a, Value b) { return binary(Op::kMul, a, b); }
Value Graph::div(Value a, Value b) { return binary(Op::kDiv, a, b); }

Value Graph::neg(Value a) { return scale(a, -1.0); }

Value Graph::scale(Value a, double c) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kScale;
    n.a = a.id;
    n.c0 = c;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = c * ta[i];
    return push(std::move(n));
}

Value Graph::shift(Value a, double c) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kShift;
    n.a = a.id;
    n.c0 = c;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = ta[i] + c;
    return push(std::move(n));
}

Value Graph::matmul(Value a, Value b) {
    const Tensor& ta = value(a.id);
    const Tensor& tb = value(b.id);
    if (ta.cols() != tb.rows()) throw ShapeError("matmul: inner dimensions differ");
    Node n;
    n.op = Op::kMatMul;
    n.a = a.id;
    n.b = b.id;
    n.requires_grad = nodes_[a.id].requires_grad || nodes_[b.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), tb.cols());
    emap(n.value).noalias() = emap(ta) * emap(tb);
    return push(std::move(n));
}

Value Graph::affine(Value x, Value w, Value bias) {
    const Tensor& tx = value(x.id);
    const Tensor& tw = value(w.id);
    const Tensor& tb = value(bias.id);
    if (tx.cols() != tw.rows()) throw ShapeError("affine: inner dimensions differ");
    if (tb.rows() != 1 || tb.cols() != tw.cols()) throw ShapeError("affine: bad bias shape");
    Node n;
    n.op = Op::kAffine;
    n.a = x.id;
    n.b = w.id;
    n.extra.push_back(bias.id);
    n.requires_grad = nodes_[x.id].requires_grad || nodes_[w.id].requires_grad ||
                      nodes_[bias.id].requires_grad;
    n.value = Tensor::uninit(tx.rows(), tw.cols());
    emap(n.value).noalias() = emap(tx) * emap(tw);
    emap(n.value).rowwise() += Eigen::Map<const Eigen::RowVectorXd>(tb.data(), (Eigen::Index)tb.cols());
    return push(std::move(n));
}

Value Graph::affine_relu(Value x, Value w, Value bias) {
    Value v = affine(x, w, bias);
    Node& n = nodes_[v.id];
    n.op = Op::kAffineRelu;
    double* p = n.value.data();
    for (std::size_t i = 0; i < n.value.numel(); ++i)
        if (p[i] < 0.0) p[i] = 0.0;
    return v;
}

Value Graph::transpose(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kTranspose;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.cols(), ta.rows());
    emap(n.value) = emap(ta).transpose();
    return push(std::move(n));
}

Value Graph::relu(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kRelu;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = ta[i] > 0.0 ? ta[i] : 0.0;
    return push(std::move(n));
}

Value Graph::softplus(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kSoftplus;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = softplus_stable(ta[i]);
    return push(std::move(n));
}

Value Graph::exp(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kExp;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = std::exp(ta[i]);
    return push(std::move(n));
}

Value Graph::log(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kLog;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = std::log(ta[i]);
    return push(std::move(n));
}

Value Graph::square(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kSquare;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = ta[i] * ta[i];
    return push(std::move(n));
}

Value Graph::sqrt(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kSqrt;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    for (std::size_t i = 0; i < ta.numel(); ++i) n.value[i] = std::sqrt(ta[i]);
    return push(std::move(n));
}

Value Graph::sum_all(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kSumAll;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    double s = 0.0;
    for (std::size_t i = 0; i < ta.numel(); ++i) s += ta[i];
    n.value = Tensor::scalar(s);
    return push(std::move(n));
}

Value Graph::col_sum(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kColSum;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::zeros(1, ta.cols());
    for (std::size_t r = 0; r < ta.rows(); ++r)
        for (std::size_t c = 0; c < ta.cols(); ++c) n.value[c] += ta.at(r, c);
    return push(std::move(n));
}

Value Graph::col_mean(Value a) {
    std::size_t m = value(a.id).rows();
    if (m == 0) throw ShapeError("col_mean: empty input");
    return scale(col_sum(a), 1.0 / (double)m);
}

Value Graph::repeat_rows(Value a, std::size_t m) {
    const Tensor& ta = value(a.id);
    if (ta.rows() != 1) throw ShapeError("repeat_rows: input must be a row vector");
    Node n;
    n.op = Op::kRepeatRows;
    n.a = a.id;
    n.i0 = m;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(m, ta.cols());
    for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < ta.cols(); ++c) n.value.at(r, c) = ta[c];
    return push(std::move(n));
}

Value Graph::row_softmax(Value a) {
    const Tensor& ta = value(a.id);
    Node n;
    n.op = Op::kRowSoftmax;
    n.a = a.id;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), ta.cols());
    std::size_t cols = ta.cols();
    for (std::size_t r = 0; r < ta.rows(); ++r) {
        const double* in = ta.data() + r * cols;
        double* out = n.value.data() + r * cols;
        double mx = in[0];
        for (std::size_t c = 1; c < cols; ++c) mx = std::max(mx, in[c]);
        double denom = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
            out[c] = std::exp(in[c] - mx);
            denom += out[c];
        }
        for (std::size_t c = 0; c < cols; ++c) out[c] /= denom;
    }
    return push(std::move(n));
}

Value Graph::concat_cols(const std::vector<Value>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: no inputs");
    std::size_t rows = value(parts[0].id).rows();
    std::size_t cols = 0;
    bool rg = false;
    for (const Value& p : parts) {
        const Tensor& t = value(p.id);
        if (t.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
        cols += t.cols();
        rg = rg || nodes_[p.id].requires_grad;
    }
    Node n;
    n.op = Op::kConcatCols;
    n.a = parts[0].id;
    if (parts.size() > 1) n.b = parts[1].id;
    for (std::size_t i = 2; i < parts.size(); ++i) n.extra.push_back(parts[i].id);
    n.requires_grad = rg;
    n.value = Tensor::uninit(rows, cols);
    std::size_t off = 0;
    for (const Value& p : parts) {
        const Tensor& t = value(p.id);
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < t.cols(); ++c) n.value.at(r, off + c) = t.at(r, c);
        off += t.cols();
    }
    return push(std::move(n));
}

Value Graph::slice_cols(Value a, std::size_t begin, std::size_t end) {
    const Tensor& ta = value(a.id);
    if (begin >= end || end > ta.cols()) throw ShapeError("slice_cols: bad column range");
    Node n;
    n.op = Op::kSliceCols;
    n.a = a.id;
    n.i0 = begin;
    n.i1 = end;
    n.requires_grad = nodes_[a.id].requires_grad;
    n.value = Tensor::uninit(ta.rows(), end - begin);
    for (std::size_t r = 0; r < ta.rows(); ++r)
        for (std::size_t c = begin; c < end; ++c) n.value.at(r, c - begin) = ta.at(r, c);
    return push(std::move(n));
}

Value Graph::entropy(Value p) {
    const Tensor& tp = value(p.id);
    if (tp.rows() != 1) throw ShapeError("entropy: expects a 1xN probability row");
    double sum = 0.0, h = 0.0;
    for (std::size_t i = 0; i < tp.numel(); ++i) {
        double v = tp[i];
        if (v < 0.0) throw DomainError("entropy: negative probability");
        sum += v;
        if (v > 0.0) h -= v * std::log(v);
    }
    if (std::abs(sum - 1.0) > 1e-9) throw DomainError("entropy: probabilities must sum to 1");
    Node n;
    n.op = Op::kEntropy;
    n.a = p.id;
    n.requires_grad = nodes_[p.id].requires_grad;
    n.value = Tensor::scalar(h);
    return push(std::move(n));
}

void Graph::backward(Value loss) {
    const Tensor& lv = value(loss.id);
    if (lv.numel() != 1) throw ShapeError("backward: loss must be scalar");
    if (!std::isfinite(lv[0])) throw NumericError("backward: non-finite loss value");
    ensure_grad(loss.id)[0] = 1.0;
    for (int id = loss.id; id >= 0; --id) {
        Node& n = nodes_[id];
        if (!n.grad_live || !n.requires_grad || n.op == Op::kLeaf) continue;
        backprop_node(id);
    }
}

void Graph::backprop_node(int id) {
    Node& n = nodes_[id];
    const Tensor& g = n.grad;
    auto needs = [&](int in) { return in >= 0 && nodes_[in].requires_grad; };

    // accumulate g (broadcast-reduced) into input `in` for binary ops
    auto reduce_into = [&](int in, auto weight) {
        Tensor& gi = ensure_grad(in);
        const Tensor& gshape = gi;
        std::size_t rows = g.rows(), cols = g.cols();
        if (gshape.rows() == rows && gshape.cols() == cols) {
            for (std::size_t i = 0; i < g.numel(); ++i) gi[i] += weight(i) * g[i];
        } else if (gshape.rows() == 1 && gshape.cols() == cols) {
            for (std::size_t r = 0; r < rows; ++r)
                for (std::size_t c = 0; c < cols; ++c) gi[c] += weight(r * cols + c) * g[r * cols + c];
        } else { // scalar
            double s = 0.0;
            for (std::size_t i = 0; i < g.numel(); ++i) s += weight(i) * g[i];
            gi[0] += s;
        }
    };

    switch (n.op) {
        case Op::kAdd: {
            if (needs(n.a)) reduce_into(n.a, [](std::size_t) { return 1.0; });
            if (needs(n.b)) {
                // swap of perspective: gradient w.r.t. b reduces over broadcast
                Tensor& gb = ensure_grad(n.b);
                const std::size_t cols = g.cols();
                if (gb.same_shape(g)) {
                    for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += g[i];
                } else if (gb.numel() == 1) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) s += g[i];
                    gb[0] += s;
                } else {
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cols; ++c) gb[c] += g.at(r, c);
                }
            }
            break;
        }
        case Op::kSub: {
            if (needs(n.a)) reduce_into(n.a, [](std::size_t) { return 1.0; });
            if (needs(n.b)) {
                Tensor& gb = ensure_grad(n.b);
                const std::size_t cols = g.cols();
                if (gb.same_shape(g)) {
                    for (std::size_t i = 0; i < g.numel(); ++i) gb[i] -= g[i];
                } else if (gb.numel() == 1) {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) s += g[i];
                    gb[0] -= s;
                } else {
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cols; ++c) gb[c] -= g.at(r, c);
                }
            }
            break;
        }
        case Op::kMul: {
            const Tensor& ta = value(n.a);
            const Tensor& tb = value(n.b);
            int bk = (int)n.i0;
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                std::size_t cols = g.cols();
                if (bk == 0) {
                    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += tb[i] * g[i];
                } else if (bk == 1) {
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += tb[c] * g.at(r, c);
                } else {
                    for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += tb[0] * g[i];
                }
            }
            if (needs(n.b)) {
                Tensor& gb = ensure_grad(n.b);
                std::size_t cols = g.cols();
                if (bk == 0) {
                    for (std::size_t i = 0; i < g.numel(); ++i) gb[i] += ta[i] * g[i];
                } else if (bk == 1) {
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cols; ++c) gb[c] += ta.at(r, c) * g.at(r, c);
                } else {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) s += ta[i] * g[i];
                    gb[0] += s;
                }
            }
            break;
        }
        case Op::kDiv: {
            const Tensor& ta = value(n.a);
            const Tensor& tb = value(n.b);
            int bk = (int)n.i0;
            std::size_t cols = g.cols();
            auto bval = [&](std::size_t i) {
                if (bk == 0) return tb[i];
                if (bk == 1) return tb[i % cols];
                return tb[0];
            };
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / bval(i);
            }
            if (needs(n.b)) {
                Tensor& gb = ensure_grad(n.b);
                if (bk == 0) {
                    for (std::size_t i = 0; i < g.numel(); ++i)
                        gb[i] -= g[i] * ta[i] / (tb[i] * tb[i]);
                } else if (bk == 1) {
                    for (std::size_t r = 0; r < g.rows(); ++r)
                        for (std::size_t c = 0; c < cols; ++c)
                            gb[c] -= g.at(r, c) * ta.at(r, c) / (tb[c] * tb[c]);
                } else {
                    double s = 0.0;
                    for (std::size_t i = 0; i < g.numel(); ++i) s += g[i] * ta[i];
                    gb[0] -= s / (tb[0] * tb[0]);
                }
            }
            break;
        }
        case Op::kScale: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += n.c0 * g[i];
            }
            break;
        }
        case Op::kShift: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i];
            }
            break;
        }
        case Op::kMatMul: {
            const Tensor& ta = value(n.a);
            const Tensor& tb = value(n.b);
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                emap(ga).noalias() += emap(g) * emap(tb).transpose();
            }
            if (needs(n.b)) {
                Tensor& gb = ensure_grad(n.b);
                emap(gb).noalias() += emap(ta).transpose() * emap(g);
            }
            break;
        }
        case Op::kAffine:
        case Op::kAffineRelu: {
            const Tensor& tx = value(n.a);
            const Tensor& tw = value(n.b);
            const int bias_id = n.extra[0];
            const Tensor* gy = &g;
            Tensor masked; // relu mask applied once, shared by all three inputs
            if (n.op == Op::kAffineRelu) {
                masked = Tensor::uninit(g.rows(), g.cols());
                const double* out = n.value.data();
                for (std::size_t i = 0; i < g.numel(); ++i)
                    masked[i] = out[i] > 0.0 ? g[i] : 0.0;
                gy = &masked;
            }
            if (needs(n.a)) {
                Tensor& gx = ensure_grad(n.a);
                emap(gx).noalias() += emap(*gy) * emap(tw).transpose();
            }
            if (needs(n.b)) {
                Tensor& gw = ensure_grad(n.b);
                emap(gw).noalias() += emap(tx).transpose() * emap(*gy);
            }
            if (needs(bias_id)) {
                Tensor& gb = ensure_grad(bias_id);
                for (std::size_t r = 0; r < gy->rows(); ++r)
                    for (std::size_t c = 0; c < gy->cols(); ++c) gb[c] += gy->at(r, c);
            }
            break;
        }
        case Op::kTranspose: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                emap(ga) += emap(g).transpose();
            }
            break;
        }
        case Op::kRelu: {
            if (needs(n.a)) {
                const Tensor& ta = value(n.a);
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i)
                    if (ta[i] > 0.0) ga[i] += g[i];
            }
            break;
        }
        case Op::kSoftplus: {
            if (needs(n.a)) {
                const Tensor& ta = value(n.a);
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += sigmoid(ta[i]) * g[i];
            }
            break;
        }
        case Op::kExp: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += n.value[i] * g[i];
            }
            break;
        }
        case Op::kLog: {
            if (needs(n.a)) {
                const Tensor& ta = value(n.a);
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += g[i] / ta[i];
            }
            break;
        }
        case Op::kSquare: {
            if (needs(n.a)) {
                const Tensor& ta = value(n.a);
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += 2.0 * ta[i] * g[i];
            }
            break;
        }
        case Op::kSqrt: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t i = 0; i < g.numel(); ++i) ga[i] += 0.5 / n.value[i] * g[i];
            }
            break;
        }
        case Op::kSumAll: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                double s = g[0];
                for (std::size_t i = 0; i < ga.numel(); ++i) ga[i] += s;
            }
            break;
        }
        case Op::kColSum: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                std::size_t cols = ga.cols();
                for (std::size_t r = 0; r < ga.rows(); ++r)
                    for (std::size_t c = 0; c < cols; ++c) ga.at(r, c) += g[c];
            }
            break;
        }
        case Op::kRepeatRows: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                std::size_t cols = ga.cols();
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < cols; ++c) ga[c] += g.at(r, c);
            }
            break;
        }
        case Op::kRowSoftmax: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                const Tensor& y = n.value;
                std::size_t cols = y.cols();
                for (std::size_t r = 0; r < y.rows(); ++r) {
                    double dot = 0.0;
                    for (std::size_t c = 0; c < cols; ++c) dot += g.at(r, c) * y.at(r, c);
                    for (std::size_t c = 0; c < cols; ++c)
                        ga.at(r, c) += (g.at(r, c) - dot) * y.at(r, c);
                }
            }
            break;
        }
        case Op::kConcatCols: {
            std::vector<int> inputs;
            inputs.push_back(n.a);
            if (n.b >= 0) inputs.push_back(n.b);
            for (int e : n.extra) inputs.push_back(e);
            std::size_t off = 0;
            for (int in : inputs) {
                const Tensor& tin = value(in);
                if (needs(in)) {
                    Tensor& gi = ensure_grad(in);
                    for (std::size_t r = 0; r < tin.rows(); ++r)
                        for (std::size_t c = 0; c < tin.cols(); ++c)
                            gi.at(r, c) += g.at(r, off + c);
                }
                off += tin.cols();
            }
            break;
        }
        case Op::kSliceCols: {
            if (needs(n.a)) {
                Tensor& ga = ensure_grad(n.a);
                for (std::size_t r = 0; r < g.rows(); ++r)
                    for (std::size_t c = 0; c < g.cols(); ++c)
                        ga.at(r, n.i0 + c) += g.at(r, c);
            }
            break;
        }
        case Op::kEntropy: {
            if (needs(n.a)) {
                const Tensor& p = value(n.a);
                Tensor& ga = ensure_grad(n.a);
                double s = g[0];
                for (std::size_t i = 0; i < p.numel(); ++i)
                    if (p[i] > 0.0) ga[i] += s * (-std::log(p[i]) - 1.0);
            }
            break;
        }
        case Op::kLeaf:
            break;
    }
}

void Graph::for_each_param_grad(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
    for (const auto& [name, id] : param_nodes_) {
        const Node& n = nodes_[id];
        if (n.grad_live) fn(name, n.grad);
    }
}

// ---- distribution primitives ----

Value gaussian_log_pdf(Value y, Value mu, Value sigma) {
    Graph& g = *y.g;
    const Tensor& ts = sigma.val();
    if (!y.val().same_shape(mu.val()) || !y.val().same_shape(ts))
        throw ShapeError("gaussian_log_pdf: shapes differ");
    for (std::size_t i = 0; i < ts.numel(); ++i)
        if (!(ts[i] > 0.0)) throw DomainError("gaussian_log_pdf: sigma must be positive");
    constexpr double kHalfLog2Pi = 0.91893853320467274178;
    Value resid = g.sub(y, mu);
    Value z2 = g.div(g.square(resid), g.scale(g.square(sigma), 2.0));
    Value terms = g.add(g.log(sigma), z2);
    return g.sub(g.constant(-kHalfLog2Pi * (double)ts.numel()), g.sum_all(terms));
}

Value kl_diag_gaussians(Value mu_q, Value sigma_q, Value mu_p, Value sigma_p) {
    Graph& g = *mu_q.g;
    if (mu_q.val().numel() != mu_p.val().numel() ||
        sigma_q.val().numel() != sigma_p.val().numel() ||
        mu_q.val().numel() != sigma_q.val().numel())
        throw ShapeError("kl_diag_gaussians: dimension mismatch");
    Value var_p2 = g.scale(g.square(sigma_p), 2.0);
    Value quad = g.div(g.add(g.square(sigma_q), g.square(g.sub(mu_q, mu_p))), var_p2);
    Value logs = g.sub(g.log(sigma_p), g.log(sigma_q));
    Value per_dim = g.shift(g.add(logs, quad), -0.5);
    return g.sum_all(per_dim);
}

Value reparam_sample(Value mu, Value sigma, Value noise) {
    Graph& g = *mu.g;
    if (mu.val().numel() != noise.val().numel() || sigma.val().numel() != mu.val().numel())
        throw ShapeError("reparam_sample: dimension mismatch");
    return g.add(mu, g.mul(sigma, noise));
}

// ---- eager wrappers ----

double gaussian_log_pdf(const Tensor& y, const Tensor& mu, const Tensor& sigma) {
    Graph g;
    return gaussian_log_pdf(g.constant(y), g.constant(mu), g.constant(sigma)).scalar();
}

double kl_diag_gaussians(const LatentGaussian& q, const LatentGaussian& p) {
    for (std::size_t i = 0; i < q.std.numel(); ++i)
        if (!(q.std[i] > 0.0)) throw DomainError("kl_diag_gaussians: sigma must be positive");
    for (std::size_t i = 0; i < p.std.numel(); ++i)
        if (!(p.std[i] > 0.0)) throw DomainError("kl_diag_gaussians: sigma must be positive");
    Graph g;
    return kl_diag_gaussians(g.constant(q.mean), g.constant(q.std), g.constant(p.mean),
                             g.constant(p.std))
        .scalar();
}

double categorical_entropy(const std::vector<double>& p) {
    Graph g;
    return g.entropy(g.constant(Tensor::row(p))).scalar();
}

Tensor reparam_sample(const LatentGaussian& gauss, const Tensor& noise) {
    Graph g;
    Value z = reparam_sample(g.constant(gauss.mean), g.constant(gauss.std), g.constant(noise));
    return z.val();
}

} // namespace lanp
