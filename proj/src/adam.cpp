#include <cmath>

#include "lanp/param_store.hpp"

namespace lanp {

void adam_step(ParameterStore& params, const GradMap& grads, AdamState& state) {
    for (auto& [name, p] : params) {
        auto git = grads.find(name);
        if (git == grads.end())
            throw KeyError("adam_step: missing gradient for parameter '" + name + "'");
        if (git->second.numel() != p.numel())
            throw ShapeError("adam_step: gradient shape mismatch for '" + name + "'");
        if (!git->second.all_finite())
            throw NumericError("adam_step: non-finite gradient for '" + name + "'");
    }
    const AdamConfig& cfg = state.cfg_;
    state.t_ += 1;
    const double t = (double)state.t_;
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    for (auto& [name, p] : params) {
        const Tensor& g = grads.at(name);
        auto mit = state.m_.find(name);
        if (mit == state.m_.end()) {
            mit = state.m_.emplace(name, Tensor::zeros(p.rows(), p.cols())).first;
            state.v_.emplace(name, Tensor::zeros(p.rows(), p.cols()));
        }
        Tensor& m = mit->second;
        Tensor& v = state.v_.at(name);
        for (std::size_t i = 0; i < p.numel(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

} // namespace lanp
