#pragma once
#include <cstdint>
#include <map>
#include <string>

#include "lanp/errors.hpp"
#include "lanp/rng.hpp"
#include "lanp/tensor.hpp"

namespace lanp {

// Named parameter tensors with deterministic (name-sorted) iteration order.
class ParameterStore {
public:
    using Map = std::map<std::string, Tensor>;

    Tensor& add(const std::string& name, Tensor init) {
        auto [it, inserted] = params_.emplace(name, std::move(init));
        if (!inserted) throw KeyError("ParameterStore: duplicate parameter '" + name + "'");
        return it->second;
    }

    bool has(const std::string& name) const { return params_.count(name) != 0; }

    Tensor& at(const std::string& name) {
        auto it = params_.find(name);
        if (it == params_.end()) throw KeyError("ParameterStore: unknown parameter '" + name + "'");
        return it->second;
    }
    const Tensor& at(const std::string& name) const {
        auto it = params_.find(name);
        if (it == params_.end()) throw KeyError("ParameterStore: unknown parameter '" + name + "'");
        return it->second;
    }

    std::size_t size() const { return params_.size(); }
    std::size_t coordinate_count() const {
        std::size_t n = 0;
        for (const auto& [k, t] : params_) n += t.numel();
        return n;
    }

    Map::const_iterator begin() const { return params_.begin(); }
    Map::const_iterator end() const { return params_.end(); }
    Map::iterator begin() { return params_.begin(); }
    Map::iterator end() { return params_.end(); }

    bool bitwise_equal(const ParameterStore& o) const {
        if (params_.size() != o.params_.size()) return false;
        auto a = params_.begin();
        auto b = o.params_.begin();
        for (; a != params_.end(); ++a, ++b) {
            if (a->first != b->first || !a->second.bitwise_equal(b->second)) return false;
        }
        return true;
    }

    bool all_finite() const {
        for (const auto& [k, t] : params_)
            if (!t.all_finite()) return false;
        return true;
    }

private:
    Map params_;
};

using GradMap = std::map<std::string, Tensor>;

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// First/second moment accumulators plus the step counter t.
class AdamState {
public:
    AdamState() = default;
    explicit AdamState(AdamConfig cfg) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    std::int64_t step_count() const { return t_; }

    friend void adam_step(ParameterStore& params, const GradMap& grads, AdamState& state);

private:
    AdamConfig cfg_;
    std::map<std::string, Tensor> m_, v_;
    std::int64_t t_ = 0;
};

// Standard Adam update with bias correction; grads must be keyed identically
// to params (missing key -> KeyError). Gradients are of the minimized loss.
void adam_step(ParameterStore& params, const GradMap& grads, AdamState& state);

} // namespace lanp
