#pragma once
#include <functional>
#include <string>

#include "lanp/graph.hpp"
#include "lanp/param_store.hpp"

namespace lanp {

struct GradCheckOptions {
    double h = 1e-5;              // central-difference step
    std::size_t max_coords = 200; // subsample cap; all coords if fewer
    std::uint64_t seed = 7;       // coordinate subsampling seed
};

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t coords_checked = 0;
};

// Compares reverse-mode gradients of a scalar-valued build function against
// central finite differences, coordinate by coordinate (random subsample of
// at least max_coords when the store is larger). The build function must be
// deterministic: any noise it consumes has to be frozen by the caller.
//
// Relative error uses denominator max(|g_ad|, |g_fd|, eps_scale) with
// eps_scale = 1e-8 + 1e-3 * max|g_ad|: coordinates whose true gradient sits
// orders of magnitude below the gradient's infinity norm are beyond what
// central differences can resolve, so they are measured against the overall
// gradient scale instead (the usual rtol + atol convention).
GradCheckReport grad_check(const std::function<Value(Graph&)>& build,
                           ParameterStore& params,
                           const GradCheckOptions& opts = {});

} // namespace lanp
