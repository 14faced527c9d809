#include "lanp/grad_check.hpp"

#include <cmath>

#include "lanp/rng.hpp"

namespace lanp {

GradCheckReport grad_check(const std::function<Value(Graph&)>& build,
                           ParameterStore& params, const GradCheckOptions& opts) {
    Graph g;
    Value loss = build(g);
    if (loss.val().numel() != 1) throw ShapeError("grad_check: build must return a scalar");
    if (!std::isfinite(loss.scalar())) throw NumericError("grad_check: non-finite loss");
    g.backward(loss);

    GradMap analytic;
    double grad_inf_norm = 0.0;
    g.for_each_param_grad([&](const std::string& name, const Tensor& grad) {
        for (std::size_t i = 0; i < grad.numel(); ++i)
            grad_inf_norm = std::max(grad_inf_norm, std::abs(grad[i]));
        analytic.emplace(name, grad);
    });

    struct Coord {
        std::string name;
        std::size_t index;
    };
    std::vector<Coord> coords;
    for (const auto& [name, grad] : analytic)
        for (std::size_t i = 0; i < grad.numel(); ++i) coords.push_back({name, i});

    if (coords.size() > opts.max_coords) {
        RngStream rng(opts.seed, 0x67c0de);
        auto keep = rng.sample_without_replacement(coords.size(), opts.max_coords);
        std::vector<Coord> sub;
        sub.reserve(keep.size());
        for (std::size_t k : keep) sub.push_back(coords[k]);
        coords = std::move(sub);
    }

    auto eval = [&]() {
        Graph fg;
        return build(fg).scalar();
    };

    const double eps_scale = 1e-8 + 1e-3 * grad_inf_norm;
    GradCheckReport report;
    report.coords_checked = coords.size();
    for (const Coord& c : coords) {
        Tensor& t = params.at(c.name);
        const double orig = t[c.index];
        t[c.index] = orig + opts.h;
        const double fp = eval();
        t[c.index] = orig - opts.h;
        const double fm = eval();
        t[c.index] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericError("grad_check: non-finite loss under perturbation");
        const double fd = (fp - fm) / (2.0 * opts.h);
        const double ad = analytic.at(c.name)[c.index];
        const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), eps_scale});
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_param = c.name;
            report.worst_index = c.index;
        }
    }
    return report;
}

} // namespace lanp
