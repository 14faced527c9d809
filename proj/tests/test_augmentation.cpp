#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lanp/augmentation.hpp"
#include "lanp/datagen.hpp"

using namespace lanp;

namespace {

double grid_inner(const FunctionalBasis& b, const std::vector<double>& f,
                  const std::vector<double>& g) {
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * g[i];
    return acc * b.step();
}

Signal curve_signal(const std::string& id, const std::vector<double>& xs,
                    const std::function<double(double)>& f) {
    Signal s;
    s.unit_id = id;
    for (double x : xs) s.obs.push_back({x, f(x)});
    return s;
}

std::vector<double> unit_grid(int n, double lo = 0.0, double hi = 10.0) {
    std::vector<double> xs((std::size_t)n);
    for (int i = 0; i < n; ++i) xs[(std::size_t)i] = lo + (hi - lo) * i / (n - 1);
    return xs;
}

} // namespace

TEST_CASE("fit_fpca: rank-1 construction recovered exactly") {
    // signals = beta + xi * psi with one fixed unit-norm curve
    auto beta = [](double x) { return 0.5 * x + 1.0; };
    auto psi = [](double x) { return std::sin(0.3 * x); };
    // observations sit exactly on the fit grid so interpolation is exact
    std::vector<double> xs = unit_grid(100);
    std::vector<double> xis = {-2.0, -0.5, 0.3, 1.1, 2.4};
    std::vector<Signal> signals;
    for (std::size_t i = 0; i < xis.size(); ++i) {
        double xi = xis[i];
        signals.push_back(curve_signal("s" + std::to_string(i), xs,
                                       [&](double x) { return beta(x) + xi * psi(x); }));
    }
    FpcaResult res = fit_fpca(signals, 100, 0.999);
    REQUIRE(res.basis.components() == 1);

    // reconstruction reproduces each input curve on the grid
    for (std::size_t i = 0; i < signals.size(); ++i) {
        std::vector<double> rec = fpca_reconstruct(res.basis, res.scores[i]);
        for (std::size_t gi = 0; gi < res.basis.grid.size(); ++gi) {
            double want = beta(res.basis.grid[gi]) + xis[i] * psi(res.basis.grid[gi]);
            CHECK(rec[gi] == doctest::Approx(want).epsilon(1e-10));
        }
    }
}

TEST_CASE("fit_fpca: duplicated signal set gives the identical basis") {
    RngStream rng(5, 0);
    std::vector<Signal> signals;
    for (int i = 0; i < 6; ++i)
        signals.push_back(gen_sim2_signal(i % 2, rng, 40, true, true).signal);
    std::vector<Signal> doubled = signals;
    doubled.insert(doubled.end(), signals.begin(), signals.end());
    FpcaResult a = fit_fpca(signals, 80, 0.99);
    FpcaResult b = fit_fpca(doubled, 80, 0.99);
    REQUIRE(a.basis.components() == b.basis.components());
    for (std::size_t n = 0; n < a.basis.components(); ++n)
        for (std::size_t i = 0; i < a.basis.grid.size(); ++i)
            CHECK(a.basis.eigenfunctions[n][i] ==
                  doctest::Approx(b.basis.eigenfunctions[n][i]).epsilon(1e-8));
}

TEST_CASE("fit_fpca: orthonormality and eigenvalue ordering") {
    RngStream rng(7, 0);
    std::vector<Signal> signals;
    Sim2Options opts;
    opts.delta = 2.0;
    for (int i = 0; i < 50; ++i)
        signals.push_back(gen_sim2_signal(i % 2, rng, 45, false, false, opts).signal);
    FpcaResult res = fit_fpca(signals, 100, 0.999);
    const FunctionalBasis& b = res.basis;
    for (std::size_t a = 0; a < b.components(); ++a) {
        for (std::size_t c = 0; c < b.components(); ++c) {
            double want = a == c ? 1.0 : 0.0;
            CHECK(std::abs(grid_inner(b, b.eigenfunctions[a], b.eigenfunctions[c]) - want) <
                  1e-8);
        }
        if (a + 1 < b.components()) CHECK(b.eigenvalues[a] >= b.eigenvalues[a + 1]);
        CHECK(b.eigenvalues[a] > 0.0);
    }
}

TEST_CASE("fit_fpca: 50 sim2 signals reconstruct to below 2 percent relative RMSE") {
    RngStream rng(9, 0);
    std::vector<Signal> signals;
    Sim2Options opts;
    opts.delta = 2.0;
    for (int i = 0; i < 50; ++i)
        signals.push_back(gen_sim2_signal(i % 2, rng, 45, false, false, opts).signal);
    FpcaResult res = fit_fpca(signals, 100, 0.999);
    for (std::size_t j = 0; j < signals.size(); ++j) {
        std::vector<double> rec = fpca_reconstruct(res.basis, res.scores[j]);
        double err2 = 0.0, ref2 = 0.0;
        for (std::size_t i = 0; i < res.basis.grid.size(); ++i) {
            // compare against the grid interpolation the fit actually saw
            Signal s = signals[j];
            double y = [&] {
                const auto& obs = s.obs;
                double x = res.basis.grid[i];
                if (x <= obs.front().x) return obs.front().y;
                if (x >= obs.back().x) return obs.back().y;
                for (std::size_t k = 1; k < obs.size(); ++k)
                    if (obs[k].x >= x) {
                        double t = (x - obs[k - 1].x) / (obs[k].x - obs[k - 1].x);
                        return obs[k - 1].y + t * (obs[k].y - obs[k - 1].y);
                    }
                return obs.back().y;
            }();
            err2 += (rec[i] - y) * (rec[i] - y);
            ref2 += y * y;
        }
        CHECK(std::sqrt(err2 / ref2) < 0.02);
    }
}

TEST_CASE("fpca_project: trivial projections and round trip") {
    auto beta = [](double x) { return 0.1 * x * x; };
    auto psi1 = [](double x) { return std::cos(0.5 * x); };
    auto psi2 = [](double x) { return std::sin(1.1 * x); };
    std::vector<double> xs = unit_grid(150);
    RngStream rng(11, 0);
    std::vector<Signal> signals;
    for (int i = 0; i < 12; ++i) {
        double a = rng.normal(0, 2.0), b = rng.normal(0, 0.7);
        signals.push_back(curve_signal("s" + std::to_string(i), xs, [&](double x) {
            return beta(x) + a * psi1(x) + b * psi2(x);
        }));
    }
    FpcaResult res = fit_fpca(signals, 120, 0.9999);
    const FunctionalBasis& basis = res.basis;

    Signal mean_signal;
    for (std::size_t i = 0; i < basis.grid.size(); ++i)
        mean_signal.obs.push_back({basis.grid[i], basis.mean[i]});
    std::vector<double> zero = fpca_project(basis, mean_signal);
    for (double z : zero) CHECK(std::abs(z) < 1e-8);

    Signal shifted = mean_signal;
    for (std::size_t i = 0; i < shifted.obs.size(); ++i)
        shifted.obs[i].y += 2.0 * basis.eigenfunctions[0][i];
    std::vector<double> two = fpca_project(basis, shifted);
    CHECK(two[0] == doctest::Approx(2.0).epsilon(1e-8));
    for (std::size_t n = 1; n < two.size(); ++n) CHECK(std::abs(two[n]) < 1e-8);

    // project(reconstruct(xi)) = xi
    std::vector<double> xi(basis.components());
    for (std::size_t n = 0; n < xi.size(); ++n) xi[n] = rng.normal();
    std::vector<double> curve = fpca_reconstruct(basis, xi);
    Signal syn;
    for (std::size_t i = 0; i < basis.grid.size(); ++i) syn.obs.push_back({basis.grid[i], curve[i]});
    std::vector<double> back = fpca_project(basis, syn);
    for (std::size_t n = 0; n < xi.size(); ++n) CHECK(back[n] == doctest::Approx(xi[n]).epsilon(1e-8));
}

TEST_CASE("fit_fpca: preconditions") {
    std::vector<double> xs = unit_grid(30);
    std::vector<Signal> one = {curve_signal("a", xs, [](double x) { return x; })};
    CHECK_THROWS_AS(fit_fpca(one, 50, 0.99), DomainError);

    std::vector<Signal> identical = {curve_signal("a", xs, [](double x) { return x; }),
                                     curve_signal("b", xs, [](double x) { return x; })};
    CHECK_THROWS_AS(fit_fpca(identical, 50, 0.99), DataError);

    std::vector<Signal> disjoint = {curve_signal("a", unit_grid(10, 0.0, 1.0), [](double x) { return x; }),
                                    curve_signal("b", unit_grid(10, 5.0, 6.0), [](double x) { return x; })};
    CHECK_THROWS_AS(fit_fpca(disjoint, 50, 0.99), DataError);
}

TEST_CASE("fit_gmm: q=1 closed form in one M-step") {
    RngStream rng(13, 0);
    std::vector<std::vector<double>> scores;
    for (int i = 0; i < 40; ++i) scores.push_back({rng.normal(1.0, 2.0), rng.normal(-3.0, 0.5)});
    RngStream fit_rng(14, 0);
    GmmModel gmm = fit_gmm(scores, 1, fit_rng);
    REQUIRE(gmm.components.size() == 1);
    const GmmComponent& c = gmm.components[0];
    CHECK(c.weight == doctest::Approx(1.0));

    double m0 = 0.0, m1 = 0.0;
    for (const auto& s : scores) {
        m0 += s[0] / 40.0;
        m1 += s[1] / 40.0;
    }
    CHECK(c.mean[0] == doctest::Approx(m0).epsilon(1e-10));
    CHECK(c.mean[1] == doctest::Approx(m1).epsilon(1e-10));
    double v00 = 0.0, v01 = 0.0, v11 = 0.0;
    for (const auto& s : scores) {
        v00 += (s[0] - m0) * (s[0] - m0) / 40.0;
        v01 += (s[0] - m0) * (s[1] - m1) / 40.0;
        v11 += (s[1] - m1) * (s[1] - m1) / 40.0;
    }
    CHECK(c.covariance[0][0] == doctest::Approx(v00 + 1e-6).epsilon(1e-8));
    CHECK(c.covariance[0][1] == doctest::Approx(v01).epsilon(1e-6));
    CHECK(c.covariance[1][1] == doctest::Approx(v11 + 1e-6).epsilon(1e-8));
}

TEST_CASE("fit_gmm: recovers two well-separated clusters") {
    RngStream rng(15, 0);
    std::vector<std::vector<double>> scores;
    for (int i = 0; i < 200; ++i) scores.push_back({rng.normal(0.0, 1.0), rng.normal(0.0, 1.0)});
    for (int i = 0; i < 200; ++i) scores.push_back({rng.normal(20.0, 1.0), rng.normal(20.0, 1.0)});
    RngStream fit_rng(16, 0);
    GmmModel gmm = fit_gmm(scores, 2, fit_rng);
    REQUIRE(gmm.components.size() == 2);
    CHECK(std::abs(gmm.components[0].weight - 0.5) < 0.05);
    CHECK(std::abs(gmm.components[1].weight - 0.5) < 0.05);
    double lo = std::min(gmm.components[0].mean[0], gmm.components[1].mean[0]);
    double hi = std::max(gmm.components[0].mean[0], gmm.components[1].mean[0]);
    CHECK(lo == doctest::Approx(0.0).scale(1.0).epsilon(0.3));
    CHECK(hi == doctest::Approx(20.0).epsilon(0.02));
}

TEST_CASE("fit_gmm: EM log-likelihood is monotone non-decreasing") {
    RngStream rng(17, 0);
    std::vector<std::vector<double>> scores;
    for (int i = 0; i < 60; ++i)
        scores.push_back({rng.normal(i % 3 * 4.0, 1.0), rng.normal(0.0, 1.0)});
    RngStream fit_rng(18, 0);
    GmmModel gmm = fit_gmm(scores, 3, fit_rng);
    REQUIRE(gmm.log_likelihood_history.size() >= 2);
    for (std::size_t i = 1; i < gmm.log_likelihood_history.size(); ++i)
        CHECK(gmm.log_likelihood_history[i] >= gmm.log_likelihood_history[i - 1] - 1e-9);
}

TEST_CASE("fit_gmm: preconditions") {
    std::vector<std::vector<double>> two = {{1.0}, {2.0}};
    RngStream rng(19, 0);
    CHECK_THROWS_AS(fit_gmm(two, 3, rng), DomainError);
}

TEST_CASE("sample_synthetic: degenerate mixture reproduces the mean curve") {
    auto beta = [](double x) { return std::sin(x); };
    auto psi = [](double x) { return std::cos(0.7 * x); };
    std::vector<double> xs = unit_grid(80);
    std::vector<Signal> signals;
    for (double xi : {-1.0, 0.0, 2.0, 0.5})
        signals.push_back(curve_signal("s", xs, [&](double x) { return beta(x) + xi * psi(x); }));
    FpcaResult res = fit_fpca(signals, 80, 0.999);

    GmmModel gmm;
    GmmComponent comp;
    comp.weight = 1.0;
    comp.mean = {1.3};
    comp.covariance = {{0.0}};
    gmm.components.push_back(comp);

    RngStream rng(20, 0);
    std::vector<Signal> synth = sample_synthetic(res.basis, gmm, 3, rng);
    REQUIRE(synth.size() == 3);
    std::vector<double> want = fpca_reconstruct(res.basis, comp.mean);
    for (const Signal& s : synth) {
        CHECK_FALSE(s.label.has_value());
        REQUIRE(s.obs.size() == res.basis.grid.size());
        for (std::size_t i = 0; i < s.obs.size(); ++i)
            CHECK(s.obs[i].y == doctest::Approx(want[i]).epsilon(1e-12));
    }

    CHECK(sample_synthetic(res.basis, gmm, 0, rng).empty());
    CHECK_THROWS_AS(sample_synthetic(res.basis, gmm, -1, rng), DomainError);
}

TEST_CASE("sample_synthetic: projecting back is idempotent and statistically centered") {
    RngStream rng(21, 0);
    std::vector<Signal> signals;
    Sim2Options opts;
    opts.delta = 2.0;
    for (int i = 0; i < 30; ++i)
        signals.push_back(gen_sim2_signal(i % 2, rng, 45, false, false, opts).signal);
    FpcaResult res = fit_fpca(signals, 100, 0.99);
    RngStream gmm_rng(22, 0);
    GmmModel gmm = fit_gmm(res.scores, 2, gmm_rng);

    RngStream srng(23, 0);
    const int n = 400;
    std::vector<Signal> synth = sample_synthetic(res.basis, gmm, n, srng);
    std::vector<double> mean_score(res.basis.components(), 0.0);
    for (const Signal& s : synth) {
        std::vector<double> sc = fpca_project(res.basis, s);
        // span membership: project then reconstruct reproduces the curve
        std::vector<double> rec = fpca_reconstruct(res.basis, sc);
        for (std::size_t i = 0; i < s.obs.size(); ++i)
            CHECK(std::abs(rec[i] - s.obs[i].y) < 1e-8);
        for (std::size_t d = 0; d < sc.size(); ++d) mean_score[d] += sc[d] / n;
    }
    // sample mean of projected scores within 3 standard errors of the mixture mean
    for (std::size_t d = 0; d < mean_score.size(); ++d) {
        double mix_mean = 0.0, mix_e2 = 0.0;
        for (const GmmComponent& c : gmm.components) {
            mix_mean += c.weight * c.mean[d];
            mix_e2 += c.weight * (c.covariance[d][d] + c.mean[d] * c.mean[d]);
        }
        double sd = std::sqrt(std::max(1e-12, mix_e2 - mix_mean * mix_mean));
        CHECK(std::abs(mean_score[d] - mix_mean) < 3.0 * sd / std::sqrt((double)n));
    }
}

TEST_CASE("sample_synthetic: training-protocol x sampling stays in span") {
    RngStream rng(25, 0);
    std::vector<Signal> signals;
    for (int i = 0; i < 10; ++i)
        signals.push_back(gen_sim2_signal(i % 2, rng, 45, true, false).signal);
    FpcaResult res = fit_fpca(signals, 100, 0.99);
    RngStream gmm_rng(26, 0);
    GmmModel gmm = fit_gmm(res.scores, 2, gmm_rng);
    SynthesisOptions opts;
    opts.n_points = 45;
    RngStream srng(27, 0);
    std::vector<Signal> synth = sample_synthetic(res.basis, gmm, 4, srng, opts);
    for (const Signal& s : synth) {
        CHECK(s.obs.size() == 45);
        for (std::size_t i = 1; i < s.obs.size(); ++i) CHECK(s.obs[i].x >= s.obs[i - 1].x);
        CHECK(s.obs.front().x >= res.basis.grid.front());
        CHECK(s.obs.back().x <= res.basis.grid.back());
    }
}
