#include "lanp/augmentation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

namespace lanp {

namespace {

double interpolate(const Signal& s, double x) {
    const auto& obs = s.obs;
    if (x <= obs.front().x) return obs.front().y;
    if (x >= obs.back().x) return obs.back().y;
    auto it = std::lower_bound(obs.begin(), obs.end(), x,
                               [](const Observation& o, double v) { return o.x < v; });
    const Observation& hi = *it;
    const Observation& lo = *(it - 1);
    if (hi.x == lo.x) return lo.y;
    double t = (x - lo.x) / (hi.x - lo.x);
    return lo.y + t * (hi.y - lo.y);
}

} // namespace

FpcaResult fit_fpca(std::span<const Signal> signals, int grid_size, double rho) {
    if (signals.size() < 2) throw DomainError("fit_fpca: need at least 2 signals");
    if (grid_size < 2) throw DomainError("fit_fpca: grid_size must be >= 2");
    if (!(rho > 0.0 && rho <= 1.0)) throw DomainError("fit_fpca: rho must lie in (0,1]");
    for (const Signal& s : signals)
        if (s.obs.size() < 2)
            throw DataError("fit_fpca: signal '" + s.unit_id + "' has fewer than 2 points");

    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    for (const Signal& s : signals) {
        lo = std::max(lo, s.obs.front().x);
        hi = std::min(hi, s.obs.back().x);
    }
    if (!(lo < hi)) throw DataError("fit_fpca: signals have no overlapping domain");

    const std::size_t g = (std::size_t)grid_size;
    const std::size_t j = signals.size();
    FpcaResult result;
    result.basis.grid.resize(g);
    for (std::size_t i = 0; i < g; ++i)
        result.basis.grid[i] = lo + (hi - lo) * (double)i / (double)(g - 1);
    const double dx = result.basis.grid[1] - result.basis.grid[0];

    Eigen::MatrixXd data((Eigen::Index)j, (Eigen::Index)g);
    for (std::size_t r = 0; r < j; ++r)
        for (std::size_t c = 0; c < g; ++c)
            data((Eigen::Index)r, (Eigen::Index)c) = interpolate(signals[r], result.basis.grid[c]);

    Eigen::RowVectorXd mean = data.colwise().mean();
    result.basis.mean.assign(mean.data(), mean.data() + g);
    Eigen::MatrixXd centered = data.rowwise() - mean;
    Eigen::MatrixXd cov = centered.transpose() * centered / (double)(j - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw NumericError("fit_fpca: eigendecomposition failed");

    // ascending from Eigen; convert to descending operator eigenvalues
    std::vector<std::pair<double, Eigen::Index>> order;
    for (Eigen::Index i = 0; i < eig.eigenvalues().size(); ++i)
        order.push_back({eig.eigenvalues()[i] * dx, i});
    std::sort(order.begin(), order.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    double total = 0.0;
    for (const auto& [val, idx] : order) total += std::max(val, 0.0);
    if (total <= 0.0)
        throw DataError("fit_fpca: degenerate data (all signals identical), no components");

    double cum = 0.0;
    for (const auto& [val, idx] : order) {
        if (val <= 1e-12 * order.front().first) break;
        cum += val;
        Eigen::VectorXd v = eig.eigenvectors().col(idx) / std::sqrt(dx);
        // sign convention: largest-magnitude entry positive
        Eigen::Index arg = 0;
        v.cwiseAbs().maxCoeff(&arg);
        if (v[arg] < 0.0) v = -v;
        result.basis.eigenfunctions.emplace_back(v.data(), v.data() + g);
        result.basis.eigenvalues.push_back(val);
        if (cum / total >= rho) break;
    }
    if (result.basis.eigenfunctions.empty())
        throw DataError("fit_fpca: no usable components at the requested threshold");

    result.scores.resize(j);
    for (std::size_t r = 0; r < j; ++r) {
        std::vector<double>& sc = result.scores[r];
        sc.resize(result.basis.components());
        for (std::size_t n = 0; n < sc.size(); ++n) {
            double acc = 0.0;
            for (std::size_t c = 0; c < g; ++c)
                acc += centered((Eigen::Index)r, (Eigen::Index)c) *
                       result.basis.eigenfunctions[n][c];
            sc[n] = acc * dx;
        }
    }
    return result;
}

std::vector<double> fpca_project(const FunctionalBasis& basis, const Signal& signal) {
    if (signal.obs.empty()) throw DataError("fpca_project: empty signal");
    if (signal.obs.back().x < basis.grid.front() || signal.obs.front().x > basis.grid.back())
        throw DataError("fpca_project: signal domain disjoint from the basis grid");
    const std::size_t g = basis.grid.size();
    const double dx = basis.step();
    std::vector<double> centered(g);
    for (std::size_t i = 0; i < g; ++i)
        centered[i] = interpolate(signal, basis.grid[i]) - basis.mean[i];
    std::vector<double> scores(basis.components());
    for (std::size_t n = 0; n < scores.size(); ++n) {
        double acc = 0.0;
        for (std::size_t i = 0; i < g; ++i) acc += centered[i] * basis.eigenfunctions[n][i];
        scores[n] = acc * dx;
    }
    return scores;
}

std::vector<double> fpca_reconstruct(const FunctionalBasis& basis,
                                     std::span<const double> scores) {
    if (scores.size() != basis.components())
        throw ShapeError("fpca_reconstruct: score count does not match the basis");
    std::vector<double> out = basis.mean;
    for (std::size_t n = 0; n < scores.size(); ++n)
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += scores[n] * basis.eigenfunctions[n][i];
    return out;
}

namespace {

struct Mvn {
    Eigen::VectorXd mean;
    Eigen::LLT<Eigen::MatrixXd> chol;
    double log_norm = 0.0;

    void set(const Eigen::VectorXd& m, const Eigen::MatrixXd& cov) {
        mean = m;
        chol.compute(cov);
        if (chol.info() != Eigen::Success)
            throw NumericError("fit_gmm: covariance not positive-definite despite ridge");
        double log_det = 0.0;
        for (Eigen::Index i = 0; i < cov.rows(); ++i)
            log_det += 2.0 * std::log(chol.matrixL()(i, i));
        log_norm = -0.5 * ((double)cov.rows() * std::log(2.0 * M_PI) + log_det);
    }

    double logpdf(const Eigen::VectorXd& x) const {
        Eigen::VectorXd d = chol.matrixL().solve(x - mean);
        return log_norm - 0.5 * d.squaredNorm();
    }
};

double logsumexp(const std::vector<double>& v) {
    double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (double x : v) s += std::exp(x - mx);
    return mx + std::log(s);
}

} // namespace

GmmModel fit_gmm(std::span<const std::vector<double>> scores, int q, RngStream& rng,
                 int max_iterations, double tol) {
    const std::size_t n = scores.size();
    if (q < 1) throw DomainError("fit_gmm: q must be >= 1");
    if ((std::size_t)q > n) throw DomainError("fit_gmm: more components than score vectors");
    const std::size_t dim = scores[0].size();
    for (const auto& s : scores)
        if (s.size() != dim) throw ShapeError("fit_gmm: inconsistent score dimensions");

    Eigen::MatrixXd x((Eigen::Index)n, (Eigen::Index)dim);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d) x((Eigen::Index)i, (Eigen::Index)d) = scores[i][d];

    const double ridge = 1e-6;
    Eigen::RowVectorXd overall_mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - overall_mean;
    Eigen::MatrixXd overall_cov = centered.transpose() * centered / (double)n +
                                  ridge * Eigen::MatrixXd::Identity((Eigen::Index)dim,
                                                                    (Eigen::Index)dim);

    // kmeans++-style seeding of the component means
    std::vector<Eigen::VectorXd> centers;
    centers.push_back(x.row((Eigen::Index)rng.uniform_int(n)).transpose());
    while ((int)centers.size() < q) {
        std::vector<double> d2(n);
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers)
                best = std::min(best, (x.row((Eigen::Index)i).transpose() - c).squaredNorm());
            d2[i] = best;
            total += best;
        }
        double draw = rng.uniform01() * total;
        std::size_t pick = 0;
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            acc += d2[i];
            if (draw <= acc || i == n - 1) {
                pick = i;
                break;
            }
        }
        centers.push_back(x.row((Eigen::Index)pick).transpose());
    }

    std::vector<Mvn> comps((std::size_t)q);
    std::vector<double> weights((std::size_t)q, 1.0 / (double)q);
    for (int c = 0; c < q; ++c) comps[(std::size_t)c].set(centers[(std::size_t)c], overall_cov);

    GmmModel model;
    double prev_ll = -std::numeric_limits<double>::infinity();
    Eigen::MatrixXd resp((Eigen::Index)n, (Eigen::Index)q);
    for (int iter = 0; iter < max_iterations; ++iter) {
        // E-step
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> lp((std::size_t)q);
            for (int c = 0; c < q; ++c)
                lp[(std::size_t)c] = std::log(weights[(std::size_t)c]) +
                                     comps[(std::size_t)c].logpdf(x.row((Eigen::Index)i).transpose());
            double lse = logsumexp(lp);
            ll += lse;
            for (int c = 0; c < q; ++c)
                resp((Eigen::Index)i, (Eigen::Index)c) = std::exp(lp[(std::size_t)c] - lse);
        }
        model.log_likelihood_history.push_back(ll);
        // M-step
        for (int c = 0; c < q; ++c) {
            double nc = resp.col((Eigen::Index)c).sum();
            weights[(std::size_t)c] = nc / (double)n;
            Eigen::VectorXd m = (resp.col((Eigen::Index)c).transpose() * x).transpose() / nc;
            Eigen::MatrixXd cov = Eigen::MatrixXd::Zero((Eigen::Index)dim, (Eigen::Index)dim);
            for (std::size_t i = 0; i < n; ++i) {
                Eigen::VectorXd d = x.row((Eigen::Index)i).transpose() - m;
                cov.noalias() += resp((Eigen::Index)i, (Eigen::Index)c) * d * d.transpose();
            }
            cov /= nc;
            cov += ridge * Eigen::MatrixXd::Identity((Eigen::Index)dim, (Eigen::Index)dim);
            comps[(std::size_t)c].set(m, cov);
        }
        if (ll - prev_ll < tol && iter > 0) {
            prev_ll = ll;
            break;
        }
        prev_ll = ll;
    }
    model.log_likelihood = prev_ll;

    for (int c = 0; c < q; ++c) {
        GmmComponent out;
        out.weight = weights[(std::size_t)c];
        const Mvn& mv = comps[(std::size_t)c];
        out.mean.assign(mv.mean.data(), mv.mean.data() + dim);
        Eigen::MatrixXd l = mv.chol.matrixL();
        Eigen::MatrixXd cov = l * l.transpose();
        out.covariance.resize(dim, std::vector<double>(dim));
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t cc = 0; cc < dim; ++cc)
                out.covariance[r][cc] = cov((Eigen::Index)r, (Eigen::Index)cc);
        model.components.push_back(std::move(out));
    }
    return model;
}

double gmm_log_likelihood(const GmmModel& gmm, std::span<const std::vector<double>> scores) {
    double ll = 0.0;
    for (const auto& s : scores) {
        Eigen::VectorXd xv((Eigen::Index)s.size());
        for (std::size_t d = 0; d < s.size(); ++d) xv[(Eigen::Index)d] = s[d];
        std::vector<double> lp;
        for (const GmmComponent& c : gmm.components) {
            Eigen::VectorXd m((Eigen::Index)c.mean.size());
            Eigen::MatrixXd cov((Eigen::Index)c.mean.size(), (Eigen::Index)c.mean.size());
            for (std::size_t r = 0; r < c.mean.size(); ++r) {
                m[(Eigen::Index)r] = c.mean[r];
                for (std::size_t cc = 0; cc < c.mean.size(); ++cc)
                    cov((Eigen::Index)r, (Eigen::Index)cc) = c.covariance[r][cc];
            }
            Mvn mv;
            mv.set(m, cov);
            lp.push_back(std::log(c.weight) + mv.logpdf(xv));
        }
        ll += logsumexp(lp);
    }
    return ll;
}

std::vector<Signal> sample_synthetic(const FunctionalBasis& basis, const GmmModel& gmm,
                                     int n, RngStream& rng, const SynthesisOptions& opts) {
    if (n < 0) throw DomainError("sample_synthetic: n must be >= 0");
    if (gmm.components.empty()) throw DomainError("sample_synthetic: empty mixture");
    const std::size_t dim = gmm.components[0].mean.size();
    if (dim != basis.components())
        throw ShapeError("sample_synthetic: mixture dimension does not match the basis");

    // factor = V sqrt(max(eig, 0)): handles semi-definite covariances, e.g.
    // a collapsed component whose draws are exactly its mean
    std::vector<Eigen::MatrixXd> factors;
    for (const GmmComponent& c : gmm.components) {
        Eigen::MatrixXd cov((Eigen::Index)dim, (Eigen::Index)dim);
        for (std::size_t r = 0; r < dim; ++r)
            for (std::size_t cc = 0; cc < dim; ++cc)
                cov((Eigen::Index)r, (Eigen::Index)cc) = c.covariance[r][cc];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        if (eig.info() != Eigen::Success)
            throw NumericError("sample_synthetic: covariance eigendecomposition failed");
        if (eig.eigenvalues().minCoeff() < -1e-9)
            throw NumericError("sample_synthetic: component covariance not PSD");
        factors.push_back(eig.eigenvectors() *
                          eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal());
    }

    std::vector<Signal> out;
    out.reserve((std::size_t)n);
    for (int i = 0; i < n; ++i) {
        double draw = rng.uniform01();
        std::size_t comp = gmm.components.size() - 1;
        double acc = 0.0;
        for (std::size_t c = 0; c < gmm.components.size(); ++c) {
            acc += gmm.components[c].weight;
            if (draw <= acc) {
                comp = c;
                break;
            }
        }
        Eigen::VectorXd eps((Eigen::Index)dim);
        for (std::size_t d = 0; d < dim; ++d) eps[(Eigen::Index)d] = rng.normal();
        Eigen::VectorXd xi = factors[comp] * eps;
        std::vector<double> scores(dim);
        for (std::size_t d = 0; d < dim; ++d)
            scores[d] = gmm.components[comp].mean[d] + xi[(Eigen::Index)d];
        std::vector<double> curve = fpca_reconstruct(basis, scores);

        Signal s;
        char id[48];
        std::snprintf(id, sizeof(id), "%s%03d", opts.id_prefix.c_str(), opts.id_start + i);
        s.unit_id = id;
        if (opts.n_points <= 0) {
            for (std::size_t gidx = 0; gidx < basis.grid.size(); ++gidx) {
                double y = curve[gidx];
                if (opts.add_noise) y += rng.normal(0.0, opts.noise_sd);
                s.obs.push_back({basis.grid[gidx], y});
            }
        } else {
            // re-sample at the training x protocol via interpolation on the grid
            std::vector<double> xs((std::size_t)opts.n_points);
            for (double& xv : xs)
                xv = basis.grid.front() +
                     (1.0 - rng.uniform01()) * (basis.grid.back() - basis.grid.front());
            std::sort(xs.begin(), xs.end());
            Signal grid_signal;
            for (std::size_t gidx = 0; gidx < basis.grid.size(); ++gidx)
                grid_signal.obs.push_back({basis.grid[gidx], curve[gidx]});
            for (double xv : xs) {
                double y = interpolate(grid_signal, xv);
                if (opts.add_noise) y += rng.normal(0.0, opts.noise_sd);
                s.obs.push_back({xv, y});
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

} // namespace lanp
