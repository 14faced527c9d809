#pragma once
#include <span>
#include <string>
#include <vector>

#include "lanp/model.hpp"
#include "lanp/rng.hpp"

namespace lanp {

// Discretized mean curve and orthonormal eigenfunctions on a common grid.
// Inner products are grid-step weighted: <f, g> = sum_i f_i g_i dx.
struct FunctionalBasis {
    std::vector<double> grid;
    std::vector<double> mean;
    std::vector<std::vector<double>> eigenfunctions; // one grid row per component
    std::vector<double> eigenvalues;                 // descending, all positive

    double step() const { return grid.size() > 1 ? grid[1] - grid[0] : 1.0; }
    std::size_t components() const { return eigenfunctions.size(); }
};

struct FpcaResult {
    FunctionalBasis basis;
    std::vector<std::vector<double>> scores; // one vector per input signal
};

// Interpolate the signals onto a common grid, eigendecompose the centered
// sample covariance, and keep the smallest N whose cumulative eigenvalue
// ratio reaches rho.
FpcaResult fit_fpca(std::span<const Signal> signals, int grid_size, double rho);

std::vector<double> fpca_project(const FunctionalBasis& basis, const Signal& signal);

// beta + sum_n xi_n psi_n evaluated on the grid
std::vector<double> fpca_reconstruct(const FunctionalBasis& basis,
                                     std::span<const double> scores);

struct GmmComponent {
    double weight = 0.0;
    std::vector<double> mean;
    std::vector<std::vector<double>> covariance; // symmetric positive-definite
};

struct GmmModel {
    std::vector<GmmComponent> components;
    double log_likelihood = 0.0;
    std::vector<double> log_likelihood_history; // one entry per EM iteration
};

// Standard EM with kmeans++-style seeding; a 1e-6 diagonal ridge keeps the
// covariances invertible. Stops once the log-likelihood improves by less
// than tol.
GmmModel fit_gmm(std::span<const std::vector<double>> scores, int q, RngStream& rng,
                 int max_iterations = 200, double tol = 1e-8);

double gmm_log_likelihood(const GmmModel& gmm, std::span<const std::vector<double>> scores);

struct SynthesisOptions {
    int n_points = 0; // 0 -> return the curve on the basis grid
    bool add_noise = false;
    double noise_sd = 0.03;
    std::string id_prefix = "syn_";
    int id_start = 0;
};

// Draw scores from the mixture and reconstruct smooth unlabeled signals.
std::vector<Signal> sample_synthetic(const FunctionalBasis& basis, const GmmModel& gmm,
                                     int n, RngStream& rng,
                                     const SynthesisOptions& opts = {});

} // namespace lanp
