#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>

namespace ccs {

// Symmetric linear operator given as a matrix-free apply.
using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct PowerIterOptions {
    double tol = 1e-6;       // target relative accuracy of the eigenvalue
    int max_iters = 1000;    // per power-iteration phase
    std::uint64_t seed = 0;  // start-vector seed
};

struct ExtremeEigenvalues {
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    int iterations = 0;  // total operator applications
};

// Dominant eigenvalue magnitude (spectral radius) of a symmetric operator,
// via power iteration on the squared operator so that near-symmetric +-
// spectra still converge. Throws NumericError on non-finite applies.
double spectral_radius(const LinearOperator& apply, int dim, const PowerIterOptions& opts = {},
                       int* iterations = nullptr);

// Extreme eigenvalues of a symmetric operator by shifted power iteration:
// the spectral radius sigma is estimated first, then lambda_max is recovered
// from power iteration on (H + s*I) and lambda_min from (s*I - H), s slightly
// above sigma so both shifted operators are PSD.
ExtremeEigenvalues extreme_eigenvalues(const LinearOperator& apply, int dim,
                                       const PowerIterOptions& opts = {});

}  // namespace ccs
