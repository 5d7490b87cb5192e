#include "ccs/spectral.hpp"

#include <cmath>

#include "ccs/errors.hpp"
#include "ccs/rng.hpp"

namespace ccs {
namespace {

using Eigen::VectorXd;

// Successive Rayleigh-quotient change is a lagging error indicator; stopping
// two orders below the target keeps the final estimate within tol even for
// eigenvalue ratios around 0.99.
constexpr double kStopFactor = 1e-3;

VectorXd random_unit(int dim, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    VectorXd v(dim);
    for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
    const double n = v.norm();
    return n > 0.0 ? VectorXd(v / n) : VectorXd::Unit(dim, 0);
}

void check_finite(const VectorXd& v) {
    if (!v.allFinite()) throw NumericError("operator produced non-finite values");
}

// Power iteration on a PSD operator; returns the largest eigenvalue.
double psd_dominant(const LinearOperator& apply, int dim, const PowerIterOptions& opts,
                    std::uint64_t seed, int* iterations) {
    VectorXd v = random_unit(dim, seed);
    double r_prev = 0.0;
    int used = 0;
    for (int t = 0; t < opts.max_iters; ++t) {
        VectorXd w = apply(v);
        check_finite(w);
        ++used;
        const double r = v.dot(w);
        const double nrm = w.norm();
        if (nrm == 0.0) {
            r_prev = 0.0;
            break;
        }
        v = w / nrm;
        if (t > 0 && std::abs(r - r_prev) <= kStopFactor * opts.tol * std::max(std::abs(r), 1e-30)) {
            r_prev = r;
            break;
        }
        r_prev = r;
    }
    if (iterations) *iterations += used;
    return r_prev;
}

}  // namespace

double spectral_radius(const LinearOperator& apply, int dim, const PowerIterOptions& opts,
                       int* iterations) {
    VectorXd v = random_unit(dim, derive_seed(opts.seed, 0x51ull));
    double sigma_prev = -1.0;
    double sigma = 0.0;
    int used = 0;
    for (int t = 0; t < opts.max_iters; ++t) {
        VectorXd y = apply(v);
        check_finite(y);
        ++used;
        sigma = y.norm();  // v is unit: |Hv| -> sqrt of Rayleigh quotient of H^2
        if (sigma == 0.0) break;
        VectorXd y2 = apply(y);
        check_finite(y2);
        ++used;
        const double n2 = y2.norm();
        if (n2 == 0.0) break;  // v was in the kernel of H^2's dominant part
        v = y2 / n2;
        if (sigma_prev >= 0.0 &&
            std::abs(sigma - sigma_prev) <= kStopFactor * opts.tol * std::max(sigma, 1e-30))
            break;
        sigma_prev = sigma;
    }
    if (iterations) *iterations += used;
    return sigma;
}

ExtremeEigenvalues extreme_eigenvalues(const LinearOperator& apply, int dim,
                                       const PowerIterOptions& opts) {
    ExtremeEigenvalues out;
    const double sigma = spectral_radius(apply, dim, opts, &out.iterations);
    if (sigma == 0.0) return out;  // zero operator

    // Shift a touch above the spectral radius so both shifted operators are
    // strictly PSD even with the iteration's residual error.
    const double s = sigma * (1.0 + 1e-2);

    const auto plus = [&](const VectorXd& x) { return VectorXd(apply(x) + s * x); };
    const auto minus = [&](const VectorXd& x) { return VectorXd(s * x - apply(x)); };

    const double mu_hi = psd_dominant(plus, dim, opts, derive_seed(opts.seed, 0x52ull),
                                      &out.iterations);
    const double mu_lo = psd_dominant(minus, dim, opts, derive_seed(opts.seed, 0x53ull),
                                      &out.iterations);
    out.lambda_max = mu_hi - s;
    out.lambda_min = s - mu_lo;
    return out;
}

}  // namespace ccs
