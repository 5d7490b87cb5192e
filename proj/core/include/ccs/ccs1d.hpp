#pragma once

#include <cstdint>
#include <functional>
#include <vector>

namespace ccs {

using ScalarFn = std::function<double(double)>;

// 1-D convex-concave spline: tangent lines of f(x) +- c*x^2 sampled at
// uniform anchors, evaluated as 0.5 * (max convex line + min concave line).
struct Ccs1D {
    struct Support {
        double x = 0.0;   // anchor
        double f = 0.0;   // f(anchor)
        double df = 0.0;  // f'(anchor)
    };

    double c = 0.0;
    double lo = 0.0, hi = 0.0;
    std::vector<Support> supports;  // sorted by anchor

    double eval(double x) const;
    // the two envelopes separately (convex keeps +c x^2, concave -c x^2)
    void envelopes(double x, double* convex, double* concave) const;
};

// (1+margin) * max |f''| over a uniform grid of grid_points on the domain.
double c_from_second_derivative_1d(const ScalarFn& f_second, double lo, double hi,
                                   std::int64_t grid_points, double margin = 1e-3);

// Anchors uniform on [lo, hi] inclusive (single plane anchors at the
// midpoint). Slopes come from central differences with step (hi-lo)*1e-7
// unless an analytic derivative is supplied.
Ccs1D build_ccs_1d(const ScalarFn& f, double c, double lo, double hi, std::int64_t n_planes,
                   const ScalarFn* f_prime = nullptr);
Ccs1D build_ccs_1d(const ScalarFn& f, const ScalarFn& f_second, double lo, double hi,
                   std::int64_t n_planes, std::int64_t c_grid_points = 100001,
                   const ScalarFn* f_prime = nullptr);

// Weighted sum of Gaussian bumps with seeded parameters: mean ~ U[-3,3],
// standard deviation ~ U[0,0.2] (resampled while below 1e-3), weight ~
// U[-1,1]. Second derivative is analytic.
struct GaussianMixture1D {
    struct Component {
        double weight = 0.0, mean = 0.0, sigma = 0.0;
    };
    std::vector<Component> components;

    double value(double x) const;
    double second_derivative(double x) const;
    ScalarFn fn() const;
    ScalarFn second_fn() const;
};

GaussianMixture1D gaussian_mixture_1d(int n_components, std::uint64_t seed);

}  // namespace ccs
