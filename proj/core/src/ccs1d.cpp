#include "ccs/ccs1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ccs/errors.hpp"
#include "ccs/rng.hpp"

namespace ccs {

void Ccs1D::envelopes(double x, double* convex, double* concave) const {
    double mx = -std::numeric_limits<double>::infinity();
    double mn = std::numeric_limits<double>::infinity();
    for (const Support& s : supports) {
        // f-part and quadratic part of each tangent line kept separate until
        // the final combination
        const double fpart = s.f + s.df * (x - s.x);
        const double qpart = 2.0 * s.x * x - s.x * s.x;
        mx = std::max(mx, fpart + c * qpart);
        mn = std::min(mn, fpart - c * qpart);
    }
    if (convex) *convex = mx;
    if (concave) *concave = mn;
}

double Ccs1D::eval(double x) const {
    double cv, cc;
    envelopes(x, &cv, &cc);
    return 0.5 * (cv + cc);
}

double c_from_second_derivative_1d(const ScalarFn& f_second, double lo, double hi,
                                   std::int64_t grid_points, double margin) {
    if (grid_points < 2) throw ArgumentError("c grid needs at least 2 points");
    if (!(lo < hi)) throw ArgumentError("domain must satisfy lo < hi");
    double worst = 0.0;
    for (std::int64_t i = 0; i < grid_points; ++i) {
        const double x = lo + (hi - lo) * double(i) / double(grid_points - 1);
        const double v = f_second(x);
        if (!std::isfinite(v))
            throw NumericError("second derivative non-finite at x=" + std::to_string(x));
        worst = std::max(worst, std::abs(v));
    }
    return (1.0 + margin) * worst;
}

Ccs1D build_ccs_1d(const ScalarFn& f, double c, double lo, double hi, std::int64_t n_planes,
                   const ScalarFn* f_prime) {
    if (!(lo < hi)) throw ArgumentError("domain must satisfy lo < hi");
    if (n_planes < 1) throw ArgumentError("need at least one plane");
    if (c < 0.0) throw ArgumentError("curvature constant must be non-negative");

    Ccs1D out;
    out.c = c;
    out.lo = lo;
    out.hi = hi;
    out.supports.reserve(static_cast<std::size_t>(n_planes));

    const double h = (hi - lo) * 1e-7;  // central-difference step
    for (std::int64_t i = 0; i < n_planes; ++i) {
        Ccs1D::Support s;
        s.x = n_planes == 1 ? 0.5 * (lo + hi)
                            : lo + (hi - lo) * double(i) / double(n_planes - 1);
        s.f = f(s.x);
        s.df = f_prime ? (*f_prime)(s.x) : (f(s.x + h) - f(s.x - h)) / (2.0 * h);
        if (!std::isfinite(s.f) || !std::isfinite(s.df))
            throw NumericError("function non-finite at x=" + std::to_string(s.x));
        out.supports.push_back(s);
    }
    return out;
}

Ccs1D build_ccs_1d(const ScalarFn& f, const ScalarFn& f_second, double lo, double hi,
                   std::int64_t n_planes, std::int64_t c_grid_points, const ScalarFn* f_prime) {
    const double c = c_from_second_derivative_1d(f_second, lo, hi, c_grid_points);
    return build_ccs_1d(f, c, lo, hi, n_planes, f_prime);
}

double GaussianMixture1D::value(double x) const {
    double v = 0.0;
    for (const Component& c : components) {
        const double u = (x - c.mean) / c.sigma;
        v += c.weight * std::exp(-0.5 * u * u);
    }
    return v;
}

double GaussianMixture1D::second_derivative(double x) const {
    double v = 0.0;
    for (const Component& c : components) {
        const double u = x - c.mean;
        const double s2 = c.sigma * c.sigma;
        v += c.weight * std::exp(-0.5 * u * u / s2) * (u * u / (s2 * s2) - 1.0 / s2);
    }
    return v;
}

ScalarFn GaussianMixture1D::fn() const {
    return [m = *this](double x) { return m.value(x); };
}

ScalarFn GaussianMixture1D::second_fn() const {
    return [m = *this](double x) { return m.second_derivative(x); };
}

GaussianMixture1D gaussian_mixture_1d(int n_components, std::uint64_t seed) {
    if (n_components < 1) throw ArgumentError("mixture needs at least one component");
    auto rng = make_rng(derive_seed(seed, 0x6a55ull));
    std::uniform_real_distribution<double> mean_d(-3.0, 3.0);
    std::uniform_real_distribution<double> sigma_d(0.0, 0.2);
    std::uniform_real_distribution<double> weight_d(-1.0, 1.0);

    GaussianMixture1D mix;
    mix.components.resize(static_cast<std::size_t>(n_components));
    for (auto& c : mix.components) {
        c.mean = mean_d(rng);
        do {
            c.sigma = sigma_d(rng);
        } while (c.sigma < 1e-3);  // degenerate widths would blow up f''
        c.weight = weight_d(rng);
    }
    return mix;
}

}  // namespace ccs
