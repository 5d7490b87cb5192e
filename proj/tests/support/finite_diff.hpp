#pragma once

// Central finite differences: the independent oracles the differentiation
// tests check against. These must never call into the analytic gradient/HVP
// paths they validate (the HVP oracle differentiates the analytic gradient,
// which is the cross-check the spec of the tests wants).

#include <Eigen/Core>
#include <functional>

namespace testsupport {

inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h) {
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        g(i) = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

inline double fd_second(const std::function<double(double)>& f, double x, double h) {
    return (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
}

inline double rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    const double denom = want.norm();
    if (denom == 0.0) return got.norm();
    return (got - want).norm() / denom;
}

}  // namespace testsupport
