#include <Eigen/Dense>
#include <cmath>

#include "ccs/errors.hpp"
#include "ccs/rng.hpp"
#include "ccs/spectral.hpp"
#include "doctest.h"
#include "../support/test_nets.hpp"

using namespace ccs;
using testsupport::random_matrix;

namespace {

LinearOperator matrix_op(const Eigen::MatrixXd& M) {
    return [M](const Eigen::VectorXd& v) { return Eigen::VectorXd(M * v); };
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("identity operator") {
    const auto ev = extreme_eigenvalues(matrix_op(Eigen::MatrixXd::Identity(5, 5)), 5);
    CHECK(ev.lambda_min == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ev.lambda_max == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("diagonal spectrum") {
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
    D.diagonal() << 1.0, -2.0, 3.0;
    const auto ev = extreme_eigenvalues(matrix_op(D), 3);
    CHECK(ev.lambda_min == doctest::Approx(-2.0).epsilon(1e-8));
    CHECK(ev.lambda_max == doctest::Approx(3.0).epsilon(1e-8));
}

TEST_CASE("zero operator") {
    const auto ev = extreme_eigenvalues(matrix_op(Eigen::MatrixXd::Zero(4, 4)), 4);
    CHECK(ev.lambda_min == 0.0);
    CHECK(ev.lambda_max == 0.0);
}

TEST_CASE("matches a dense symmetric eigensolve on random 64x64 matrices") {
    auto rng = make_rng(1234);
    for (int trial = 0; trial < 50; ++trial) {
        const Eigen::MatrixXd A = random_matrix(64, 64, rng);
        const Eigen::MatrixXd S = 0.5 * (A + A.transpose());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(S);
        const double want_min = solver.eigenvalues().minCoeff();
        const double want_max = solver.eigenvalues().maxCoeff();

        PowerIterOptions opts;
        opts.seed = derive_seed(555, std::uint64_t(trial));
        const auto ev = extreme_eigenvalues(matrix_op(S), 64, opts);
        CHECK(std::abs(ev.lambda_min - want_min) < 1e-6 * std::abs(want_min));
        CHECK(std::abs(ev.lambda_max - want_max) < 1e-6 * std::abs(want_max));
    }
}

TEST_CASE("nearly symmetric +- spectra converge on both ends") {
    // lambda_min ~ -lambda_max defeats naive power iteration on H itself
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(6, 6);
    D.diagonal() << 5.0, -4.9999, 1.0, -1.0, 0.5, 0.0;
    auto rot_rng = make_rng(77);
    const Eigen::MatrixXd A = random_matrix(6, 6, rot_rng);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    const Eigen::MatrixXd Q = qr.householderQ();
    const Eigen::MatrixXd S = Q * D * Q.transpose();

    const auto ev = extreme_eigenvalues(matrix_op(S), 6);
    CHECK(ev.lambda_max == doctest::Approx(5.0).epsilon(1e-7));
    CHECK(ev.lambda_min == doctest::Approx(-4.9999).epsilon(1e-7));
}

TEST_CASE("spectral radius of a rank-1 operator") {
    auto rng = make_rng(31);
    Eigen::VectorXd u = testsupport::random_vector(10, rng);
    u.normalize();
    const Eigen::MatrixXd S = -3.5 * u * u.transpose();
    CHECK(spectral_radius(matrix_op(S), 10) == doctest::Approx(3.5).epsilon(1e-8));
}

TEST_CASE("non-finite operator raises numeric error") {
    const auto bad = [](const Eigen::VectorXd& v) {
        Eigen::VectorXd w = v;
        w(0) = std::nan("");
        return w;
    };
    CHECK_THROWS_AS(extreme_eigenvalues(bad, 3), NumericError);
}

}  // TEST_SUITE
