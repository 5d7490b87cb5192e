#include <cmath>
#include <random>

#include "ccs/dataset.hpp"
#include "ccs/errors.hpp"
#include "ccs/network.hpp"
#include "ccs/rng.hpp"
#include "doctest.h"
#include "../support/finite_diff.hpp"
#include "../support/test_nets.hpp"

using namespace ccs;
using testsupport::fd_gradient;
using testsupport::random_matrix;
using testsupport::random_sigmoid_net;
using testsupport::random_vector;
using testsupport::rel_err;

namespace {

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_SUITE("network") {

TEST_CASE("identity dense layer passes input through") {
    Network net(2, {Layer::dense(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2))});
    Eigen::VectorXd x(2);
    x << 0.3, -0.2;
    const Eigen::VectorXd y = net.forward(x);
    CHECK(y(0) == 0.3);
    CHECK(y(1) == -0.2);
}

TEST_CASE("all-zero sigmoid layer outputs one half") {
    Network net(3, {Layer::dense(Eigen::MatrixXd::Zero(4, 3), Eigen::VectorXd::Zero(4),
                                 Activation::sigmoid)});
    const Eigen::VectorXd y = net.forward(Eigen::VectorXd::Random(3));
    for (int i = 0; i < 4; ++i) CHECK(y(i) == 0.5);
}

TEST_CASE("1-2-1 net matches hand-computed composition") {
    Eigen::MatrixXd W1(2, 1);
    W1 << 1.0, -2.0;
    Eigen::VectorXd b1(2);
    b1 << 0.5, -0.5;
    Eigen::MatrixXd W2(1, 2);
    W2 << 2.0, 3.0;
    Eigen::VectorXd b2(1);
    b2 << 0.25;
    Network net(1, {Layer::dense(W1, b1, Activation::sigmoid),
                    Layer::dense(W2, b2, Activation::identity)});
    Eigen::VectorXd x(1);
    x << 0.7;
    const double want = 2.0 * sigma(1.0 * 0.7 + 0.5) + 3.0 * sigma(-2.0 * 0.7 - 0.5) + 0.25;
    CHECK(net.forward(x)(0) == doctest::Approx(want).epsilon(1e-15));
}

TEST_CASE("forward is deterministic and batch-consistent") {
    auto rng = make_rng(11);
    const Network net = random_sigmoid_net(rng);
    const Eigen::MatrixXd X = random_matrix(net.input_dim(), 5, rng);
    const Eigen::MatrixXd y1 = net.forward_batch(X);
    const Eigen::MatrixXd y2 = net.forward_batch(X);
    CHECK(y1 == y2);  // bit-identical
}

TEST_CASE("dimension mismatch raises shape error") {
    Network net(2, {Layer::dense(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2))});
    CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(3)), ShapeError);
}

TEST_CASE("output index out of range raises index error") {
    Network net(2, {Layer::dense(Eigen::MatrixXd::Identity(2, 2), Eigen::VectorXd::Zero(2))});
    CHECK_THROWS_AS(net.input_gradient(Eigen::VectorXd::Zero(2), 2), IndexError);
}

TEST_CASE("gradient of a linear net is the weight row") {
    auto rng = make_rng(21);
    const Eigen::MatrixXd W = random_matrix(4, 6, rng);
    Network net(6, {Layer::dense(W, random_vector(4, rng))});
    const Eigen::VectorXd x = random_vector(6, rng);
    for (int k = 0; k < 4; ++k) {
        const Eigen::VectorXd g = net.input_gradient(x, k);
        CHECK(rel_err(g, W.row(k).transpose()) < 1e-15);
    }
}

TEST_CASE("gradient of an all-zero net vanishes") {
    Network net(3, {Layer::dense(Eigen::MatrixXd::Zero(2, 3), Eigen::VectorXd::Zero(2),
                                 Activation::sigmoid)});
    CHECK(net.input_gradient(Eigen::VectorXd::Random(3), 1).norm() == 0.0);
}

TEST_CASE("gradient matches central finite differences on 100 random nets") {
    auto rng = make_rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const Network net = random_sigmoid_net(rng);
        const Eigen::VectorXd x = random_vector(net.input_dim(), rng);
        const int k = static_cast<int>(rng() % std::uint64_t(net.output_dim()));
        const Eigen::VectorXd g = net.input_gradient(x, k);
        const Eigen::VectorXd fd = fd_gradient(
            [&](const Eigen::VectorXd& q) { return net.forward(q)(k); }, x, 1e-5);
        CHECK(rel_err(g, fd) < 1e-6);
    }
}

TEST_CASE("gradient matches finite differences on a 784-200-10 sigmoid net") {
    auto rng = make_rng(41);
    const Network net = Network::mlp(784, {200}, 10, Activation::sigmoid, 99);
    const Eigen::VectorXd x = random_vector(784, rng, 0.3);
    const int k = 7;
    const Eigen::VectorXd g = net.input_gradient(x, k);
    const Eigen::VectorXd fd =
        fd_gradient([&](const Eigen::VectorXd& q) { return net.forward(q)(k); }, x, 1e-5);
    CHECK(rel_err(g, fd) < 1e-6);
}

TEST_CASE("hvp of a linear net is zero") {
    auto rng = make_rng(51);
    Network net(5, {Layer::dense(random_matrix(3, 5, rng), random_vector(3, rng))});
    const Eigen::VectorXd x = random_vector(5, rng);
    const Eigen::VectorXd v = random_vector(5, rng);
    CHECK(net.hvp(x, 0, v).norm() == 0.0);
}

TEST_CASE("hvp of a scalar sigmoid unit matches the closed form") {
    // f(x) = sigma(w x + b): H = w^2 sigma''(z), sigma'' = s(1-s)(1-2s)
    const double w = 1.7, b = -0.3;
    Eigen::MatrixXd W(1, 1);
    W << w;
    Eigen::VectorXd bb(1);
    bb << b;
    Network net(1, {Layer::dense(W, bb, Activation::sigmoid)});
    for (double xv : {-2.0, -0.5, 0.0, 0.8, 3.0}) {
        Eigen::VectorXd x(1), v(1);
        x << xv;
        v << 1.3;
        const double s = sigma(w * xv + b);
        const double want = w * w * s * (1 - s) * (1 - 2 * s) * 1.3;
        CHECK(net.hvp(x, 0, v)(0) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("hvp matches finite differences of the gradient") {
    auto rng = make_rng(61);
    for (int trial = 0; trial < 30; ++trial) {
        const Network net = random_sigmoid_net(rng);
        const Eigen::VectorXd x = random_vector(net.input_dim(), rng);
        const Eigen::VectorXd v = random_vector(net.input_dim(), rng);
        const int k = static_cast<int>(rng() % std::uint64_t(net.output_dim()));
        const double eps = 1e-4 * (1.0 + x.lpNorm<Eigen::Infinity>());
        const Eigen::VectorXd fd =
            (net.input_gradient((x + eps * v).eval(), k) -
             net.input_gradient((x - eps * v).eval(), k)) /
            (2.0 * eps);
        CHECK(rel_err(net.hvp(x, k, v), fd) < 1e-5);
    }
}

TEST_CASE("hvp is linear in the direction") {
    auto rng = make_rng(71);
    const Network net = random_sigmoid_net(rng);
    const Eigen::VectorXd x = random_vector(net.input_dim(), rng);
    const Eigen::VectorXd u = random_vector(net.input_dim(), rng);
    const Eigen::VectorXd v = random_vector(net.input_dim(), rng);
    const double a = 1.7, b = -0.4;
    const Eigen::VectorXd lhs = net.hvp(x, 0, (a * u + b * v).eval());
    const Eigen::VectorXd rhs = a * net.hvp(x, 0, u) + b * net.hvp(x, 0, v);
    CHECK(rel_err(lhs, rhs) < 1e-10);
}

TEST_CASE("hvp is symmetric") {
    auto rng = make_rng(81);
    for (int trial = 0; trial < 10; ++trial) {
        const Network net = random_sigmoid_net(rng);
        const Eigen::VectorXd x = random_vector(net.input_dim(), rng);
        const Eigen::VectorXd u = random_vector(net.input_dim(), rng);
        const Eigen::VectorXd v = random_vector(net.input_dim(), rng);
        const double a = u.dot(net.hvp(x, 0, v));
        const double b = v.dot(net.hvp(x, 0, u));
        CHECK(std::abs(a - b) <= 1e-8 * std::max(std::abs(a), 1.0));
    }
}

TEST_CASE("conv/pool nets differentiate correctly") {
    // 1x6x6 input, conv(1->2, 3x3, pad 1) sigmoid, pool 2, dense to 3 outputs
    auto rng = make_rng(91);
    Layer conv = Layer::conv2d(1, 2, 3, 1, 1, Activation::sigmoid);
    conv.W = random_matrix(2, 9, rng, 0.7);
    conv.b = random_vector(2, rng, 0.3);
    Layer pool = Layer::maxpool2d(2);
    Layer out = Layer::dense(random_matrix(3, 2 * 3 * 3, rng, 0.5), random_vector(3, rng));
    Network net(1, 6, 6, {conv, pool, out});

    const Eigen::VectorXd x = random_vector(36, rng, 0.6);
    const int k = 2;

    SUBCASE("gradient vs finite differences") {
        const Eigen::VectorXd g = net.input_gradient(x, k);
        const Eigen::VectorXd fd = fd_gradient(
            [&](const Eigen::VectorXd& q) { return net.forward(q)(k); }, x, 1e-6);
        CHECK(rel_err(g, fd) < 1e-6);
    }

    SUBCASE("hvp vs finite differences of the gradient") {
        const Eigen::VectorXd v = random_vector(36, rng);
        const double eps = 1e-5 * (1.0 + x.lpNorm<Eigen::Infinity>());
        const Eigen::VectorXd fd =
            (net.input_gradient((x + eps * v).eval(), k) -
             net.input_gradient((x - eps * v).eval(), k)) /
            (2.0 * eps);
        CHECK(rel_err(net.hvp(x, k, v), fd) < 1e-5);
    }

    SUBCASE("pool forward picks the first maximal element") {
        // feed a plane with a tie inside one window; gradient must route to
        // the lower flat index
        Layer pool_only = Layer::maxpool2d(2);
        Network pnet(1, 2, 2, {pool_only});
        Eigen::VectorXd tied(4);
        tied << 1.0, 1.0, 0.0, 0.0;  // indices 0 and 1 tie
        const Eigen::VectorXd g = pnet.input_gradient(tied, 0);
        CHECK(g(0) == 1.0);
        CHECK(g(1) == 0.0);
    }
}

TEST_CASE("relu gradients take the inactive branch at the kink") {
    Eigen::MatrixXd W(1, 1);
    W << 1.0;
    Eigen::VectorXd b(1);
    b << 0.0;
    Network net(1, {Layer::dense(W, b, Activation::relu)});
    Eigen::VectorXd x(1);
    x << 0.0;  // exactly at the kink
    CHECK(net.input_gradient(x, 0)(0) == 0.0);
}

TEST_CASE("accuracy argmax ties break to the lowest index") {
    // all-zero net: logits identical -> predicted class 0
    Network net(2, {Layer::dense(Eigen::MatrixXd::Zero(3, 2), Eigen::VectorXd::Zero(3))});
    Dataset ds;
    ds.inputs = Eigen::MatrixXd::Random(2, 10);
    ds.labels = {0, 0, 0, 1, 1, 2, 2, 2, 2, 0};
    ds.n_classes = 3;
    CHECK(accuracy(net, ds) == doctest::Approx(0.4));  // fraction of label-0 samples
}

TEST_CASE("accuracy on a perfect one-sample lookup is one") {
    Eigen::MatrixXd W(2, 1);
    W << 1.0, -1.0;
    Network net(1, {Layer::dense(W, Eigen::VectorXd::Zero(2))});
    Dataset ds;
    ds.inputs = Eigen::MatrixXd::Constant(1, 1, 2.0);
    ds.labels = {0};
    ds.n_classes = 2;
    CHECK(accuracy(net, ds) == 1.0);
}

}  // TEST_SUITE
