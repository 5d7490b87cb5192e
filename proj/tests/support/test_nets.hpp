#pragma once

// Small randomized networks and vectors for oracle-based tests.

#include <Eigen/Core>
#include <random>

#include "ccs/network.hpp"
#include "ccs/rng.hpp"

namespace testsupport {

inline Eigen::VectorXd random_vector(int n, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = gauss(rng);
    return v;
}

inline Eigen::MatrixXd random_matrix(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> gauss(0.0, scale);
    Eigen::MatrixXd m(r, c);
    for (int j = 0; j < c; ++j)
        for (int i = 0; i < r; ++i) m(i, j) = gauss(rng);
    return m;
}

// Random sigmoid MLP with dims drawn in [3, max_dim] and 1-3 hidden layers.
inline ccs::Network random_sigmoid_net(std::mt19937_64& rng, int max_dim = 10) {
    std::uniform_int_distribution<int> dim(3, max_dim);
    std::uniform_int_distribution<int> depth(1, 3);
    const int in = dim(rng);
    const int out = dim(rng);
    std::vector<int> hidden(static_cast<std::size_t>(depth(rng)));
    for (auto& h : hidden) h = dim(rng);
    return ccs::Network::mlp(in, hidden, out, ccs::Activation::sigmoid, rng());
}

}  // namespace testsupport
