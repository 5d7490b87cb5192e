#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace ccs {

struct ClusterConfig {
    std::int64_t k = 1;
    int restarts = 10;
    int max_iters = 300;
    std::uint64_t seed = 0;
    double tol = 1e-6;       // relative inertia change defining convergence
    bool normalize = false;  // per-feature standardization of descriptors (reduce_ccs only)
};

struct KMeansResult {
    Eigen::MatrixXd centroids;       // d x k, column per centroid
    Eigen::VectorXi assignments;     // n entries in [0, k)
    double inertia = 0.0;            // sum of squared distances to assigned centroids
    std::vector<double> inertia_history;  // per Lloyd iteration of the winning restart
    int iterations = 0;
    int best_restart = 0;
};

// Lloyd iteration with k-means++ seeding, best of `restarts` runs by inertia
// (ties keep the earlier restart). Points are columns. Assignment ties go to
// the lowest centroid index; empty clusters reseed at the point farthest from
// its centroid. Deterministic given the seed.
KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& points, const ClusterConfig& cfg);

}  // namespace ccs
