#include "ccs/kmeans.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ccs/errors.hpp"
#include "ccs/parallel.hpp"
#include "ccs/rng.hpp"

namespace ccs {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::VectorXi;

constexpr std::int64_t kPointBlock = 1024;

struct AssignOut {
    VectorXi assign;
    VectorXd dist2;  // exact squared distance to the assigned centroid
    VectorXd counts;
    MatrixXd sums;  // d x k
    bool changed = false;
};

// Assignment step: argmin over centroids of |mu|^2 - 2 x.mu (ties to lowest
// index), exact residual distances recomputed against the chosen centroid.
// Per-block partials merge in block order, keeping sums reproducible.
void assign_step(const Eigen::Ref<const MatrixXd>& P, const MatrixXd& C,
                 const VectorXi* prev, AssignOut& out) {
    const std::int64_t n = P.cols();
    const auto k = C.cols();
    const VectorXd cnorm = C.colwise().squaredNorm();

    out.assign.resize(n);
    out.dist2.resize(n);

    const std::int64_t blocks = (n + kPointBlock - 1) / kPointBlock;
    std::vector<VectorXd> bcounts(static_cast<std::size_t>(blocks));
    std::vector<MatrixXd> bsums(static_cast<std::size_t>(blocks));
    std::vector<char> bchanged(static_cast<std::size_t>(blocks), 0);

    parallel_for(n, kPointBlock, [&](std::int64_t lo, std::int64_t hi) {
        const std::int64_t b = lo / kPointBlock;
        const auto Pb = P.middleCols(lo, hi - lo);
        MatrixXd score(k, hi - lo);  // |mu|^2 - 2 x.mu per centroid
        score.noalias() = -2.0 * (C.transpose() * Pb);
        score.colwise() += cnorm;

        VectorXd counts = VectorXd::Zero(k);
        MatrixXd sums = MatrixXd::Zero(P.rows(), k);
        bool changed = false;
        for (std::int64_t j = 0; j < hi - lo; ++j) {
            int best = 0;
            for (Eigen::Index c = 1; c < k; ++c)
                if (score(c, j) < score(best, j)) best = static_cast<int>(c);
            const std::int64_t i = lo + j;
            out.assign(i) = best;
            out.dist2(i) = (P.col(i) - C.col(best)).squaredNorm();
            counts(best) += 1.0;
            sums.col(best) += P.col(i);
            if (prev && (*prev)(i) != best) changed = true;
        }
        bcounts[static_cast<std::size_t>(b)] = std::move(counts);
        bsums[static_cast<std::size_t>(b)] = std::move(sums);
        bchanged[static_cast<std::size_t>(b)] = changed ? 1 : 0;
    });

    out.counts = VectorXd::Zero(k);
    out.sums = MatrixXd::Zero(P.rows(), k);
    out.changed = prev == nullptr;
    for (std::int64_t b = 0; b < blocks; ++b) {
        out.counts += bcounts[static_cast<std::size_t>(b)];
        out.sums += bsums[static_cast<std::size_t>(b)];
        if (bchanged[static_cast<std::size_t>(b)]) out.changed = true;
    }
}

// Reseeds each empty cluster at the point farthest from its centroid
// (ties to the lowest point index; singleton clusters are never robbed).
void fix_empty_clusters(const Eigen::Ref<const MatrixXd>& P, MatrixXd& C, AssignOut& st) {
    const auto k = C.cols();
    for (Eigen::Index c = 0; c < k; ++c) {
        if (st.counts(c) > 0.0) continue;
        std::int64_t far = -1;
        for (std::int64_t i = 0; i < P.cols(); ++i) {
            if (st.counts(st.assign(i)) <= 1.0) continue;
            if (far < 0 || st.dist2(i) > st.dist2(far)) far = i;
        }
        if (far < 0) continue;  // nothing to steal
        const int old = st.assign(far);
        st.counts(old) -= 1.0;
        st.sums.col(old) -= P.col(far);
        st.assign(far) = static_cast<int>(c);
        st.counts(c) = 1.0;
        st.sums.col(c) = P.col(far);
        st.dist2(far) = 0.0;
        C.col(c) = P.col(far);
    }
}

MatrixXd kmeanspp_init(const Eigen::Ref<const MatrixXd>& P, std::int64_t k,
                       std::mt19937_64& rng) {
    const std::int64_t n = P.cols();
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    MatrixXd C(P.rows(), k);
    std::vector<char> chosen(static_cast<std::size_t>(n), 0);

    std::int64_t first = std::uniform_int_distribution<std::int64_t>(0, n - 1)(rng);
    C.col(0) = P.col(first);
    chosen[static_cast<std::size_t>(first)] = 1;

    VectorXd dmin(n);
    parallel_for(n, kPointBlock, [&](std::int64_t lo, std::int64_t hi) {
        for (std::int64_t i = lo; i < hi; ++i)
            dmin(i) = (P.col(i) - C.col(0)).squaredNorm();
    });

    for (std::int64_t c = 1; c < k; ++c) {
        const double total = dmin.sum();
        std::int64_t pick = -1;
        if (total > 0.0) {
            const double r = unit(rng) * total;
            double acc = 0.0;
            for (std::int64_t i = 0; i < n; ++i) {
                acc += dmin(i);
                if (acc > r) {
                    pick = i;
                    break;
                }
            }
            if (pick < 0) {  // numeric tail: last point with positive weight
                for (std::int64_t i = n - 1; i >= 0; --i)
                    if (dmin(i) > 0.0) {
                        pick = i;
                        break;
                    }
            }
        }
        if (pick < 0) {  // all remaining points duplicate chosen centroids
            for (std::int64_t i = 0; i < n; ++i)
                if (!chosen[static_cast<std::size_t>(i)]) {
                    pick = i;
                    break;
                }
        }
        if (pick < 0) pick = 0;
        chosen[static_cast<std::size_t>(pick)] = 1;
        C.col(c) = P.col(pick);
        parallel_for(n, kPointBlock, [&](std::int64_t lo, std::int64_t hi) {
            for (std::int64_t i = lo; i < hi; ++i)
                dmin(i) = std::min(dmin(i), (P.col(i) - C.col(c)).squaredNorm());
        });
    }
    return C;
}

struct SingleRun {
    MatrixXd centroids;
    VectorXi assign;
    double inertia = 0.0;
    std::vector<double> history;
    int iterations = 0;
};

SingleRun lloyd_run(const Eigen::Ref<const MatrixXd>& P, const ClusterConfig& cfg,
                    std::uint64_t seed) {
    auto rng = make_rng(seed);
    SingleRun run;
    run.centroids = kmeanspp_init(P, cfg.k, rng);

    AssignOut st;
    MatrixXd prev_centroids;
    VectorXi prev_assign;
    double prev_inertia = std::numeric_limits<double>::infinity();

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        assign_step(P, run.centroids, iter > 0 ? &run.assign : nullptr, st);
        fix_empty_clusters(P, run.centroids, st);
        const double inertia = st.dist2.sum();

        if (iter > 0 && inertia > prev_inertia) {
            // floating-point safeguard: keep the previous (better) state
            run.centroids = std::move(prev_centroids);
            run.assign = std::move(prev_assign);
            break;
        }
        run.history.push_back(inertia);
        run.assign = st.assign;
        run.iterations = iter + 1;

        const bool converged =
            !st.changed ||
            (std::isfinite(prev_inertia) && prev_inertia - inertia <= cfg.tol * prev_inertia);
        if (converged) break;

        prev_inertia = inertia;
        prev_centroids = run.centroids;
        prev_assign = run.assign;
        for (Eigen::Index c = 0; c < cfg.k; ++c)
            if (st.counts(c) > 0.0) run.centroids.col(c) = st.sums.col(c) / st.counts(c);
    }
    run.inertia = run.history.empty() ? 0.0 : run.history.back();
    return run;
}

}  // namespace

KMeansResult kmeans(const Eigen::Ref<const Eigen::MatrixXd>& points, const ClusterConfig& cfg) {
    const std::int64_t n = points.cols();
    if (cfg.k < 1) throw ArgumentError("kmeans: k must be positive");
    if (cfg.k > n)
        throw ArgumentError("kmeans: k=" + std::to_string(cfg.k) + " exceeds point count " +
                            std::to_string(n));
    if (cfg.restarts < 1) throw ArgumentError("kmeans: restarts must be positive");
    if (cfg.max_iters < 1) throw ArgumentError("kmeans: max_iters must be positive");

    KMeansResult out;
    if (cfg.k == n) {
        // exact optimum: every point is its own centroid
        out.centroids = points;
        out.assignments.resize(n);
        for (std::int64_t i = 0; i < n; ++i) out.assignments(i) = static_cast<int>(i);
        out.inertia = 0.0;
        out.inertia_history = {0.0};
        return out;
    }

    bool have = false;
    for (int r = 0; r < cfg.restarts; ++r) {
        SingleRun run = lloyd_run(points, cfg, derive_seed(cfg.seed, 0x637ull, r));
        if (!have || run.inertia < out.inertia) {
            have = true;
            out.centroids = std::move(run.centroids);
            out.assignments = std::move(run.assign);
            out.inertia = run.inertia;
            out.inertia_history = std::move(run.history);
            out.iterations = run.iterations;
            out.best_restart = r;
        }
    }
    return out;
}

}  // namespace ccs
