#pragma once

#include <cstdint>
#include <vector>

#include "ccs/ccs_model.hpp"
#include "ccs/kmeans.hpp"

namespace ccs {

struct Dataset;

// Per-output clustering outcome: the K centroid supports (re-materialized as
// planes), point assignments, and the winning restart's inertia trace.
struct OutputReduction {
    CCSModel::OutputPlanes centroids;
    Eigen::VectorXi assignments;
    double inertia = 0.0;
    std::vector<double> inertia_history;
    int best_restart = 0;
};

struct ClusterReduction {
    std::vector<OutputReduction> outputs;
    double total_inertia() const;
};

struct ReduceResult {
    ClusterReduction reduction;
    CCSModel model;  // reduced model sharing the centroid planes
};

// K-means over plane descriptors [gradient ; f-offset ; anchor] per output,
// centroids split back into supports (value = offset + gradient.anchor), the
// convex and concave sides regenerated from the same centroid set. k equal to
// the support count short-circuits to the identity reduction (original
// supports, bit-exact).
ReduceResult reduce_ccs(const CCSModel& model, const ClusterConfig& cfg);

struct SweepRow {
    std::int64_t k = 0;
    int restart = 0;
    double accuracy = 0.0;
    double inertia = 0.0;  // summed over outputs
};

struct SweepAggregate {
    std::int64_t k = 0;
    double mean_acc = 0.0;
    double std_acc = 0.0;  // population standard deviation
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepAggregate> aggregate;
    // per k, the restart index with the lowest total inertia
    std::vector<std::pair<std::int64_t, int>> best_restart;
};

// For each k: `cfg.restarts` independent clusterings (derived seeds), each
// evaluated as a reduced model on `data`; reports per-restart rows plus
// mean/std per k. When keep_best is non-null it receives the minimum-inertia
// reduced model per k.
SweepResult sweep_k(const CCSModel& model, const Dataset& data,
                    const std::vector<std::int64_t>& ks, const ClusterConfig& cfg,
                    std::vector<std::pair<std::int64_t, CCSModel>>* keep_best = nullptr);

}  // namespace ccs
