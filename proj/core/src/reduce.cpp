#include "ccs/reduce.hpp"

#include <cmath>

#include "ccs/dataset.hpp"
#include "ccs/errors.hpp"
#include "ccs/rng.hpp"

namespace ccs {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// descriptor layout per column: [gradient(d) ; f-offset(1) ; anchor(d)]
MatrixXd embed_planes(const CCSModel& model, int k) {
    const auto& p = model.planes(k);
    const Eigen::Index d = p.gradients.rows();
    const Eigen::Index n = p.gradients.cols();
    MatrixXd E(2 * d + 1, n);
    E.topRows(d) = p.gradients;
    E.row(d) = model.offsets(k).transpose();
    E.bottomRows(d) = *p.anchors;
    return E;
}

CCSModel::OutputPlanes unembed_centroids(const MatrixXd& C) {
    const Eigen::Index d = (C.rows() - 1) / 2;
    CCSModel::OutputPlanes out;
    auto anchors = std::make_shared<MatrixXd>(C.bottomRows(d));
    out.gradients = C.topRows(d);
    out.values.resize(C.cols());
    for (Eigen::Index i = 0; i < C.cols(); ++i)
        out.values(i) = C(d, i) + out.gradients.col(i).dot(anchors->col(i));
    out.anchors = std::move(anchors);
    return out;
}

OutputReduction reduce_one_output(const CCSModel& model, int k, const ClusterConfig& cfg) {
    const auto& p = model.planes(k);
    const std::int64_t n = p.anchors->cols();
    OutputReduction red;

    if (cfg.k == n) {
        // identity reduction: keep the original supports verbatim
        red.centroids = p;
        red.assignments.resize(n);
        for (std::int64_t i = 0; i < n; ++i) red.assignments(i) = static_cast<int>(i);
        red.inertia = 0.0;
        red.inertia_history = {0.0};
        return red;
    }

    MatrixXd E = embed_planes(model, k);

    VectorXd mean, scale;
    if (cfg.normalize) {
        mean = E.rowwise().mean();
        E.colwise() -= mean;
        scale = (E.rowwise().squaredNorm() / double(n)).cwiseSqrt();
        for (Eigen::Index r = 0; r < E.rows(); ++r)
            if (scale(r) > 0.0) E.row(r) /= scale(r);
    }

    KMeansResult km = kmeans(E, cfg);

    MatrixXd C = std::move(km.centroids);
    if (cfg.normalize) {
        for (Eigen::Index r = 0; r < C.rows(); ++r)
            if (scale(r) > 0.0) C.row(r) *= scale(r);
        C.colwise() += mean;
    }

    red.centroids = unembed_centroids(C);
    red.assignments = std::move(km.assignments);
    red.inertia = km.inertia;
    red.inertia_history = std::move(km.inertia_history);
    red.best_restart = km.best_restart;
    return red;
}

}  // namespace

double ClusterReduction::total_inertia() const {
    double s = 0.0;
    for (const auto& o : outputs) s += o.inertia;
    return s;
}

ReduceResult reduce_ccs(const CCSModel& model, const ClusterConfig& cfg) {
    for (int k = 0; k < model.output_dim(); ++k)
        if (cfg.k > model.support_count(k))
            throw ArgumentError("reduce_ccs: k=" + std::to_string(cfg.k) +
                                " exceeds support count " +
                                std::to_string(model.support_count(k)) + " of output " +
                                std::to_string(k));

    ReduceResult out;
    std::vector<CCSModel::OutputPlanes> planes;
    planes.reserve(static_cast<std::size_t>(model.output_dim()));
    for (int k = 0; k < model.output_dim(); ++k) {
        ClusterConfig per = cfg;
        per.seed = derive_seed(cfg.seed, 0x8edull, static_cast<std::uint64_t>(k));
        out.reduction.outputs.push_back(reduce_one_output(model, k, per));
        planes.push_back(out.reduction.outputs.back().centroids);
    }
    out.model = CCSModel(model.input_dim(), model.c(), std::move(planes));
    return out;
}

SweepResult sweep_k(const CCSModel& model, const Dataset& data,
                    const std::vector<std::int64_t>& ks, const ClusterConfig& cfg,
                    std::vector<std::pair<std::int64_t, CCSModel>>* keep_best) {
    if (ks.empty()) throw ArgumentError("sweep_k: empty k list");

    SweepResult out;
    for (std::int64_t k : ks) {
        double best_inertia = 0.0;
        int best_restart = -1;
        CCSModel best_model;
        double acc_sum = 0.0, acc_sq = 0.0;

        for (int r = 0; r < cfg.restarts; ++r) {
            ClusterConfig per = cfg;
            per.k = k;
            per.restarts = 1;
            per.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(k),
                                   static_cast<std::uint64_t>(r));
            ReduceResult red = reduce_ccs(model, per);
            const double acc = ccs_accuracy(red.model, data);
            const double inertia = red.reduction.total_inertia();
            out.rows.push_back(SweepRow{k, r, acc, inertia});
            acc_sum += acc;
            acc_sq += acc * acc;
            if (best_restart < 0 || inertia < best_inertia) {
                best_restart = r;
                best_inertia = inertia;
                if (keep_best) best_model = std::move(red.model);
            }
        }

        const double n = double(cfg.restarts);
        const double mean = acc_sum / n;
        const double var = std::max(0.0, acc_sq / n - mean * mean);
        out.aggregate.push_back(SweepAggregate{k, mean, std::sqrt(var)});
        out.best_restart.emplace_back(k, best_restart);
        if (keep_best) keep_best->emplace_back(k, std::move(best_model));
    }
    return out;
}

}  // namespace ccs
