#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ccs/network.hpp"

namespace ccs {

struct Dataset;

// One tangent plane sample: the anchor point with the network value and
// input-gradient of one output at that point.
struct SampledSupport {
    Eigen::VectorXd anchor;
    double value = 0.0;
    Eigen::VectorXd gradient;
};

struct CEstimateOptions {
    double tol = 1e-6;
    int max_iters = 1000;
    std::uint64_t seed = 0;
    double margin = 1e-3;  // (1+margin) safety factor on the estimated extreme
};

// Per-output curvature constant: (1+margin) * max(|min lambda_min|, |max
// lambda_max|) over the anchors' Hessians, which equals (1+margin) times the
// largest Hessian spectral radius over anchors. Exactly zero only when every
// anchor Hessian vanishes.
double estimate_c(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& anchors, int k,
                  const CEstimateOptions& opts = {});

// All outputs at once, sharing forward traces across outputs. When rho_out is
// given it receives the per-anchor Hessian spectral radii (output_dim x N).
Eigen::VectorXd estimate_c_all(const Network& net,
                               const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                               const CEstimateOptions& opts = {},
                               Eigen::MatrixXd* rho_out = nullptr);

// The convex-concave spline form of a network: per output, tangent planes of
// f_k(x) +- c_k|x|^2 sampled at anchor points, evaluated as
// 0.5 * (max over convex planes + min over concave planes).
class CCSModel {
public:
    // Planes of one output. Anchors may be shared between outputs (plane
    // sampling stores each anchor set once); values/gradients are per output.
    struct OutputPlanes {
        std::shared_ptr<const Eigen::MatrixXd> anchors;  // d x N, column per anchor
        Eigen::VectorXd values;                          // N
        Eigen::MatrixXd gradients;                       // d x N
    };

    CCSModel() = default;
    CCSModel(int input_dim, Eigen::VectorXd c, std::vector<OutputPlanes> planes);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return static_cast<int>(c_.size()); }
    const Eigen::VectorXd& c() const { return c_; }
    std::int64_t support_count(int k) const;
    const OutputPlanes& planes(int k) const;
    SampledSupport support(int k, std::int64_t i) const;

    // f-offsets (value - gradient.anchor) and squared anchor norms, cached at
    // construction for the evaluation path.
    const Eigen::VectorXd& offsets(int k) const;
    const Eigen::VectorXd& anchor_sq(int k) const;

    Eigen::MatrixXd evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& X) const;
    Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const;

    // Single-point evaluation reporting the winning plane per side (argmax
    // ties resolved to the lowest plane index).
    Eigen::VectorXd evaluate_detailed(const Eigen::Ref<const Eigen::VectorXd>& x,
                                      std::vector<std::int64_t>* convex_arg,
                                      std::vector<std::int64_t>* concave_arg) const;

    void save(const std::string& path) const;
    static CCSModel load(const std::string& path);

private:
    int input_dim_ = 0;
    Eigen::VectorXd c_;
    std::vector<OutputPlanes> planes_;
    std::vector<Eigen::VectorXd> offsets_;
    std::vector<Eigen::VectorXd> anchor_sq_;
};

// One tangent plane per anchor per output; no deduplication.
CCSModel sample_planes(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                       const Eigen::VectorXd& c);

// Accuracy of the CCS argmax prediction (ties to lowest index).
double ccs_accuracy(const CCSModel& model, const Dataset& data);

// Checks that the stored c dominates the Hessian curvature at the model's
// anchors: a cheap spectral-radius screen over all anchors plus exact
// lambda_min solves on the worst candidates.
struct AuditOptions {
    double screen_tol = 1e-3;  // tolerance of the per-anchor radius screen
    double exact_tol = 1e-6;
    int max_iters = 1000;
    int exact_top = 8;  // always confirm this many worst anchors exactly
    std::uint64_t seed = 0;
};

struct OutputAudit {
    int output = 0;
    double c = 0.0;
    double max_rho = 0.0;           // largest screened spectral radius
    double worst_lambda_min = 0.0;  // most negative exactly-solved eigenvalue
    std::int64_t candidates = 0;    // anchors needing an exact solve
    bool pass = false;
};

struct AuditReport {
    bool applicable = false;  // false for piecewise-linear (ReLU) networks
    std::vector<OutputAudit> outputs;
    bool pass() const;
};

AuditReport audit_validity(const CCSModel& model, const Network& net,
                           const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                           const AuditOptions& opts = {});

}  // namespace ccs
