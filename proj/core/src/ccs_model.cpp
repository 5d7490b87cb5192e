#include "ccs/ccs_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <numeric>

#include "ccs/dataset.hpp"
#include "ccs/errors.hpp"
#include "ccs/parallel.hpp"
#include "ccs/rng.hpp"
#include "ccs/spectral.hpp"

namespace ccs {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr std::int64_t kAnchorBlock = 256;
constexpr std::int64_t kQueryBlock = 256;
constexpr double kRadiusStopFactor = 1e-3;

ForwardTrace slice_trace(const ForwardTrace& tr, const std::vector<Eigen::Index>& cols) {
    ForwardTrace s;
    const auto n = static_cast<Eigen::Index>(cols.size());
    s.x.resize(tr.x.rows(), n);
    for (Eigen::Index i = 0; i < n; ++i) s.x.col(i) = tr.x.col(cols[static_cast<std::size_t>(i)]);
    s.a.resize(tr.a.size());
    s.pool_arg.resize(tr.pool_arg.size());
    for (std::size_t l = 0; l < tr.a.size(); ++l) {
        s.a[l].resize(tr.a[l].rows(), n);
        for (Eigen::Index i = 0; i < n; ++i)
            s.a[l].col(i) = tr.a[l].col(cols[static_cast<std::size_t>(i)]);
        if (tr.pool_arg[l].size() > 0) {
            s.pool_arg[l].resize(tr.pool_arg[l].rows(), n);
            for (Eigen::Index i = 0; i < n; ++i)
                s.pool_arg[l].col(i) = tr.pool_arg[l].col(cols[static_cast<std::size_t>(i)]);
        }
    }
    return s;
}

// Hessian spectral radius for every anchor of a traced block, output k.
// Power iteration on H^2 (two HVPs per step) so near-symmetric +- spectra
// converge on magnitude; converged columns are compacted away each step.
void block_radii(const Network& net, const ForwardTrace& block, int k,
                 const CEstimateOptions& opts, std::int64_t global_offset, double* rho_out) {
    const Eigen::Index B = block.x.cols();
    const Eigen::Index d = block.x.rows();

    MatrixXd V(d, B);
    for (Eigen::Index j = 0; j < B; ++j) {
        auto rng = make_rng(derive_seed(opts.seed, 0xadc0 + static_cast<std::uint64_t>(k),
                                        static_cast<std::uint64_t>(global_offset + j)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (Eigen::Index r = 0; r < d; ++r) V(r, j) = gauss(rng);
        const double n = V.col(j).norm();
        if (n > 0.0) V.col(j) /= n;
        else V(0, j) = 1.0;
    }

    std::vector<Eigen::Index> work(static_cast<std::size_t>(B));
    std::iota(work.begin(), work.end(), 0);
    ForwardTrace sliced;
    const ForwardTrace* cur = &block;

    VectorXd sigma_prev = VectorXd::Constant(B, -1.0);
    for (int iter = 0; iter < opts.max_iters && !work.empty(); ++iter) {
        const MatrixXd Y = net.hvp_trace(*cur, k, V);
        if (!Y.allFinite()) throw NumericError("hvp produced non-finite values");
        const MatrixXd Y2 = net.hvp_trace(*cur, k, Y);
        if (!Y2.allFinite()) throw NumericError("hvp produced non-finite values");

        std::vector<Eigen::Index> keep;
        keep.reserve(work.size());
        for (std::size_t j = 0; j < work.size(); ++j) {
            const auto col = static_cast<Eigen::Index>(j);
            const double sigma = Y.col(col).norm();
            const double n2 = Y2.col(col).norm();
            bool done = false;
            if (sigma == 0.0 || n2 == 0.0) {
                rho_out[work[j]] = sigma;
                done = true;
            } else {
                const double prev = sigma_prev(work[j]);
                if (prev >= 0.0 &&
                    std::abs(sigma - prev) <=
                        kRadiusStopFactor * opts.tol * std::max(sigma, 1e-30)) {
                    rho_out[work[j]] = sigma;
                    done = true;
                } else {
                    sigma_prev(work[j]) = sigma;
                    V.col(col) = Y2.col(col) / n2;
                }
            }
            if (!done) keep.push_back(work[j]);
        }

        if (iter + 1 >= opts.max_iters) {
            // budget exhausted; report the last estimates
            for (std::size_t j = 0, c = 0; j < work.size(); ++j) {
                bool kept = c < keep.size() && keep[c] == work[j];
                if (kept) {
                    rho_out[work[j]] = std::max(0.0, sigma_prev(work[j]));
                    ++c;
                }
            }
            break;
        }
        if (keep.size() == work.size()) continue;

        // compact the active set
        if (keep.empty()) break;
        std::vector<Eigen::Index> keep_cols;
        keep_cols.reserve(keep.size());
        for (std::size_t j = 0, c = 0; j < work.size(); ++j) {
            if (c < keep.size() && keep[c] == work[j]) {
                keep_cols.push_back(static_cast<Eigen::Index>(j));
                ++c;
            }
        }
        MatrixXd Vn(d, static_cast<Eigen::Index>(keep_cols.size()));
        for (std::size_t j = 0; j < keep_cols.size(); ++j)
            Vn.col(static_cast<Eigen::Index>(j)) = V.col(keep_cols[j]);
        V = std::move(Vn);
        sliced = slice_trace(*cur, keep_cols);
        cur = &sliced;
        work = std::move(keep);
    }
}

MatrixXd estimate_radii(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                        const std::vector<int>& ks, const CEstimateOptions& opts) {
    if (anchors.cols() == 0) throw ArgumentError("estimate_c: empty anchor list");
    if (anchors.rows() != net.input_dim())
        throw ShapeError("estimate_c: anchor dim " + std::to_string(anchors.rows()) +
                         " vs network dim " + std::to_string(net.input_dim()));
    MatrixXd rho(static_cast<Eigen::Index>(ks.size()), anchors.cols());
    parallel_for(anchors.cols(), kAnchorBlock, [&](std::int64_t lo, std::int64_t hi) {
        ForwardTrace tr;
        net.forward_trace(anchors.middleCols(lo, hi - lo), tr);
        std::vector<double> buf(static_cast<std::size_t>(hi - lo));
        for (std::size_t ki = 0; ki < ks.size(); ++ki) {
            block_radii(net, tr, ks[ki], opts, lo, buf.data());
            for (std::int64_t j = 0; j < hi - lo; ++j)
                rho(static_cast<Eigen::Index>(ki), lo + j) = buf[static_cast<std::size_t>(j)];
        }
    });
    return rho;
}

}  // namespace

double estimate_c(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& anchors, int k,
                  const CEstimateOptions& opts) {
    if (k < 0 || k >= net.output_dim())
        throw IndexError("estimate_c: output index out of range");
    const MatrixXd rho = estimate_radii(net, anchors, {k}, opts);
    return (1.0 + opts.margin) * rho.row(0).maxCoeff();
}

Eigen::VectorXd estimate_c_all(const Network& net,
                               const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                               const CEstimateOptions& opts, Eigen::MatrixXd* rho_out) {
    std::vector<int> ks(static_cast<std::size_t>(net.output_dim()));
    std::iota(ks.begin(), ks.end(), 0);
    const MatrixXd rho = estimate_radii(net, anchors, ks, opts);
    VectorXd c(net.output_dim());
    for (int k = 0; k < net.output_dim(); ++k)
        c(k) = (1.0 + opts.margin) * rho.row(k).maxCoeff();
    if (rho_out) *rho_out = rho;
    return c;
}

CCSModel::CCSModel(int input_dim, Eigen::VectorXd c, std::vector<OutputPlanes> planes)
    : input_dim_(input_dim), c_(std::move(c)), planes_(std::move(planes)) {
    if (static_cast<std::size_t>(c_.size()) != planes_.size())
        throw ShapeError("CCSModel: c size does not match plane sets");
    if (planes_.empty()) throw ArgumentError("CCSModel: no outputs");
    offsets_.resize(planes_.size());
    anchor_sq_.resize(planes_.size());
    for (std::size_t k = 0; k < planes_.size(); ++k) {
        const OutputPlanes& p = planes_[k];
        if (c_(static_cast<Eigen::Index>(k)) < 0.0)
            throw ArgumentError("CCSModel: negative curvature constant");
        if (!p.anchors || p.anchors->cols() == 0)
            throw ArgumentError("CCSModel: empty support list for output " + std::to_string(k));
        if (p.anchors->rows() != input_dim_ || p.gradients.rows() != input_dim_)
            throw ShapeError("CCSModel: support dim mismatch");
        if (p.gradients.cols() != p.anchors->cols() || p.values.size() != p.anchors->cols())
            throw ShapeError("CCSModel: support count mismatch");
        offsets_[k] = p.values -
                      (p.gradients.array() * p.anchors->array()).colwise().sum().matrix().transpose();
        anchor_sq_[k] = p.anchors->colwise().squaredNorm().transpose();
    }
}

std::int64_t CCSModel::support_count(int k) const { return planes(k).anchors->cols(); }

const CCSModel::OutputPlanes& CCSModel::planes(int k) const {
    if (k < 0 || k >= output_dim()) throw IndexError("CCSModel: output index out of range");
    return planes_[static_cast<std::size_t>(k)];
}

SampledSupport CCSModel::support(int k, std::int64_t i) const {
    const OutputPlanes& p = planes(k);
    if (i < 0 || i >= p.anchors->cols()) throw IndexError("CCSModel: support index out of range");
    return SampledSupport{p.anchors->col(i), p.values(i), p.gradients.col(i)};
}

const Eigen::VectorXd& CCSModel::offsets(int k) const {
    planes(k);
    return offsets_[static_cast<std::size_t>(k)];
}

const Eigen::VectorXd& CCSModel::anchor_sq(int k) const {
    planes(k);
    return anchor_sq_[static_cast<std::size_t>(k)];
}

Eigen::MatrixXd CCSModel::evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    if (X.rows() != input_dim_)
        throw ShapeError("CCSModel: query dim " + std::to_string(X.rows()) + " vs model dim " +
                         std::to_string(input_dim_));
    MatrixXd out(output_dim(), X.cols());
    parallel_for(X.cols(), kQueryBlock, [&](std::int64_t lo, std::int64_t hi) {
        const auto Q = X.middleCols(lo, hi - lo);
        const Eigen::Index bw = hi - lo;
        // anchor-dot-query products, shared between outputs with the same
        // anchor matrix (plane sampling shares anchors across outputs)
        std::map<const MatrixXd*, MatrixXd> dcache;
        MatrixXd U;
        VectorXd fp, qp;
        for (int k = 0; k < output_dim(); ++k) {
            const OutputPlanes& p = planes_[static_cast<std::size_t>(k)];
            MatrixXd& D = dcache[p.anchors.get()];
            if (D.size() == 0) D.noalias() = p.anchors->transpose() * Q;
            U.noalias() = p.gradients.transpose() * Q;
            const double ck = c_(k);
            const VectorXd& off = offsets_[static_cast<std::size_t>(k)];
            const VectorXd& asq = anchor_sq_[static_cast<std::size_t>(k)];
            for (Eigen::Index b = 0; b < bw; ++b) {
                // f-part and quadratic part accumulate separately and only
                // combine per plane at the end
                fp = off + U.col(b);
                qp = 2.0 * D.col(b) - asq;
                const double mx = (fp + ck * qp).maxCoeff();
                const double mn = (fp - ck * qp).minCoeff();
                out(k, lo + b) = 0.5 * (mx + mn);
            }
        }
    });
    return out;
}

Eigen::VectorXd CCSModel::evaluate(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    return evaluate_batch(Eigen::MatrixXd(x)).col(0);
}

Eigen::VectorXd CCSModel::evaluate_detailed(const Eigen::Ref<const Eigen::VectorXd>& x,
                                            std::vector<std::int64_t>* convex_arg,
                                            std::vector<std::int64_t>* concave_arg) const {
    if (x.size() != input_dim_) throw ShapeError("CCSModel: query dim mismatch");
    VectorXd out(output_dim());
    if (convex_arg) convex_arg->assign(static_cast<std::size_t>(output_dim()), 0);
    if (concave_arg) concave_arg->assign(static_cast<std::size_t>(output_dim()), 0);
    for (int k = 0; k < output_dim(); ++k) {
        const OutputPlanes& p = planes_[static_cast<std::size_t>(k)];
        const VectorXd u = p.gradients.transpose() * x;
        const VectorXd dq = p.anchors->transpose() * x;
        const VectorXd& off = offsets_[static_cast<std::size_t>(k)];
        const VectorXd& asq = anchor_sq_[static_cast<std::size_t>(k)];
        const double ck = c_(k);
        double best_max = 0.0, best_min = 0.0;
        std::int64_t arg_max = -1, arg_min = -1;
        for (Eigen::Index i = 0; i < p.anchors->cols(); ++i) {
            const double fpart = off(i) + u(i);
            const double qpart = 2.0 * dq(i) - asq(i);
            const double cv = fpart + ck * qpart;
            const double cc = fpart - ck * qpart;
            if (arg_max < 0 || cv > best_max) {  // strict: ties keep lowest index
                best_max = cv;
                arg_max = i;
            }
            if (arg_min < 0 || cc < best_min) {
                best_min = cc;
                arg_min = i;
            }
        }
        out(k) = 0.5 * (best_max + best_min);
        if (convex_arg) (*convex_arg)[static_cast<std::size_t>(k)] = arg_max;
        if (concave_arg) (*concave_arg)[static_cast<std::size_t>(k)] = arg_min;
    }
    return out;
}

CCSModel sample_planes(const Network& net, const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                       const Eigen::VectorXd& c) {
    if (anchors.cols() == 0) throw ArgumentError("sample_planes: empty anchor list");
    if (anchors.rows() != net.input_dim())
        throw ShapeError("sample_planes: anchor dim " + std::to_string(anchors.rows()) +
                         " vs network dim " + std::to_string(net.input_dim()));
    if (c.size() != net.output_dim())
        throw ShapeError("sample_planes: c has " + std::to_string(c.size()) +
                         " entries, network has " + std::to_string(net.output_dim()) +
                         " outputs");
    for (Eigen::Index k = 0; k < c.size(); ++k)
        if (c(k) < 0.0) throw ArgumentError("sample_planes: negative curvature constant");

    const auto shared_anchors = std::make_shared<const MatrixXd>(anchors);
    const MatrixXd logits = net.forward_batch(anchors);

    std::vector<CCSModel::OutputPlanes> planes(static_cast<std::size_t>(net.output_dim()));
    for (int k = 0; k < net.output_dim(); ++k) {
        CCSModel::OutputPlanes& p = planes[static_cast<std::size_t>(k)];
        p.anchors = shared_anchors;
        p.values = logits.row(k).transpose();
        p.gradients = net.input_gradient_batch(anchors, k);
    }
    return CCSModel(net.input_dim(), c, std::move(planes));
}

double ccs_accuracy(const CCSModel& model, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    const auto pred = argmax_labels(model.evaluate_batch(data.inputs));
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == data.labels[i]) ++hits;
    return double(hits) / double(data.size());
}

AuditReport audit_validity(const CCSModel& model, const Network& net,
                           const Eigen::Ref<const Eigen::MatrixXd>& anchors,
                           const AuditOptions& opts) {
    AuditReport report;
    report.applicable = !net.has_relu();
    if (!report.applicable) return report;

    CEstimateOptions screen;
    screen.tol = opts.screen_tol;
    screen.max_iters = opts.max_iters;
    screen.seed = derive_seed(opts.seed, 0xa0d17ull);

    std::vector<int> ks(static_cast<std::size_t>(net.output_dim()));
    std::iota(ks.begin(), ks.end(), 0);
    const MatrixXd rho = estimate_radii(net, anchors, ks, screen);

    for (int k = 0; k < net.output_dim(); ++k) {
        OutputAudit oa;
        oa.output = k;
        oa.c = model.c()(k);
        oa.max_rho = rho.row(k).maxCoeff();

        // exact checks: every anchor whose screened radius crowds c, plus the
        // worst few regardless
        std::vector<std::int64_t> order(static_cast<std::size_t>(anchors.cols()));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
            return rho(k, a) > rho(k, b);
        });
        const double crowd = oa.c / (1.0 + 5e-4);
        std::vector<std::int64_t> check;
        for (std::int64_t i : order) {
            if (rho(k, i) > crowd ||
                check.size() < static_cast<std::size_t>(std::min<std::int64_t>(
                                    opts.exact_top, anchors.cols())))
                check.push_back(i);
            else
                break;
        }
        oa.candidates = static_cast<std::int64_t>(check.size());

        double worst = 0.0;
        bool ok = true;
        PowerIterOptions popts;
        popts.tol = opts.exact_tol;
        popts.max_iters = opts.max_iters;
        for (std::int64_t i : check) {
            ForwardTrace tr;
            net.forward_trace(anchors.col(i), tr);
            const auto apply = [&](const VectorXd& v) {
                return VectorXd(net.hvp_trace(tr, k, v).col(0));
            };
            popts.seed = derive_seed(opts.seed, 0xe8ull + static_cast<std::uint64_t>(k),
                                     static_cast<std::uint64_t>(i));
            const auto ev = extreme_eigenvalues(apply, net.input_dim(), popts);
            worst = std::min(worst, ev.lambda_min);
            if (ev.lambda_min < -oa.c * (1.0 + 1e-9) - 1e-12) ok = false;
        }
        oa.worst_lambda_min = worst;
        oa.pass = ok;
        report.outputs.push_back(oa);
    }
    return report;
}

bool AuditReport::pass() const {
    if (!applicable) return false;
    for (const auto& oa : outputs)
        if (!oa.pass) return false;
    return true;
}

namespace {

constexpr char kCcsMagic[4] = {'C', 'C', 'S', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated CCS file " + path);
    return v;
}

}  // namespace

void CCSModel::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kCcsMagic, 4);
    write_pod<std::uint32_t>(out, 1);  // version
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(input_dim_));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(output_dim()));
    for (int k = 0; k < output_dim(); ++k)
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(support_count(k)));
    out.write(reinterpret_cast<const char*>(c_.data()),
              static_cast<std::streamsize>(sizeof(double)) * c_.size());
    for (int k = 0; k < output_dim(); ++k) {
        const OutputPlanes& p = planes_[static_cast<std::size_t>(k)];
        for (Eigen::Index i = 0; i < p.anchors->cols(); ++i) {
            out.write(reinterpret_cast<const char*>(p.anchors->col(i).data()),
                      static_cast<std::streamsize>(sizeof(double)) * input_dim_);
            write_pod<double>(out, p.values(i));
            out.write(reinterpret_cast<const char*>(p.gradients.col(i).data()),
                      static_cast<std::streamsize>(sizeof(double)) * input_dim_);
        }
    }
    if (!out) throw IoError("write failure on " + path);
}

CCSModel CCSModel::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCcsMagic, 4) != 0)
        throw FormatError("bad CCS magic in " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != 1) throw FormatError("unsupported CCS version " + std::to_string(version));
    const auto input_dim = read_pod<std::uint32_t>(in, path);
    const auto output_dim = read_pod<std::uint32_t>(in, path);
    std::vector<std::uint64_t> counts(output_dim);
    for (auto& n : counts) n = read_pod<std::uint64_t>(in, path);
    VectorXd c(output_dim);
    in.read(reinterpret_cast<char*>(c.data()),
            static_cast<std::streamsize>(sizeof(double)) * c.size());
    if (!in) throw FormatError("truncated CCS file " + path);

    std::vector<OutputPlanes> planes(output_dim);
    for (std::uint32_t k = 0; k < output_dim; ++k) {
        const auto n = static_cast<Eigen::Index>(counts[k]);
        auto anchors = std::make_shared<MatrixXd>(input_dim, n);
        OutputPlanes& p = planes[k];
        p.values.resize(n);
        p.gradients.resize(input_dim, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            in.read(reinterpret_cast<char*>(anchors->col(i).data()),
                    static_cast<std::streamsize>(sizeof(double)) * input_dim);
            p.values(i) = read_pod<double>(in, path);
            in.read(reinterpret_cast<char*>(p.gradients.col(i).data()),
                    static_cast<std::streamsize>(sizeof(double)) * input_dim);
        }
        if (!in) throw FormatError("truncated CCS file " + path);
        p.anchors = std::move(anchors);
    }
    return CCSModel(static_cast<int>(input_dim), std::move(c), std::move(planes));
}

}  // namespace ccs
