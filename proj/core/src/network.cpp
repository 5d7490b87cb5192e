#include "ccs/network.hpp"

#include <algorithm>
#include <cmath>

#include "ccs/dataset.hpp"
#include "ccs/errors.hpp"
#include "ccs/parallel.hpp"
#include "ccs/rng.hpp"
#include "layer_ops.hpp"

namespace ccs {
namespace {

// Batch width used by the chunked public entry points. Fixed so that the
// same inputs always take the same GEMM shapes (bit-stable re-runs).
constexpr std::int64_t kChunk = 256;

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

}  // namespace

const char* to_string(Activation act) {
    switch (act) {
        case Activation::identity: return "identity";
        case Activation::sigmoid: return "sigmoid";
        case Activation::relu: return "relu";
    }
    return "?";
}

Activation activation_from_string(const std::string& name) {
    if (name == "identity") return Activation::identity;
    if (name == "sigmoid") return Activation::sigmoid;
    if (name == "relu") return Activation::relu;
    throw ArgumentError("unknown activation '" + name + "'");
}

Layer Layer::dense(Eigen::MatrixXd W, Eigen::VectorXd b, Activation act) {
    if (W.rows() != b.size())
        throw ShapeError("dense layer: weight rows != bias size");
    Layer l;
    l.kind = LayerKind::dense;
    l.act = act;
    l.W = std::move(W);
    l.b = std::move(b);
    l.in_size = static_cast<int>(l.W.cols());
    l.out_size = static_cast<int>(l.W.rows());
    return l;
}

Layer Layer::conv2d(int in_ch, int out_ch, int kernel, int stride, int pad, Activation act) {
    if (in_ch < 1 || out_ch < 1 || kernel < 1 || stride < 1 || pad < 0)
        throw ArgumentError("conv2d layer: bad geometry");
    Layer l;
    l.kind = LayerKind::conv2d;
    l.act = act;
    l.in_ch = in_ch;
    l.out_ch = out_ch;
    l.kernel = kernel;
    l.stride = stride;
    l.pad = pad;
    l.W = Eigen::MatrixXd::Zero(out_ch, std::int64_t(in_ch) * kernel * kernel);
    l.b = Eigen::VectorXd::Zero(out_ch);
    return l;
}

Layer Layer::maxpool2d(int pool) {
    if (pool < 1) throw ArgumentError("maxpool2d layer: bad window");
    Layer l;
    l.kind = LayerKind::maxpool2d;
    l.act = Activation::identity;
    l.pool = pool;
    return l;
}

Network::Network(int input_dim, std::vector<Layer> layers)
    : input_dim_(input_dim), layers_(std::move(layers)) {
    if (input_dim_ < 1) throw ArgumentError("network input_dim must be positive");
    resolve_shapes();
}

Network::Network(int in_ch, int in_h, int in_w, std::vector<Layer> layers)
    : input_dim_(in_ch * in_h * in_w), in_ch_(in_ch), in_h_(in_h), in_w_(in_w),
      layers_(std::move(layers)) {
    if (in_ch < 1 || in_h < 1 || in_w < 1)
        throw ArgumentError("network raster shape must be positive");
    resolve_shapes();
}

void Network::resolve_shapes() {
    if (layers_.empty()) throw ArgumentError("network needs at least one layer");
    int c = in_ch_, h = in_h_, w = in_w_;
    int flat = input_dim_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& l = layers_[i];
        switch (l.kind) {
            case LayerKind::dense:
                if (l.W.cols() != flat)
                    throw ShapeError("layer " + std::to_string(i) + ": dense expects " +
                                     std::to_string(l.W.cols()) + " inputs, got " +
                                     std::to_string(flat));
                l.in_size = flat;
                l.out_size = static_cast<int>(l.W.rows());
                flat = l.out_size;
                c = h = w = 0;  // spatial structure consumed
                break;
            case LayerKind::conv2d: {
                if (c == 0)
                    throw ShapeError("layer " + std::to_string(i) +
                                     ": conv2d needs a raster input");
                if (l.in_ch != c)
                    throw ShapeError("layer " + std::to_string(i) + ": conv2d expects " +
                                     std::to_string(l.in_ch) + " channels, got " +
                                     std::to_string(c));
                l.in_h = h;
                l.in_w = w;
                l.out_h = (h + 2 * l.pad - l.kernel) / l.stride + 1;
                l.out_w = (w + 2 * l.pad - l.kernel) / l.stride + 1;
                if (l.out_h < 1 || l.out_w < 1)
                    throw ShapeError("layer " + std::to_string(i) + ": conv2d output collapses");
                l.in_size = c * h * w;
                l.out_size = l.out_ch * l.out_h * l.out_w;
                c = l.out_ch;
                h = l.out_h;
                w = l.out_w;
                flat = l.out_size;
                break;
            }
            case LayerKind::maxpool2d: {
                if (c == 0)
                    throw ShapeError("layer " + std::to_string(i) +
                                     ": maxpool2d needs a raster input");
                l.in_ch = c;
                l.in_h = h;
                l.in_w = w;
                l.out_h = h / l.pool;
                l.out_w = w / l.pool;
                if (l.out_h < 1 || l.out_w < 1)
                    throw ShapeError("layer " + std::to_string(i) + ": pool output collapses");
                l.in_size = c * h * w;
                l.out_size = c * l.out_h * l.out_w;
                h = l.out_h;
                w = l.out_w;
                flat = l.out_size;
                break;
            }
        }
    }
    output_dim_ = flat;
}

Network Network::mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                     Activation hidden_act, std::uint64_t seed) {
    auto rng = make_rng(derive_seed(seed, 0x1417ull));
    std::vector<Layer> layers;
    int in = input_dim;
    auto init_dense = [&](int out, Activation act) {
        const double bound = 1.0 / std::sqrt(double(in));
        std::uniform_real_distribution<double> u(-bound, bound);
        Eigen::MatrixXd W(out, in);
        for (Eigen::Index cc = 0; cc < W.cols(); ++cc)
            for (Eigen::Index rr = 0; rr < W.rows(); ++rr) W(rr, cc) = u(rng);
        Eigen::VectorXd b(out);
        for (Eigen::Index rr = 0; rr < b.size(); ++rr) b(rr) = u(rng);
        layers.push_back(Layer::dense(std::move(W), std::move(b), act));
        in = out;
    };
    for (int width : hidden) {
        if (width < 1) throw ArgumentError("hidden layer width must be positive");
        init_dense(width, hidden_act);
    }
    init_dense(output_dim, Activation::identity);
    return Network(input_dim, std::move(layers));
}

Network Network::conv_net(int in_ch, int in_h, int in_w, int hidden, int output_dim,
                          Activation hidden_act, std::uint64_t seed) {
    auto rng = make_rng(derive_seed(seed, 0xc0417ull));
    auto fill_uniform = [&](Eigen::MatrixXd& W, Eigen::VectorXd& b, double bound) {
        std::uniform_real_distribution<double> u(-bound, bound);
        for (Eigen::Index cc = 0; cc < W.cols(); ++cc)
            for (Eigen::Index rr = 0; rr < W.rows(); ++rr) W(rr, cc) = u(rng);
        for (Eigen::Index rr = 0; rr < b.size(); ++rr) b(rr) = u(rng);
    };

    std::vector<Layer> layers;
    auto add_conv = [&](int ic, int oc) {
        Layer l = Layer::conv2d(ic, oc, 5, 1, 2, hidden_act);
        fill_uniform(l.W, l.b, 1.0 / std::sqrt(double(ic) * 25.0));
        layers.push_back(std::move(l));
        layers.push_back(Layer::maxpool2d(2));
    };
    add_conv(in_ch, 16);
    add_conv(16, 32);

    const int flat = 32 * (in_h / 4) * (in_w / 4);
    {
        Eigen::MatrixXd W(hidden, flat);
        Eigen::VectorXd b(hidden);
        fill_uniform(W, b, 1.0 / std::sqrt(double(flat)));
        layers.push_back(Layer::dense(std::move(W), std::move(b), hidden_act));
    }
    {
        Eigen::MatrixXd W(output_dim, hidden);
        Eigen::VectorXd b(output_dim);
        fill_uniform(W, b, 1.0 / std::sqrt(double(hidden)));
        layers.push_back(Layer::dense(std::move(W), std::move(b), Activation::identity));
    }
    return Network(in_ch, in_h, in_w, std::move(layers));
}

bool Network::has_relu() const {
    for (const Layer& l : layers_)
        if (l.act == Activation::relu) return true;
    return false;
}

std::int64_t Network::parameter_count() const {
    std::int64_t n = 0;
    for (const Layer& l : layers_) n += l.W.size() + l.b.size();
    return n;
}

void Network::check_input(Eigen::Index rows) const {
    if (rows != input_dim_)
        throw ShapeError("input has " + std::to_string(rows) + " rows, network expects " +
                         std::to_string(input_dim_));
}

void Network::check_output_index(int k) const {
    if (k < 0 || k >= output_dim_)
        throw IndexError("output index " + std::to_string(k) + " out of range [0, " +
                         std::to_string(output_dim_) + ")");
}

Eigen::MatrixXd Network::forward_trace(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                       ForwardTrace& trace) const {
    check_input(X.rows());
    trace.x = X;
    trace.a.assign(layers_.size(), MatrixXd());
    trace.pool_arg.assign(layers_.size(), MatrixXi());

    const MatrixXd* cur = &trace.x;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        MatrixXd out;
        switch (l.kind) {
            case LayerKind::dense:
                out.noalias() = l.W * (*cur);
                out.colwise() += l.b;
                detail::apply_activation(l.act, out);
                break;
            case LayerKind::conv2d:
                detail::conv_linear(l, *cur, out);
                for (Eigen::Index s = 0; s < out.cols(); ++s)
                    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                             Eigen::RowMajor>>(out.col(s).data(), l.out_ch,
                                                               l.out_h * l.out_w)
                        .colwise() += l.b;
                detail::apply_activation(l.act, out);
                break;
            case LayerKind::maxpool2d:
                detail::pool_forward(l, *cur, out, trace.pool_arg[li]);
                break;
        }
        trace.a[li] = std::move(out);
        cur = &trace.a[li];
    }
    return trace.a.back();
}

Eigen::MatrixXd Network::forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& X) const {
    check_input(X.rows());
    MatrixXd out(output_dim_, X.cols());
    parallel_for(X.cols(), kChunk, [&](std::int64_t lo, std::int64_t hi) {
        ForwardTrace tr;
        out.middleCols(lo, hi - lo) = forward_trace(X.middleCols(lo, hi - lo), tr);
    });
    return out;
}

Eigen::VectorXd Network::forward(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    ForwardTrace tr;
    return forward_trace(x, tr).col(0);
}

Eigen::MatrixXd Network::input_gradient_trace(const ForwardTrace& trace, int k) const {
    check_output_index(k);
    const Eigen::Index B = trace.x.cols();

    MatrixXd G = MatrixXd::Zero(output_dim_, B);
    G.row(k).setOnes();
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        switch (l.kind) {
            case LayerKind::dense: {
                const MatrixXd U = G.cwiseProduct(detail::act_prime(l.act, trace.a[li]));
                MatrixXd prev;
                prev.noalias() = l.W.transpose() * U;
                G = std::move(prev);
                break;
            }
            case LayerKind::conv2d: {
                const MatrixXd U = G.cwiseProduct(detail::act_prime(l.act, trace.a[li]));
                MatrixXd prev;
                detail::conv_linear_backward(l, U, prev);
                G = std::move(prev);
                break;
            }
            case LayerKind::maxpool2d: {
                MatrixXd prev;
                detail::pool_scatter_add(l, trace.pool_arg[li], G, prev);
                G = std::move(prev);
                break;
            }
        }
    }
    return G;
}

Eigen::MatrixXd Network::input_gradient_batch(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                              int k) const {
    check_input(X.rows());
    check_output_index(k);
    MatrixXd out(input_dim_, X.cols());
    parallel_for(X.cols(), kChunk, [&](std::int64_t lo, std::int64_t hi) {
        ForwardTrace tr;
        forward_trace(X.middleCols(lo, hi - lo), tr);
        out.middleCols(lo, hi - lo) = input_gradient_trace(tr, k);
    });
    return out;
}

Eigen::VectorXd Network::input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x,
                                        int k) const {
    ForwardTrace tr;
    forward_trace(x, tr);
    return input_gradient_trace(tr, k).col(0);
}

Eigen::MatrixXd Network::hvp_trace(const ForwardTrace& trace, int k,
                                   const Eigen::Ref<const Eigen::MatrixXd>& V) const {
    check_output_index(k);
    check_input(V.rows());
    const Eigen::Index B = trace.x.cols();
    if (V.cols() != B) throw ShapeError("hvp: direction batch does not match trace batch");

    // Forward sweep: tangents of pre-activations (zdot) and activations.
    std::vector<MatrixXd> zdot(layers_.size());
    MatrixXd T = V;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
        const Layer& l = layers_[li];
        switch (l.kind) {
            case LayerKind::dense:
                zdot[li].noalias() = l.W * T;
                T = zdot[li].cwiseProduct(detail::act_prime(l.act, trace.a[li]));
                break;
            case LayerKind::conv2d:
                detail::conv_linear(l, T, zdot[li]);
                T = zdot[li].cwiseProduct(detail::act_prime(l.act, trace.a[li]));
                break;
            case LayerKind::maxpool2d: {
                MatrixXd tt;
                detail::pool_gather(l, trace.pool_arg[li], T, tt);
                T = std::move(tt);
                break;
            }
        }
    }

    // Reverse sweep carrying (gradient, tangent-of-gradient) pairs.
    MatrixXd G = MatrixXd::Zero(output_dim_, B);
    G.row(k).setOnes();
    MatrixXd Gd = MatrixXd::Zero(output_dim_, B);
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const Layer& l = layers_[li];
        switch (l.kind) {
            case LayerKind::dense:
            case LayerKind::conv2d: {
                const MatrixXd p1 = detail::act_prime(l.act, trace.a[li]);
                const MatrixXd U = G.cwiseProduct(p1);
                MatrixXd Ud = Gd.cwiseProduct(p1);
                if (l.act == Activation::sigmoid)
                    Ud += G.cwiseProduct(
                        detail::act_second(l.act, trace.a[li]).cwiseProduct(zdot[li]));
                MatrixXd prev, prevd;
                if (l.kind == LayerKind::dense) {
                    prev.noalias() = l.W.transpose() * U;
                    prevd.noalias() = l.W.transpose() * Ud;
                } else {
                    detail::conv_linear_backward(l, U, prev);
                    detail::conv_linear_backward(l, Ud, prevd);
                }
                G = std::move(prev);
                Gd = std::move(prevd);
                break;
            }
            case LayerKind::maxpool2d: {
                MatrixXd prev, prevd;
                detail::pool_scatter_add(l, trace.pool_arg[li], G, prev);
                detail::pool_scatter_add(l, trace.pool_arg[li], Gd, prevd);
                G = std::move(prev);
                Gd = std::move(prevd);
                break;
            }
        }
    }
    return Gd;
}

Eigen::VectorXd Network::hvp(const Eigen::Ref<const Eigen::VectorXd>& x, int k,
                             const Eigen::Ref<const Eigen::VectorXd>& v) const {
    ForwardTrace tr;
    forward_trace(x, tr);
    return hvp_trace(tr, k, v).col(0);
}

std::vector<int> argmax_labels(const Eigen::MatrixXd& logits) {
    std::vector<int> out(static_cast<std::size_t>(logits.cols()));
    for (Eigen::Index s = 0; s < logits.cols(); ++s) {
        int best = 0;
        for (Eigen::Index r = 1; r < logits.rows(); ++r)
            if (logits(r, s) > logits(best, s)) best = static_cast<int>(r);
        out[static_cast<std::size_t>(s)] = best;
    }
    return out;
}

double accuracy(const Network& net, const Dataset& data) {
    if (data.size() == 0) return 0.0;
    const auto pred = argmax_labels(net.forward_batch(data.inputs));
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == data.labels[i]) ++hits;
    return double(hits) / double(data.size());
}

}  // namespace ccs
