#include "ccs/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ccs/errors.hpp"
#include "ccs/rng.hpp"
#include "layer_ops.hpp"

namespace ccs {
namespace {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

// Training-time caches, one entry per layer.
struct LayerCache {
    MatrixXd input;   // what the layer consumed (post-dropout output of the previous layer)
    MatrixXd a;       // this layer's post-activation output, before dropout
    MatrixXd mask;    // dropout mask scaled by 1/(1-p); empty when not a dropout site
    MatrixXi pool_arg;
};

// Dropout applies to hidden activations: after every layer except the final
// one, deferring past a following maxpool so pooling sees undropped values.
std::vector<bool> dropout_sites(const std::vector<Layer>& layers) {
    std::vector<bool> site(layers.size(), false);
    for (std::size_t i = 0; i + 1 < layers.size(); ++i)
        site[i] = layers[i + 1].kind != LayerKind::maxpool2d;
    return site;
}

}  // namespace

Network train(Network net, const Dataset& data, const TrainConfig& cfg,
              const Dataset* test, std::vector<EpochStats>* log) {
    if (data.size() == 0) throw ArgumentError("train: empty dataset");
    if (cfg.learning_rate < 0.0) throw ArgumentError("train: negative learning rate");
    if (cfg.dropout < 0.0 || cfg.dropout >= 1.0)
        throw ArgumentError("train: dropout must lie in [0, 1)");
    if (cfg.batch_size < 1) throw ArgumentError("train: batch_size must be positive");
    if (cfg.epochs < 0) throw ArgumentError("train: negative epoch count");
    if (data.input_dim() != net.input_dim())
        throw ShapeError("train: dataset dim " + std::to_string(data.input_dim()) +
                         " vs network dim " + std::to_string(net.input_dim()));
    for (int lab : data.labels)
        if (lab < 0 || lab >= net.output_dim())
            throw ArgumentError("train: label " + std::to_string(lab) + " outside [0, " +
                                std::to_string(net.output_dim()) + ")");

    auto& layers = net.layers();
    const std::size_t L = layers.size();
    const auto sites = dropout_sites(layers);

    std::vector<MatrixXd> vW(L);
    std::vector<VectorXd> vb(L);
    std::vector<MatrixXd> dW(L);
    std::vector<VectorXd> db(L);
    for (std::size_t l = 0; l < L; ++l) {
        vW[l] = MatrixXd::Zero(layers[l].W.rows(), layers[l].W.cols());
        vb[l] = VectorXd::Zero(layers[l].b.size());
    }

    auto shuffle_rng = make_rng(derive_seed(cfg.seed, 0x5f0ull));
    auto dropout_rng = make_rng(derive_seed(cfg.seed, 0xd20ull));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const std::int64_t n = data.size();
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    std::vector<LayerCache> cache(L);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;

        for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
            const std::int64_t B = std::min<std::int64_t>(cfg.batch_size, n - start);

            MatrixXd flow(net.input_dim(), B);
            std::vector<int> y(static_cast<std::size_t>(B));
            for (std::int64_t j = 0; j < B; ++j) {
                const std::int64_t idx = order[static_cast<std::size_t>(start + j)];
                flow.col(j) = data.inputs.col(idx);
                y[static_cast<std::size_t>(j)] = data.labels[static_cast<std::size_t>(idx)];
            }

            // forward, recording per-layer inputs / activations / masks
            for (std::size_t l = 0; l < L; ++l) {
                const Layer& ly = layers[l];
                cache[l].input = std::move(flow);
                MatrixXd out;
                switch (ly.kind) {
                    case LayerKind::dense:
                        out.noalias() = ly.W * cache[l].input;
                        out.colwise() += ly.b;
                        detail::apply_activation(ly.act, out);
                        break;
                    case LayerKind::conv2d:
                        detail::conv_linear(ly, cache[l].input, out);
                        for (Eigen::Index s = 0; s < out.cols(); ++s)
                            Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                     Eigen::RowMajor>>(out.col(s).data(),
                                                                       ly.out_ch,
                                                                       ly.out_h * ly.out_w)
                                .colwise() += ly.b;
                        detail::apply_activation(ly.act, out);
                        break;
                    case LayerKind::maxpool2d:
                        detail::pool_forward(ly, cache[l].input, out, cache[l].pool_arg);
                        break;
                }
                cache[l].a = out;
                if (sites[l] && cfg.dropout > 0.0) {
                    const double keep = 1.0 - cfg.dropout;
                    MatrixXd mask(out.rows(), out.cols());
                    for (Eigen::Index cc = 0; cc < mask.cols(); ++cc)
                        for (Eigen::Index rr = 0; rr < mask.rows(); ++rr)
                            mask(rr, cc) = unit(dropout_rng) < keep ? 1.0 / keep : 0.0;
                    out = out.cwiseProduct(mask);
                    cache[l].mask = std::move(mask);
                } else {
                    cache[l].mask.resize(0, 0);
                }
                flow = std::move(out);
            }

            // softmax cross-entropy gradient on logits
            MatrixXd G(flow.rows(), B);
            for (std::int64_t j = 0; j < B; ++j) {
                const double m = flow.col(j).maxCoeff();
                VectorXd e = (flow.col(j).array() - m).exp();
                const double Z = e.sum();
                loss_sum += -(flow(y[static_cast<std::size_t>(j)], j) - m - std::log(Z));
                G.col(j) = e / Z;
                G(y[static_cast<std::size_t>(j)], j) -= 1.0;
            }
            G /= double(B);

            // backward
            for (std::size_t l = L; l-- > 0;) {
                const Layer& ly = layers[l];
                if (cache[l].mask.size() > 0) G = G.cwiseProduct(cache[l].mask);
                if (ly.kind == LayerKind::maxpool2d) {
                    MatrixXd prev;
                    detail::pool_scatter_add(ly, cache[l].pool_arg, G, prev);
                    G = std::move(prev);
                    continue;
                }
                const MatrixXd U = G.cwiseProduct(detail::act_prime(ly.act, cache[l].a));
                if (ly.kind == LayerKind::dense) {
                    dW[l].noalias() = U * cache[l].input.transpose();
                    db[l] = U.rowwise().sum();
                    if (l > 0) {
                        MatrixXd prev;
                        prev.noalias() = ly.W.transpose() * U;
                        G = std::move(prev);
                    }
                } else {  // conv2d
                    dW[l] = MatrixXd::Zero(ly.W.rows(), ly.W.cols());
                    db[l] = VectorXd::Zero(ly.b.size());
                    const int hw = ly.out_h * ly.out_w;
                    MatrixXd cols(std::int64_t(ly.in_ch) * ly.kernel * ly.kernel, hw);
                    MatrixXd prev = MatrixXd::Zero(ly.in_size, B);
                    for (std::int64_t s = 0; s < B; ++s) {
                        detail::im2col(ly, cache[l].input.col(s).data(), cols);
                        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                                       Eigen::RowMajor>>
                            u(U.col(s).data(), ly.out_ch, hw);
                        dW[l].noalias() += u * cols.transpose();
                        db[l] += u.rowwise().sum();
                        if (l > 0) {
                            MatrixXd back(cols.rows(), cols.cols());
                            back.noalias() = ly.W.transpose() * u;
                            detail::col2im_add(ly, back, prev.col(s).data());
                        }
                    }
                    if (l > 0) G = std::move(prev);
                }
            }

            // SGD + momentum step
            for (std::size_t l = 0; l < L; ++l) {
                if (layers[l].W.size() == 0) continue;
                vW[l] = cfg.momentum * vW[l] + dW[l];
                vb[l] = cfg.momentum * vb[l] + db[l];
                layers[l].W -= cfg.learning_rate * vW[l];
                layers[l].b -= cfg.learning_rate * vb[l];
            }
        }

        if (log) {
            EpochStats st;
            st.epoch = epoch;
            st.train_loss = loss_sum / double(n);
            st.test_acc = test ? accuracy(net, *test) : -1.0;
            log->push_back(st);
        }
    }
    return net;
}

}  // namespace ccs
