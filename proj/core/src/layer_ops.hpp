#pragma once

// Internal per-layer kernels shared by inference and training paths.
// Not installed; include only from core sources.

#include <Eigen/Core>
#include <cstdint>

#include "ccs/network.hpp"

namespace ccs::detail {

using Eigen::MatrixXd;
using Eigen::MatrixXi;

// Gathers conv patches of one flat (c,h,w) sample into columns:
// cols((c*K+ky)*K+kx, y*out_w+x) = sample[(c*H + y*S+ky-P)*W + x*S+kx-P] or 0.
inline void im2col(const Layer& l, const double* in, MatrixXd& cols) {
    cols.setZero();
    for (int c = 0; c < l.in_ch; ++c) {
        const double* plane = in + std::int64_t(c) * l.in_h * l.in_w;
        for (int ky = 0; ky < l.kernel; ++ky) {
            for (int kx = 0; kx < l.kernel; ++kx) {
                const int row = (c * l.kernel + ky) * l.kernel + kx;
                for (int y = 0; y < l.out_h; ++y) {
                    const int iy = y * l.stride + ky - l.pad;
                    if (iy < 0 || iy >= l.in_h) continue;
                    for (int x = 0; x < l.out_w; ++x) {
                        const int ix = x * l.stride + kx - l.pad;
                        if (ix < 0 || ix >= l.in_w) continue;
                        cols(row, y * l.out_w + x) = plane[std::int64_t(iy) * l.in_w + ix];
                    }
                }
            }
        }
    }
}

// Transpose of im2col: scatter-adds patch columns back onto the flat sample.
inline void col2im_add(const Layer& l, const MatrixXd& cols, double* out) {
    for (int c = 0; c < l.in_ch; ++c) {
        double* plane = out + std::int64_t(c) * l.in_h * l.in_w;
        for (int ky = 0; ky < l.kernel; ++ky) {
            for (int kx = 0; kx < l.kernel; ++kx) {
                const int row = (c * l.kernel + ky) * l.kernel + kx;
                for (int y = 0; y < l.out_h; ++y) {
                    const int iy = y * l.stride + ky - l.pad;
                    if (iy < 0 || iy >= l.in_h) continue;
                    for (int x = 0; x < l.out_w; ++x) {
                        const int ix = x * l.stride + kx - l.pad;
                        if (ix < 0 || ix >= l.in_w) continue;
                        plane[std::int64_t(iy) * l.in_w + ix] += cols(row, y * l.out_w + x);
                    }
                }
            }
        }
    }
}

// Linear part of a conv layer over a batch (no bias, no activation).
// Used for both the primal pass (with bias added by the caller) and tangent
// propagation.
inline void conv_linear(const Layer& l, const MatrixXd& in, MatrixXd& out) {
    const int hw = l.out_h * l.out_w;
    out.resize(l.out_size, in.cols());
    MatrixXd cols(std::int64_t(l.in_ch) * l.kernel * l.kernel, hw);
    MatrixXd z(l.out_ch, hw);
    for (Eigen::Index s = 0; s < in.cols(); ++s) {
        im2col(l, in.col(s).data(), cols);
        z.noalias() = l.W * cols;
        Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            out.col(s).data(), l.out_ch, hw) = z;
    }
}

// Backward of the conv linear map: out_grad (out_size x B) -> in_grad.
inline void conv_linear_backward(const Layer& l, const MatrixXd& out_grad, MatrixXd& in_grad) {
    const int hw = l.out_h * l.out_w;
    in_grad = MatrixXd::Zero(l.in_size, out_grad.cols());
    MatrixXd cols(std::int64_t(l.in_ch) * l.kernel * l.kernel, hw);
    for (Eigen::Index s = 0; s < out_grad.cols(); ++s) {
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
            u(out_grad.col(s).data(), l.out_ch, hw);
        cols.noalias() = l.W.transpose() * u;
        col2im_add(l, cols, in_grad.col(s).data());
    }
}

// Max-pool forward; records the flat input argmax per cell (first maximal
// element wins, fixing the subgradient routing).
inline void pool_forward(const Layer& l, const MatrixXd& in, MatrixXd& out, MatrixXi& arg) {
    const Eigen::Index B = in.cols();
    out.resize(l.out_size, B);
    arg.resize(l.out_size, B);
    const int p = l.pool;
    for (Eigen::Index s = 0; s < B; ++s) {
        const double* ip = in.col(s).data();
        double* op = out.col(s).data();
        for (int c = 0; c < l.in_ch; ++c) {
            const std::int64_t base = std::int64_t(c) * l.in_h * l.in_w;
            for (int y = 0; y < l.out_h; ++y) {
                for (int x = 0; x < l.out_w; ++x) {
                    int best_idx = -1;
                    double best = 0.0;
                    for (int ky = 0; ky < p; ++ky) {
                        for (int kx = 0; kx < p; ++kx) {
                            const std::int64_t idx =
                                base + std::int64_t(y * p + ky) * l.in_w + (x * p + kx);
                            const double v = ip[idx];
                            if (best_idx < 0 || v > best) {
                                best = v;
                                best_idx = static_cast<int>(idx);
                            }
                        }
                    }
                    const std::int64_t oidx = (std::int64_t(c) * l.out_h + y) * l.out_w + x;
                    op[oidx] = best;
                    arg(oidx, s) = best_idx;
                }
            }
        }
    }
}

// Routes values through recorded pool argmax positions (forward direction).
inline void pool_gather(const Layer& l, const MatrixXi& arg, const MatrixXd& in, MatrixXd& out) {
    out.resize(l.out_size, in.cols());
    for (Eigen::Index s = 0; s < in.cols(); ++s)
        for (int o = 0; o < l.out_size; ++o) out(o, s) = in(arg(o, s), s);
}

// Transpose routing: scatter-adds pooled-cell values back to input positions.
inline void pool_scatter_add(const Layer& l, const MatrixXi& arg, const MatrixXd& out_grad,
                             MatrixXd& in_grad) {
    in_grad = MatrixXd::Zero(l.in_size, out_grad.cols());
    for (Eigen::Index s = 0; s < out_grad.cols(); ++s)
        for (int o = 0; o < l.out_size; ++o) in_grad(arg(o, s), s) += out_grad(o, s);
}

inline void apply_activation(Activation act, MatrixXd& z) {
    if (act == Activation::sigmoid)
        z = (1.0 / (1.0 + (-z.array()).exp())).matrix();
    else if (act == Activation::relu)
        z = z.array().max(0.0).matrix();
}

// First derivative of the activation as a function of its own output a.
// sigmoid: a(1-a); relu: 1 for a>0, 0 at and below the kink (left branch).
inline MatrixXd act_prime(Activation act, const MatrixXd& a) {
    switch (act) {
        case Activation::identity:
            return MatrixXd::Ones(a.rows(), a.cols());
        case Activation::sigmoid:
            return (a.array() * (1.0 - a.array())).matrix();
        case Activation::relu:
            return (a.array() > 0.0).cast<double>().matrix();
    }
    return MatrixXd();
}

// Second derivative from the output value; identity/relu are curvature-free.
inline MatrixXd act_second(Activation act, const MatrixXd& a) {
    if (act == Activation::sigmoid)
        return (a.array() * (1.0 - a.array()) * (1.0 - 2.0 * a.array())).matrix();
    return MatrixXd::Zero(a.rows(), a.cols());
}

}  // namespace ccs::detail
