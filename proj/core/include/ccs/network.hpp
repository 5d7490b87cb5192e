#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ccs {

enum class Activation : std::uint8_t { identity = 0, sigmoid = 1, relu = 2 };
enum class LayerKind : std::uint8_t { dense = 0, conv2d = 1, maxpool2d = 2 };

const char* to_string(Activation act);
Activation activation_from_string(const std::string& name);

// One network layer. Dense and conv2d layers carry parameters and an
// activation; maxpool2d carries neither. Spatial bookkeeping fields are
// resolved when the layer is chained into a Network.
struct Layer {
    LayerKind kind = LayerKind::dense;
    Activation act = Activation::identity;

    Eigen::MatrixXd W;  // dense: out x in; conv2d: out_ch x (in_ch*kernel*kernel)
    Eigen::VectorXd b;  // dense: out; conv2d: out_ch

    // conv2d geometry
    int in_ch = 0, out_ch = 0, kernel = 0, stride = 1, pad = 0;
    // maxpool2d window (stride equals window)
    int pool = 0;

    // resolved by Network: flat sizes and, for conv/pool, spatial shapes
    int in_size = 0, out_size = 0;
    int in_h = 0, in_w = 0, out_h = 0, out_w = 0;

    static Layer dense(Eigen::MatrixXd W, Eigen::VectorXd b,
                       Activation act = Activation::identity);
    static Layer conv2d(int in_ch, int out_ch, int kernel, int stride, int pad,
                        Activation act);
    static Layer maxpool2d(int pool);
};

// Cached per-layer activations (and pool routing) for a batch, so repeated
// gradient/HVP passes at the same inputs skip the primal forward work.
// Samples are columns throughout.
struct ForwardTrace {
    Eigen::MatrixXd x;                      // input batch
    std::vector<Eigen::MatrixXd> a;         // post-activation output per layer
    std::vector<Eigen::MatrixXi> pool_arg;  // flat input index per pool cell (pool layers only)
};

// Feedforward network: ordered layers over a flat or rastered input.
// Immutable during inference; forward/input_gradient/hvp are const and safe
// to call from parallel workers.
class Network {
public:
    Network() = default;
    // Flat input (dense layers only).
    Network(int input_dim, std::vector<Layer> layers);
    // Raster input of shape (channels, height, width).
    Network(int in_ch, int in_h, int in_w, std::vector<Layer> layers);

    // Hidden layers of the given widths, identity-activated dense output.
    // Weights and biases drawn uniformly from +-1/sqrt(fan_in), seeded.
    static Network mlp(int input_dim, const std::vector<int>& hidden, int output_dim,
                       Activation hidden_act, std::uint64_t seed);
    // conv(in->16, 5x5, pad 2) + pool2, conv(16->32, 5x5, pad 2) + pool2,
    // dense hidden, dense output; sigmoid unless overridden.
    static Network conv_net(int in_ch, int in_h, int in_w, int hidden, int output_dim,
                            Activation hidden_act, std::uint64_t seed);

    int input_dim() const { return input_dim_; }
    int output_dim() const { return output_dim_; }
    const std::vector<Layer>& layers() const { return layers_; }
    std::vector<Layer>& layers() { return layers_; }
    bool raster_input() const { return in_ch_ > 0; }
    int in_ch() const { return in_ch_; }
    int in_h() const { return in_h_; }
    int in_w() const { return in_w_; }
    // true when any activation is piecewise-linear (ReLU)
    bool has_relu() const;
    std::int64_t parameter_count() const;

    // Logits; dropout never applies here.
    Eigen::VectorXd forward(const Eigen::Ref<const Eigen::VectorXd>& x) const;
    Eigen::MatrixXd forward_batch(const Eigen::Ref<const Eigen::MatrixXd>& X) const;
    // Single-chunk forward filling a trace for later gradient/HVP passes.
    Eigen::MatrixXd forward_trace(const Eigen::Ref<const Eigen::MatrixXd>& X,
                                  ForwardTrace& trace) const;

    // Gradient of logit k with respect to the input.
    Eigen::VectorXd input_gradient(const Eigen::Ref<const Eigen::VectorXd>& x, int k) const;
    Eigen::MatrixXd input_gradient_batch(const Eigen::Ref<const Eigen::MatrixXd>& X, int k) const;
    Eigen::MatrixXd input_gradient_trace(const ForwardTrace& trace, int k) const;

    // Hessian-vector product H_k(x) * v, computed as the exact directional
    // derivative of the reverse-mode input gradient (no finite differences).
    Eigen::VectorXd hvp(const Eigen::Ref<const Eigen::VectorXd>& x, int k,
                        const Eigen::Ref<const Eigen::VectorXd>& v) const;
    // Columnwise: result column j is H_k(x_j) * V_j for anchor x_j of the trace.
    Eigen::MatrixXd hvp_trace(const ForwardTrace& trace, int k,
                              const Eigen::Ref<const Eigen::MatrixXd>& V) const;

private:
    void resolve_shapes();
    void check_input(Eigen::Index rows) const;
    void check_output_index(int k) const;

    int input_dim_ = 0;
    int output_dim_ = 0;
    int in_ch_ = 0, in_h_ = 0, in_w_ = 0;  // 0 = flat input
    std::vector<Layer> layers_;
};

// Fraction of samples whose argmax logit equals the label; argmax ties are
// broken toward the lowest index.
struct Dataset;
double accuracy(const Network& net, const Dataset& data);

// Argmax labels for a batch of logit columns (ties to lowest index).
std::vector<int> argmax_labels(const Eigen::MatrixXd& logits);

}  // namespace ccs
