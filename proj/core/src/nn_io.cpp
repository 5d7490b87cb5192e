#include "ccs/nn_io.hpp"

#include <cstring>
#include <fstream>

#include "ccs/errors.hpp"

namespace ccs {
namespace {

constexpr char kMagic[4] = {'N', 'N', 'C', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in, const std::string& path) {
    T v;
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw FormatError("truncated network file " + path);
    return v;
}

// Parameters serialize row-major regardless of Eigen's in-memory layout.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) write_pod<double>(out, m(r, c));
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols,
                            const std::string& path) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_pod<double>(in, path);
    return m;
}

}  // namespace

void save_network(const Network& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, 1);  // version
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.input_dim()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.output_dim()));
    // raster input shape; zeros mean a flat input
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.in_ch()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.in_h()));
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(net.in_w()));

    for (const Layer& l : net.layers()) {
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
        write_pod<std::uint8_t>(out, static_cast<std::uint8_t>(l.act));
        switch (l.kind) {
            case LayerKind::dense:
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.W.rows()));
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.W.cols()));
                write_matrix(out, l.W);
                write_matrix(out, l.b);
                break;
            case LayerKind::conv2d:
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_ch));
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_ch));
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.kernel));
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.stride));
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.pad));
                write_matrix(out, l.W);
                write_matrix(out, l.b);
                break;
            case LayerKind::maxpool2d:
                write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(l.pool));
                break;
        }
    }
    if (!out) throw IoError("write failure on " + path);
}

Network load_network(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw FormatError("bad network magic in " + path);
    const auto version = read_pod<std::uint32_t>(in, path);
    if (version != 1)
        throw FormatError("unsupported network version " + std::to_string(version));
    const auto n_layers = read_pod<std::uint32_t>(in, path);
    const auto input_dim = read_pod<std::uint32_t>(in, path);
    const auto output_dim = read_pod<std::uint32_t>(in, path);
    const auto in_ch = read_pod<std::uint32_t>(in, path);
    const auto in_h = read_pod<std::uint32_t>(in, path);
    const auto in_w = read_pod<std::uint32_t>(in, path);

    std::vector<Layer> layers;
    layers.reserve(n_layers);
    for (std::uint32_t i = 0; i < n_layers; ++i) {
        const auto kind = static_cast<LayerKind>(read_pod<std::uint8_t>(in, path));
        const auto act = static_cast<Activation>(read_pod<std::uint8_t>(in, path));
        switch (kind) {
            case LayerKind::dense: {
                const auto rows = read_pod<std::uint32_t>(in, path);
                const auto cols = read_pod<std::uint32_t>(in, path);
                Eigen::MatrixXd W = read_matrix(in, rows, cols, path);
                Eigen::MatrixXd b = read_matrix(in, rows, 1, path);
                layers.push_back(Layer::dense(std::move(W), b.col(0), act));
                break;
            }
            case LayerKind::conv2d: {
                const auto ic = read_pod<std::uint32_t>(in, path);
                const auto oc = read_pod<std::uint32_t>(in, path);
                const auto k = read_pod<std::uint32_t>(in, path);
                const auto s = read_pod<std::uint32_t>(in, path);
                const auto p = read_pod<std::uint32_t>(in, path);
                Layer l = Layer::conv2d(static_cast<int>(ic), static_cast<int>(oc),
                                        static_cast<int>(k), static_cast<int>(s),
                                        static_cast<int>(p), act);
                l.W = read_matrix(in, oc, std::int64_t(ic) * k * k, path);
                Eigen::MatrixXd b = read_matrix(in, oc, 1, path);
                l.b = b.col(0);
                layers.push_back(std::move(l));
                break;
            }
            case LayerKind::maxpool2d: {
                const auto p = read_pod<std::uint32_t>(in, path);
                layers.push_back(Layer::maxpool2d(static_cast<int>(p)));
                break;
            }
            default:
                throw FormatError("unknown layer kind in " + path);
        }
    }

    Network net = in_ch > 0 ? Network(static_cast<int>(in_ch), static_cast<int>(in_h),
                                      static_cast<int>(in_w), std::move(layers))
                            : Network(static_cast<int>(input_dim), std::move(layers));
    if (net.output_dim() != static_cast<int>(output_dim))
        throw FormatError("network header/output mismatch in " + path);
    return net;
}

}  // namespace ccs
