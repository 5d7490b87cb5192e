#include "ccs/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "ccs/errors.hpp"
#include "ccs/rng.hpp"

namespace ccs {
namespace {

std::vector<int> select_clusters(std::int64_t n, int select, std::uint64_t seed) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (select <= 0 || select >= n) return idx;
    auto rng = make_rng(derive_seed(seed, 0xfea7ull));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(static_cast<std::size_t>(select));
    std::sort(idx.begin(), idx.end());
    return idx;
}

std::vector<FeatureMap> from_planes(const CCSModel::OutputPlanes& planes, int k, int width,
                                    int height, int select, std::uint64_t seed) {
    if (width < 1 || height < 1 ||
        std::int64_t(width) * height != planes.gradients.rows())
        throw ArgumentError("feature maps need raster input dims: " + std::to_string(width) +
                            "x" + std::to_string(height) + " != " +
                            std::to_string(planes.gradients.rows()));
    std::vector<FeatureMap> maps;
    for (int i : select_clusters(planes.gradients.cols(), select, seed)) {
        FeatureMap m;
        m.output_index = k;
        m.cluster_index = i;
        m.gradient = planes.gradients.col(i);
        m.width = width;
        m.height = height;
        maps.push_back(std::move(m));
    }
    return maps;
}

}  // namespace

std::vector<FeatureMap> extract_features(const ClusterReduction& reduction, int k, int width,
                                         int height, int select, std::uint64_t seed) {
    if (k < 0 || static_cast<std::size_t>(k) >= reduction.outputs.size())
        throw IndexError("extract_features: output index out of range");
    return from_planes(reduction.outputs[static_cast<std::size_t>(k)].centroids, k, width,
                       height, select, seed);
}

std::vector<FeatureMap> extract_features(const CCSModel& model, int k, int width, int height,
                                         int select, std::uint64_t seed) {
    return from_planes(model.planes(k), k, width, height, select, seed);
}

std::vector<std::uint8_t> render_pixels(const FeatureMap& map, double global_m) {
    if (!map.gradient.allFinite()) throw NumericError("feature map has non-finite values");
    const double m = global_m > 0.0 ? global_m : map.gradient.cwiseAbs().maxCoeff();
    std::vector<std::uint8_t> px(static_cast<std::size_t>(map.gradient.size()));
    for (Eigen::Index i = 0; i < map.gradient.size(); ++i) {
        if (m == 0.0) {
            px[static_cast<std::size_t>(i)] = 128;
            continue;
        }
        const double t = (map.gradient(i) + m) / (2.0 * m) * 255.0;
        const long v = std::lround(std::min(255.0, std::max(0.0, t)));
        px[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
    }
    return px;
}

void export_pgm(const FeatureMap& map, const std::string& path, double global_m) {
    const auto px = render_pixels(map, global_m);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << "P5\n" << map.width << " " << map.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(px.data()),
              static_cast<std::streamsize>(px.size()));
    if (!out) throw IoError("write failure on " + path);
}

}  // namespace ccs
