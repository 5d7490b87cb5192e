#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "ccs/reduce.hpp"

namespace ccs {

// A representative plane's f-gradient component reshaped as a raster image
// (the quadratic slope part is excluded by construction).
struct FeatureMap {
    int output_index = 0;
    int cluster_index = 0;
    Eigen::VectorXd gradient;
    int width = 0, height = 0;
};

// Feature maps of output k, one per selected centroid. select = 0 takes all
// clusters; otherwise `select` clusters are drawn seeded-random without
// replacement. width*height must match the model input dimension.
std::vector<FeatureMap> extract_features(const ClusterReduction& reduction, int k, int width,
                                         int height, int select = 0, std::uint64_t seed = 0);
// Same, reading the centroid planes from a (reduced) model directly.
std::vector<FeatureMap> extract_features(const CCSModel& model, int k, int width, int height,
                                         int select = 0, std::uint64_t seed = 0);

// 8-bit binary PGM (P5) with sign-symmetric normalization: -M -> 0, +M -> 255
// for M = max |value| (or the supplied global M), so zero always renders as
// mid-gray 128. An all-zero map renders uniform 128.
void export_pgm(const FeatureMap& map, const std::string& path, double global_m = 0.0);

// Pixel values the PGM export produces (exposed for rendering checks).
std::vector<std::uint8_t> render_pixels(const FeatureMap& map, double global_m = 0.0);

}  // namespace ccs
