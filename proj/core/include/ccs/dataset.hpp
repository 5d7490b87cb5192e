#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

namespace ccs {

// Labeled input vectors, one sample per column. MNIST-style loading scales
// pixel bytes to [0,1] and subtracts 0.5, so every stored value lies in
// [-0.5, 0.5].
struct Dataset {
    Eigen::MatrixXd inputs;   // input_dim x n, column per sample
    std::vector<int> labels;  // n entries, each in [0, n_classes)
    int n_classes = 0;

    int input_dim() const { return static_cast<int>(inputs.rows()); }
    std::int64_t size() const { return inputs.cols(); }
};

// Parses a big-endian IDX image/label file pair (magic 0x00000803 and
// 0x00000801). Pixels are mapped to [-0.5, 0.5] via v/255 - 0.5 and images
// flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Seeded sample of n items without replacement. When n >= n_classes the
// sample is stratified by label (every class keeps at least one item,
// remaining slots allocated proportionally by largest remainder).
Dataset subset(const Dataset& data, std::int64_t n, std::uint64_t seed,
               bool stratified = true);

// Internal cache format, magic "DSB1", little-endian float64 payload.
// save/load round-trips are bit-identical.
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace ccs
