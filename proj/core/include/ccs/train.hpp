#pragma once

#include <cstdint>
#include <vector>

#include "ccs/dataset.hpp"
#include "ccs/network.hpp"

namespace ccs {

struct TrainConfig {
    double learning_rate = 0.05;
    double momentum = 0.9;
    double dropout = 0.5;  // probability of dropping a hidden activation
    int epochs = 1;
    int batch_size = 64;
    std::uint64_t seed = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double test_acc = -1.0;  // negative when no test set was supplied
};

// SGD with momentum on softmax cross-entropy. Dropout (inverted scaling)
// applies to hidden activations during training only; inference stays
// untouched. Identical seeds give bit-identical final weights.
Network train(Network net, const Dataset& data, const TrainConfig& cfg,
              const Dataset* test = nullptr, std::vector<EpochStats>* log = nullptr);

}  // namespace ccs
