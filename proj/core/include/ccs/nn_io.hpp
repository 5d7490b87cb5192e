#pragma once

#include <string>

#include "ccs/network.hpp"

namespace ccs {

// Versioned binary network file, magic "NNC1", little-endian, float64
// parameters in row-major order. Layout documented in docs/formats.md.
void save_network(const Network& net, const std::string& path);
Network load_network(const std::string& path);

}  // namespace ccs
