#pragma once

#include <cstdint>
#include <vector>

namespace grains {

// Windowed sequence of force magnitudes over consecutive sample indices.
// Sample i of `magnitudes` corresponds to time index start_index + i.
struct ForcePattern {
  std::int64_t start_index = 0;
  std::vector<double> magnitudes;

  std::size_t size() const { return magnitudes.size(); }
};

}  // namespace grains
