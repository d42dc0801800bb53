#pragma once

#include <vector>

#include "grains/measurement.hpp"

namespace grains::signal {

// First-order causal low-pass (bilinear transform). Unity DC gain, zero at
// Nyquist. `cutoff` is normalized to the sampling rate, in (0, 0.5).
class LowPassFilter {
 public:
  explicit LowPassFilter(double cutoff);

  double step(double x);
  void reset();

 private:
  double b_ = 0.0;   // shared numerator coefficient
  double a1_ = 0.0;  // feedback coefficient
  double prev_x_ = 0.0;
  double prev_y_ = 0.0;
  bool primed_ = false;
};

// Batch form of the filter above; output length equals input length.
std::vector<double> low_pass(const std::vector<double>& raw, double cutoff);

// Subtract the per-axis mean of the initial quiescent segment from every
// sample. Rejects streams shorter than the quiescent segment.
std::vector<Measurement> zero_offset(const std::vector<Measurement>& stream,
                                     int quiescent_samples = 50);

}  // namespace grains::signal
