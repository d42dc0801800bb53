#include "grains/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace grains::signal {

LowPassFilter::LowPassFilter(double cutoff) {
  if (!(cutoff > 0.0 && cutoff < 0.5))
    throw std::invalid_argument("LowPassFilter: cutoff must be in (0, 0.5)");
  const double k = 2.0 * std::tan(M_PI * cutoff);
  b_ = k / (k + 2.0);
  a1_ = (k - 2.0) / (k + 2.0);
}

double LowPassFilter::step(double x) {
  if (!primed_) {
    // Start from steady state at the first sample.
    prev_x_ = x;
    prev_y_ = x;
    primed_ = true;
    return x;
  }
  const double y = b_ * (x + prev_x_) - a1_ * prev_y_;
  prev_x_ = x;
  prev_y_ = y;
  return y;
}

void LowPassFilter::reset() { primed_ = false; }

std::vector<double> low_pass(const std::vector<double>& raw, double cutoff) {
  LowPassFilter f(cutoff);
  std::vector<double> out;
  out.reserve(raw.size());
  for (double x : raw) out.push_back(f.step(x));
  return out;
}

std::vector<Measurement> zero_offset(const std::vector<Measurement>& stream,
                                     int quiescent_samples) {
  if (quiescent_samples < 1)
    throw std::invalid_argument("zero_offset: quiescent segment must be >= 1");
  if (stream.size() < static_cast<std::size_t>(quiescent_samples))
    throw std::invalid_argument(
        "zero_offset: stream shorter than the quiescent segment");
  double ox = 0.0, oy = 0.0;
  for (int i = 0; i < quiescent_samples; ++i) {
    ox += stream[i].fx;
    oy += stream[i].fy;
  }
  ox /= quiescent_samples;
  oy /= quiescent_samples;
  std::vector<Measurement> out = stream;
  for (auto& m : out) {
    m.fx -= ox;
    m.fy -= oy;
  }
  return out;
}

}  // namespace grains::signal
