#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "grains/force_pattern.hpp"
#include "grains/gp.hpp"
#include "grains/measurement.hpp"
#include "grains/signal.hpp"

namespace grains::detector {

struct DetectorConfig {
  int window_m = 2000;        // training window length M
  int horizon_m_star = 1000;  // prediction horizon M*
  double z_threshold = 3.9;
  double filter_cutoff = 0.08;  // normalized, (0, 0.5)
  int refit_stride = 0;         // samples between re-fits; 0 -> horizon_m_star
  int consecutive_exceedances = 1;  // debounce; 1 = single-sample rule
  bool use_abs_z = false;
  int zero_offset_samples = 0;  // 0 disables streaming re-zeroing
  double t_star = 439.0;        // period for the ESS kernel, samples

  // kFirstWindow tunes (sigma_p2, l, sigma_w2) once on the first full window;
  // later windows only re-condition. kNever requires kernel_init.
  enum class Tuning { kNever, kFirstWindow, kEveryWindow };
  Tuning tuning = Tuning::kFirstWindow;
  std::optional<gp::KernelParams> kernel_init;
  gp::FitOptions fit_options = streaming_fit_options();

  static gp::FitOptions streaming_fit_options();
  void validate() const;
};

struct DetectionOutcome {
  bool triggered = false;
  std::int64_t stop_index = -1;
  Pose2D stop_pos;
  double trigger_z = 0.0;
};

// One line of the per-sample trace. Prediction columns are NaN while the
// detector is still warming up or outside an active horizon.
struct TraceRow {
  std::int64_t t = 0;
  double x = 0.0, y = 0.0;
  double fx = 0.0, fy = 0.0;
  double f_mag_filtered = 0.0;
  double mu_star = 0.0, sigma_star = 0.0, z = 0.0;
  bool triggered = false;
};

// Proximity decision: 1 iff any z meets or exceeds the threshold.
bool decide(std::span<const double> z, double z_threshold);

// Minimum distance from the stop position to any object surface.
double sensing_range(const DetectionOutcome& outcome,
                     std::span<const Disk> objects);

// Streaming proximity detector. Feed measurements in index order from a
// single context; the state is terminal once triggered.
class Detector {
 public:
  explicit Detector(DetectorConfig cfg);

  // Ingests one measurement. Returns the outcome when this sample triggers
  // the stop decision; pushes after the trigger are ignored.
  std::optional<DetectionOutcome> push(const Measurement& m);

  bool triggered() const { return outcome_.triggered; }
  const DetectionOutcome& outcome() const { return outcome_; }
  const std::vector<TraceRow>& trace() const { return trace_; }

  // Most recent fitted model and its window, for inspection.
  const gp::GPModel* model() const {
    return model_.chol_lower.rows() ? &model_ : nullptr;
  }
  std::int64_t fit_window_begin() const { return fit_window_begin_; }
  std::int64_t fit_window_end() const { return fit_window_end_; }

 private:
  std::optional<DetectionOutcome> ingest(const Measurement& m);
  void refit(std::int64_t next_index);

  DetectorConfig cfg_;
  signal::LowPassFilter filter_x_, filter_y_;
  std::vector<double> magnitudes_;  // filtered magnitude history
  std::vector<Measurement> pending_;  // pre-zeroing buffer
  double offset_x_ = 0.0, offset_y_ = 0.0;
  bool offset_ready_ = false;

  gp::GPModel model_;
  std::int64_t fit_window_begin_ = -1;
  std::int64_t fit_window_end_ = -1;  // exclusive
  gp::Posterior horizon_;
  std::int64_t horizon_begin_ = 0;

  std::int64_t next_index_ = 0;  // expected sample count so far
  std::int64_t last_t_ = -1;
  int exceed_run_ = 0;
  DetectionOutcome outcome_;
  std::vector<TraceRow> trace_;
};

// Trace CSV with the schema
// t,x,y,fx,fy,f_mag_filtered,mu_star,sigma_star,z,triggered.
void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows);

}  // namespace grains::detector
