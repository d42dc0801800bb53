#include "grains/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace grains::detector {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

gp::FitOptions DetectorConfig::streaming_fit_options() {
  gp::FitOptions opt;
  opt.n_starts = 1;
  opt.max_iterations = 10;
  opt.bounds.sigma_p2 = {1e-4, 100.0};
  opt.bounds.length_scale = {0.05, 3.0};
  opt.freeze_period = true;  // the calibrated T* is the period
  opt.max_opt_points = 900;
  opt.grad_tol = 1e-3;
  opt.min_improvement = 0.5;
  return opt;
}

void DetectorConfig::validate() const {
  if (window_m <= 0)
    throw std::invalid_argument("DetectorConfig: window_m must be > 0");
  if (horizon_m_star <= 0)
    throw std::invalid_argument("DetectorConfig: horizon_m_star must be > 0");
  if (!(z_threshold > 0.0))
    throw std::invalid_argument("DetectorConfig: z_threshold must be > 0");
  if (!(filter_cutoff > 0.0 && filter_cutoff < 0.5))
    throw std::invalid_argument(
        "DetectorConfig: filter_cutoff must be in (0, 0.5)");
  if (refit_stride < 0)
    throw std::invalid_argument("DetectorConfig: refit_stride must be >= 0");
  if (consecutive_exceedances < 1)
    throw std::invalid_argument(
        "DetectorConfig: consecutive_exceedances must be >= 1");
  if (zero_offset_samples < 0)
    throw std::invalid_argument(
        "DetectorConfig: zero_offset_samples must be >= 0");
  if (!(t_star > 0.0))
    throw std::invalid_argument("DetectorConfig: t_star must be > 0");
  if (tuning == Tuning::kNever && !kernel_init)
    throw std::invalid_argument(
        "DetectorConfig: tuning=never requires kernel_init");
}

bool decide(std::span<const double> z, double z_threshold) {
  return std::any_of(z.begin(), z.end(),
                     [&](double v) { return v >= z_threshold; });
}

double sensing_range(const DetectionOutcome& outcome,
                     std::span<const Disk> objects) {
  if (!outcome.triggered)
    throw std::invalid_argument("sensing_range: outcome did not trigger");
  if (objects.empty())
    throw std::invalid_argument("sensing_range: no objects");
  double best = std::numeric_limits<double>::infinity();
  for (const Disk& d : objects)
    best = std::min(best, distance_to_boundary(outcome.stop_pos, d));
  return best;
}

Detector::Detector(DetectorConfig cfg)
    : cfg_(std::move(cfg)),
      filter_x_(cfg_.filter_cutoff),
      filter_y_(cfg_.filter_cutoff) {
  cfg_.validate();
  if (cfg_.refit_stride == 0) cfg_.refit_stride = cfg_.horizon_m_star;
}

std::optional<DetectionOutcome> Detector::push(const Measurement& m) {
  if (outcome_.triggered) return std::nullopt;  // terminal
  if (m.t != last_t_ + 1 && last_t_ >= 0)
    throw std::invalid_argument("Detector: measurement indices must advance by 1");
  last_t_ = m.t;

  if (cfg_.zero_offset_samples > 0 && !offset_ready_) {
    pending_.push_back(m);
    if (static_cast<int>(pending_.size()) < cfg_.zero_offset_samples)
      return std::nullopt;
    for (const auto& p : pending_) {
      offset_x_ += p.fx;
      offset_y_ += p.fy;
    }
    offset_x_ /= pending_.size();
    offset_y_ /= pending_.size();
    offset_ready_ = true;
    std::vector<Measurement> backlog;
    backlog.swap(pending_);
    std::optional<DetectionOutcome> fired;
    for (const auto& p : backlog) {
      auto r = ingest(p);
      if (r) fired = r;
    }
    return fired;
  }
  return ingest(m);
}

std::optional<DetectionOutcome> Detector::ingest(const Measurement& m) {
  const double fx = m.fx - offset_x_;
  const double fy = m.fy - offset_y_;
  const double mag = std::hypot(filter_x_.step(fx), filter_y_.step(fy));
  magnitudes_.push_back(mag);

  TraceRow row;
  row.t = m.t;
  row.x = m.pos.x;
  row.y = m.pos.y;
  row.fx = m.fx;
  row.fy = m.fy;
  row.f_mag_filtered = mag;
  row.mu_star = kNaN;
  row.sigma_star = kNaN;
  row.z = kNaN;

  std::optional<DetectionOutcome> fired;
  const std::int64_t pos = static_cast<std::int64_t>(magnitudes_.size()) - 1;
  const std::int64_t off = pos - horizon_begin_;
  if (fit_window_end_ >= 0 && off >= 0 && off < horizon_.mean.size()) {
    row.mu_star = horizon_.mean[off];
    row.sigma_star = horizon_.std[off];
    const double sigma = std::max(row.sigma_star, 1e-8);
    double z = (mag - row.mu_star) / sigma;
    if (cfg_.use_abs_z) z = std::abs(z);
    row.z = z;
    if (z >= cfg_.z_threshold) {
      if (++exceed_run_ >= cfg_.consecutive_exceedances) {
        outcome_.triggered = true;
        outcome_.stop_index = m.t;
        outcome_.stop_pos = m.pos;
        outcome_.trigger_z = z;
        row.triggered = true;
        fired = outcome_;
      }
    } else {
      exceed_run_ = 0;
    }
  }
  trace_.push_back(row);

  const std::int64_t n = static_cast<std::int64_t>(magnitudes_.size());
  if (!outcome_.triggered && n >= cfg_.window_m &&
      (n - cfg_.window_m) % cfg_.refit_stride == 0) {
    refit(n);
  }
  return fired;
}

void Detector::refit(std::int64_t n) {
  ForcePattern window;
  window.start_index = n - cfg_.window_m;
  window.magnitudes.assign(magnitudes_.end() - cfg_.window_m,
                           magnitudes_.end());

  const bool first = fit_window_end_ < 0;
  const bool tune = cfg_.tuning == DetectorConfig::Tuning::kEveryWindow ||
                    (cfg_.tuning == DetectorConfig::Tuning::kFirstWindow && first);
  if (tune) {
    gp::KernelParams init;
    if (first && cfg_.kernel_init) {
      init = *cfg_.kernel_init;
    } else if (!first) {
      init = model_.kernel;
    } else {
      const Eigen::Map<const Eigen::VectorXd> y(window.magnitudes.data(),
                                                cfg_.window_m);
      const double var = (y.array() - y.mean()).square().mean();
      init.ess.sigma_p2 = std::max(var, 1e-8);
      init.ess.length_scale = 1.0;
      init.white.sigma_w2 = std::max(0.1 * var, 1e-8);
    }
    init.ess.period = first ? cfg_.t_star : model_.kernel.ess.period;
    gp::FitOptions opt = cfg_.fit_options;
    if (std::isnan(opt.bounds.period[0]))
      opt.bounds.period[0] = 0.5 * cfg_.t_star;
    if (std::isnan(opt.bounds.period[1]))
      opt.bounds.period[1] = 2.0 * cfg_.t_star;
    model_ = gp::fit(window, init, 0.0, opt);
  } else {
    const gp::KernelParams kernel =
        first ? *cfg_.kernel_init : model_.kernel;
    model_ = gp::condition(kernel, 0.0, window);
  }
  fit_window_begin_ = window.start_index;
  fit_window_end_ = n;

  horizon_begin_ = n;
  const Eigen::VectorXd t_star = Eigen::VectorXd::LinSpaced(
      cfg_.horizon_m_star, static_cast<double>(n),
      static_cast<double>(n + cfg_.horizon_m_star - 1));
  horizon_ = gp::predict(model_, t_star);
}

void write_trace_csv(std::ostream& os, std::span<const TraceRow> rows) {
  os << "t,x,y,fx,fy,f_mag_filtered,mu_star,sigma_star,z,triggered\n";
  char buf[320];
  for (const TraceRow& r : rows) {
    std::snprintf(buf, sizeof(buf),
                  "%lld,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,%d\n",
                  static_cast<long long>(r.t), r.x, r.y, r.fx, r.fy,
                  r.f_mag_filtered, r.mu_star, r.sigma_star, r.z,
                  r.triggered ? 1 : 0);
    os << buf;
  }
}

}  // namespace grains::detector
