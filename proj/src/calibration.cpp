#include "grains/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <iostream>
#include <stdexcept>

#include "grains/signal.hpp"

namespace grains::calibration {

gp::FitOptions CalibrationConfig::default_fit_options() {
  gp::FitOptions opt;
  opt.n_starts = 1;
  opt.max_iterations = 10;
  opt.bounds.sigma_p2 = {1e-4, 100.0};
  opt.bounds.length_scale = {0.05, 3.0};
  opt.freeze_period = true;  // T_i is the quantity under validation
  opt.max_opt_points = 900;
  opt.grad_tol = 1e-3;
  opt.min_improvement = 0.5;
  return opt;
}

void CalibrationConfig::validate() const {
  if (mv_candidates.empty())
    throw std::invalid_argument("CalibrationConfig: mv_candidates empty");
  for (double mv : mv_candidates)
    if (!(mv > 0.0 && mv <= 1.0))
      throw std::invalid_argument(
          "CalibrationConfig: mv candidates must be in (0, 1]");
  if (!(explore_distance > 0.0))
    throw std::invalid_argument(
        "CalibrationConfig: explore_distance must be > 0");
  if (window_m <= 0 || horizon_m_star <= 0)
    throw std::invalid_argument("CalibrationConfig: window sizes must be > 0");
  if (!(z_margin > 0.0))
    throw std::invalid_argument("CalibrationConfig: z_margin must be > 0");
}

double rmse_of_zscores(std::span<const double> z) {
  if (z.empty()) throw std::invalid_argument("rmse_of_zscores: empty input");
  double acc = 0.0;
  for (double v : z) acc += v * v;
  return std::sqrt(acc / static_cast<double>(z.size()));
}

namespace {

CandidateReport sweep_candidate(const CalibrationConfig& cfg, double mv,
                                const MediumSource& medium) {
  CandidateReport report;
  report.mv = mv;

  trajectory::SpiralParams spiral = cfg.spiral;
  spiral.mv = mv;
  report.period = trajectory::periodicity(spiral, cfg.consts);

  const int n_rev = std::max(
      1, static_cast<int>(std::ceil(cfg.explore_distance / spiral.av - 1e-9)));
  const std::vector<Measurement> stream = medium(mv, n_rev);

  signal::LowPassFilter fx(cfg.filter_cutoff), fy(cfg.filter_cutoff);
  std::vector<double> mags;
  mags.reserve(stream.size());
  for (const Measurement& m : stream)
    mags.push_back(std::hypot(fx.step(m.fx), fy.step(m.fy)));

  const int m = cfg.window_m;
  const std::int64_t n = static_cast<std::int64_t>(mags.size());
  report.n_windows = static_cast<int>(n / m);
  if (n < m + 1) {
    std::cerr << "calibrate: MV=" << mv << " run too short (" << n
              << " samples) for a fit/score window pair; excluded\n";
    report.excluded = true;
    return report;
  }

  std::vector<double> z_all;
  gp::GPModel model;
  bool have_model = false;
  for (std::int64_t k = 0; (k + 1) * m < n; ++k) {
    ForcePattern window;
    window.start_index = k * m;
    window.magnitudes.assign(mags.begin() + k * m, mags.begin() + (k + 1) * m);

    if (!have_model || cfg.tune_every_window) {
      gp::KernelParams init = have_model ? model.kernel : gp::KernelParams{};
      if (!have_model) {
        double mean = 0.0, var = 0.0;
        for (double v : window.magnitudes) mean += v;
        mean /= m;
        for (double v : window.magnitudes) var += (v - mean) * (v - mean);
        var /= m;
        init.ess.sigma_p2 = std::max(var, 1e-8);
        init.ess.length_scale = 1.0;
        init.white.sigma_w2 = std::max(0.1 * var, 1e-8);
      }
      init.ess.period = report.period;
      gp::FitOptions opt = cfg.fit_options;
      opt.freeze_period = true;
      model = gp::fit(window, init, 0.0, opt);
      if (!have_model) report.kernel = model.kernel;
      have_model = true;
    } else {
      model = gp::condition(model.kernel, 0.0, window);
    }

    // Score the head of the next pattern, up to the horizon length.
    const std::int64_t score_begin = (k + 1) * m;
    const std::int64_t score_len =
        std::min<std::int64_t>(std::min(cfg.horizon_m_star, m),
                               n - score_begin);
    if (score_len <= 0) break;
    const Eigen::VectorXd t_star = Eigen::VectorXd::LinSpaced(
        score_len, static_cast<double>(score_begin),
        static_cast<double>(score_begin + score_len - 1));
    const gp::Posterior post = gp::predict(model, t_star);
    const Eigen::Map<const Eigen::VectorXd> observed(mags.data() + score_begin,
                                                     score_len);
    const Eigen::VectorXd z = gp::z_scores(post, observed);
    for (Eigen::Index i = 0; i < z.size(); ++i)
      z_all.push_back(cfg.use_abs_z ? std::abs(z[i]) : z[i]);
  }

  if (z_all.empty()) {
    report.excluded = true;
    return report;
  }
  report.rmse = rmse_of_zscores(z_all);
  report.max_z = *std::max_element(z_all.begin(), z_all.end());
  return report;
}

}  // namespace

CalibrationResult calibrate(const CalibrationConfig& config,
                            const MediumSource& medium) {
  config.validate();

  CalibrationResult result;
  result.per_candidate.resize(config.mv_candidates.size());
  if (config.parallel && config.mv_candidates.size() > 1) {
    std::vector<std::future<CandidateReport>> futures;
    futures.reserve(config.mv_candidates.size());
    for (double mv : config.mv_candidates)
      futures.push_back(std::async(std::launch::async, sweep_candidate,
                                   std::cref(config), mv, std::cref(medium)));
    for (std::size_t i = 0; i < futures.size(); ++i)
      result.per_candidate[i] = futures[i].get();
  } else {
    for (std::size_t i = 0; i < config.mv_candidates.size(); ++i)
      result.per_candidate[i] =
          sweep_candidate(config, config.mv_candidates[i], medium);
  }

  const CandidateReport* best = nullptr;
  for (const CandidateReport& report : result.per_candidate) {
    if (report.excluded) continue;
    if (!best || report.rmse < best->rmse ||
        (report.rmse == best->rmse && report.mv < best->mv))
      best = &report;
  }
  if (!best)
    throw std::runtime_error(
        "calibrate: every MV candidate was excluded; nothing to select");

  result.mv_star = best->mv;
  result.t_star = best->period;
  result.z_bar = best->max_z * config.z_margin;
  result.kernel_star = best->kernel;
  return result;
}

}  // namespace grains::calibration
