#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <limits>

#include "grains/force_pattern.hpp"

namespace grains::gp {

// Exp-Sine-Squared (periodic) kernel:
//   k(ti, tj) = sigma_p2 * exp(-(2 / l^2) * sin^2(pi * |ti - tj| / T))
struct EssKernelParams {
  double sigma_p2 = 1.0;      // overall variance, force^2
  double length_scale = 1.0;  // dimensionless
  double period = 1.0;        // samples

  void validate() const;
};

// White-noise kernel, contributing sigma_w2 where the two indices are equal.
struct WhiteKernelParams {
  double sigma_w2 = 0.0;

  void validate() const;
};

struct KernelParams {
  EssKernelParams ess;
  WhiteKernelParams white;
};

double kernel_eval(const EssKernelParams& ess, const WhiteKernelParams& white,
                   double ti, double tj);

// Cross-covariance matrix; entry (i, j) = kernel_eval(a[i], b[j]). The white
// term contributes only where a[i] == b[j].
Eigen::MatrixXd gram(const EssKernelParams& ess, const WhiteKernelParams& white,
                     const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Box bounds for hyperparameter fitting. Period bounds default to
// [0.5, 2] x the initial period when left NaN.
struct FitBounds {
  std::array<double, 2> sigma_p2{1e-4, 1e3};
  std::array<double, 2> length_scale{1e-2, 1e2};
  std::array<double, 2> period{std::numeric_limits<double>::quiet_NaN(),
                               std::numeric_limits<double>::quiet_NaN()};
  std::array<double, 2> sigma_w2{1e-6, 1e1};
};

struct FitOptions {
  FitBounds bounds;
  int max_iterations = 60;
  int n_starts = 3;
  bool freeze_period = false;  // keep period at its initial value
  // Hyperparameters are optimized on at most this many trailing samples of
  // the window; the final conditioning always uses the full window.
  int max_opt_points = 1200;
  std::uint64_t seed = 0;  // drives the extra multi-start perturbations
  double grad_tol = 1e-5;
  // Stop once an accepted step improves the log marginal likelihood by less
  // than this; streaming callers trade precision for latency here.
  double min_improvement = 1e-9;
};

// Fitted 1-D GP over consecutive integer time indices. Immutable after fit;
// predict() is read-only and safe to call concurrently.
struct GPModel {
  KernelParams kernel;
  double obs_noise = 0.0;  // explicit observation noise variance (kept at 0;
                           // the white kernel carries the noise)
  Eigen::VectorXd train_inputs;
  Eigen::VectorXd train_targets;  // raw magnitudes
  double target_mean = 0.0;       // removed before conditioning

  Eigen::MatrixXd chol_lower;  // L with L L^T = K(t,t) + obs_noise I + jitter I
  Eigen::VectorXd alpha;       // (K + obs_noise I)^-1 (targets - mean)
  double jitter = 0.0;
  double log_marginal = std::numeric_limits<double>::quiet_NaN();
  bool converged = true;
};

struct Posterior {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

// Condition a GP with fixed hyperparameters on a force pattern (factorize
// the gram and cache the solve state). Throws if the gram is not SPD after
// the maximum jitter.
GPModel condition(const KernelParams& kernel, double obs_noise,
                  const ForcePattern& pattern);

// Maximize the log marginal likelihood over (sigma_p2, length_scale, period,
// sigma_w2) in log-space within bounds, multi-start quasi-Newton, starting
// from `init`. Targets are de-meaned internally; the window mean is added
// back by predict(). Non-convergence returns the best iterate with
// converged = false.
GPModel fit(const ForcePattern& pattern, const KernelParams& init,
            double obs_noise = 0.0, const FitOptions& options = {});

// Posterior mean/std at the given time indices, evaluated through the
// cached factorization.
Posterior predict(const GPModel& model, const Eigen::VectorXd& test_inputs);

// Standardized residuals (observed - mean) / std, std floored at 1e-8.
Eigen::VectorXd z_scores(const Posterior& posterior,
                         const Eigen::VectorXd& observed);

// Log marginal likelihood of centered targets y at integer-spaced inputs
// t0..t0+n-1, with gradient with respect to the log-parameters
// (log sigma_p2, log length_scale, log period, log sigma_w2).
// Exposed for the finite-difference verification tests.
struct LmlValue {
  double value = -std::numeric_limits<double>::infinity();
  Eigen::Vector4d grad_log = Eigen::Vector4d::Zero();
  double jitter = 0.0;
};
LmlValue log_marginal_likelihood(const KernelParams& kernel, double obs_noise,
                                 const Eigen::VectorXd& y_centered,
                                 bool with_gradient = true);

}  // namespace grains::gp
