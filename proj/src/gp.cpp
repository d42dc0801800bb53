#include "grains/gp.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <optional>
#include <random>
#include <stdexcept>
#include <vector>

namespace grains::gp {

namespace {

constexpr double kJitterStart = 1e-10;
constexpr double kJitterMax = 1e-4;
constexpr double kStdFloor = 1e-8;
constexpr double kLog2Pi = 1.8378770664093453;

double ess_value(const EssKernelParams& ess, double dist) {
  const double s = std::sin(M_PI * dist / ess.period);
  return ess.sigma_p2 *
         std::exp(-2.0 / (ess.length_scale * ess.length_scale) * s * s);
}

// Kernel values over integer lags 0..n-1, plus the derivative profiles with
// respect to log(length_scale) and log(period). The gram of a contiguous
// index window is Toeplitz, so everything reduces to these 1-D profiles.
struct KernelProfiles {
  Eigen::VectorXd ess;
  Eigen::VectorXd d_log_l;
  Eigen::VectorXd d_log_period;
};

KernelProfiles make_profiles(const EssKernelParams& ess, int n,
                             bool with_gradient) {
  KernelProfiles p;
  p.ess.resize(n);
  if (with_gradient) {
    p.d_log_l.resize(n);
    p.d_log_period.resize(n);
  }
  const double l2 = ess.length_scale * ess.length_scale;
  for (int d = 0; d < n; ++d) {
    const double u = M_PI * d / ess.period;
    const double s = std::sin(u);
    const double k = ess.sigma_p2 * std::exp(-2.0 / l2 * s * s);
    p.ess[d] = k;
    if (with_gradient) {
      p.d_log_l[d] = k * 4.0 * s * s / l2;
      p.d_log_period[d] = k * 2.0 / l2 * std::sin(2.0 * u) * u;
    }
  }
  return p;
}

Eigen::MatrixXd toeplitz_gram(const Eigen::VectorXd& profile, double diag_add,
                              int n) {
  Eigen::MatrixXd k(n, n);
  for (int i = 0; i < n; ++i) {
    k(i, i) = profile[0] + diag_add;
    for (int j = i + 1; j < n; ++j) {
      k(i, j) = profile[j - i];
      k(j, i) = profile[j - i];
    }
  }
  return k;
}

struct Factorization {
  Eigen::MatrixXd chol_lower;
  double jitter = 0.0;
};

// Cholesky with adaptive diagonal jitter (1e-10 growing x10 up to 1e-4).
// Returns nothing if the matrix is not SPD even at the maximum jitter.
std::optional<Factorization> cholesky_with_jitter(Eigen::MatrixXd k) {
  double jitter = 0.0;
  while (true) {
    Eigen::LLT<Eigen::MatrixXd> llt(k);
    if (llt.info() == Eigen::Success)
      return Factorization{llt.matrixL(), jitter};
    const double next = jitter == 0.0 ? kJitterStart : jitter * 10.0;
    if (next > kJitterMax) return std::nullopt;
    k.diagonal().array() += next - jitter;
    jitter = next;
  }
}

// Sum of the d-th superdiagonal for each lag d, used to contract Toeplitz
// derivative profiles against alpha*alpha^T - K^-1 in O(n) per parameter.
// Walks columns so the accesses stay contiguous.
Eigen::VectorXd superdiagonal_sums(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  for (int j = 0; j < n; ++j) {
    const double* col = m.col(j).data();
    for (int i = 0; i <= j; ++i) s[j - i] += col[i];
  }
  return s;
}

Eigen::VectorXd autocorrelation_sums(const Eigen::VectorXd& v) {
  const int n = static_cast<int>(v.size());
  Eigen::VectorXd s(n);
  for (int d = 0; d < n; ++d) s[d] = v.head(n - d).dot(v.tail(n - d));
  return s;
}

double contract(const Eigen::VectorXd& diag_sums,
                const Eigen::VectorXd& profile) {
  double acc = diag_sums[0] * profile[0];
  for (int d = 1; d < diag_sums.size(); ++d)
    acc += 2.0 * diag_sums[d] * profile[d];
  return acc;
}

struct LogParams {
  // log(sigma_p2), log(length_scale), log(period), log(sigma_w2)
  Eigen::Vector4d x;

  KernelParams to_kernel() const {
    KernelParams k;
    k.ess.sigma_p2 = std::exp(x[0]);
    k.ess.length_scale = std::exp(x[1]);
    k.ess.period = std::exp(x[2]);
    k.white.sigma_w2 = std::exp(x[3]);
    return k;
  }
};

// Bounded quasi-Newton (L-BFGS with projection onto the box) minimizing the
// negative log marginal likelihood over the active log-parameters. The
// gradient is only requested at accepted iterates; line-search probes are
// value-only.
class BoxedLbfgs {
 public:
  using Objective = std::function<bool(const Eigen::VectorXd&, double&,
                                       Eigen::VectorXd&, bool)>;

  BoxedLbfgs(Eigen::VectorXd lo, Eigen::VectorXd hi, Objective fn)
      : lo_(std::move(lo)), hi_(std::move(hi)), fn_(std::move(fn)) {}

  struct Result {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    bool converged = false;
    bool evaluated = false;
  };

  Result minimize(Eigen::VectorXd x, int max_iterations, double tol,
                  double min_improvement) const {
    x = clamp(x);
    Result best;
    double f;
    Eigen::VectorXd g(x.size());
    if (!fn_(x, f, g, true)) return best;
    best = {x, f, false, true};

    std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;
    Eigen::VectorXd unused;
    for (int iter = 0; iter < max_iterations; ++iter) {
      const Eigen::VectorXd pg = x - clamp(x - g);
      if (pg.lpNorm<Eigen::Infinity>() < tol) {
        best.converged = true;
        break;
      }
      Eigen::VectorXd dir = -two_loop(memory, g);
      if (dir.dot(g) >= 0.0) dir = -g;  // not a descent direction

      double step = 1.0;
      bool accepted = false;
      Eigen::VectorXd xt(x.size());
      double ft;
      for (int ls = 0; ls < 30; ++ls) {
        xt = clamp(x + step * dir);
        if ((xt - x).lpNorm<Eigen::Infinity>() < 1e-14) break;
        if (fn_(xt, ft, unused, false) && ft <= f + 1e-4 * g.dot(xt - x)) {
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        // No admissible step along this direction; projected gradient is the
        // remaining stopping evidence.
        best.converged = pg.lpNorm<Eigen::Infinity>() < 1e2 * tol;
        break;
      }
      Eigen::VectorXd gt(x.size());
      if (!fn_(xt, ft, gt, true)) break;
      const Eigen::VectorXd s = xt - x;
      const Eigen::VectorXd y = gt - g;
      if (s.dot(y) > 1e-12) {
        memory.emplace_back(s, y);
        if (memory.size() > 8) memory.pop_front();
      }
      const double improvement = f - ft;
      x = xt;
      f = ft;
      g = gt;
      if (f < best.f) {
        best.x = x;
        best.f = f;
      }
      if (improvement < min_improvement) {
        best.converged = true;
        break;
      }
    }
    return best;
  }

 private:
  Eigen::VectorXd clamp(Eigen::VectorXd v) const {
    return v.cwiseMax(lo_).cwiseMin(hi_);
  }

  static Eigen::VectorXd two_loop(
      const std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& memory,
      const Eigen::VectorXd& g) {
    Eigen::VectorXd q = g;
    if (memory.empty()) return q;
    std::vector<double> a(memory.size());
    for (int i = static_cast<int>(memory.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = memory[i];
      a[i] = s.dot(q) / y.dot(s);
      q -= a[i] * y;
    }
    const auto& [s_last, y_last] = memory.back();
    q *= s_last.dot(y_last) / y_last.dot(y_last);
    for (std::size_t i = 0; i < memory.size(); ++i) {
      const auto& [s, y] = memory[i];
      const double b = y.dot(q) / y.dot(s);
      q += (a[i] - b) * s;
    }
    return q;
  }

  Eigen::VectorXd lo_, hi_;
  Objective fn_;
};

}  // namespace

void EssKernelParams::validate() const {
  if (!(sigma_p2 > 0.0))
    throw std::invalid_argument("EssKernelParams: sigma_p2 must be > 0");
  if (!(length_scale > 0.0))
    throw std::invalid_argument("EssKernelParams: length_scale must be > 0");
  if (!(period > 0.0))
    throw std::invalid_argument("EssKernelParams: period must be > 0");
}

void WhiteKernelParams::validate() const {
  if (!(sigma_w2 >= 0.0))
    throw std::invalid_argument("WhiteKernelParams: sigma_w2 must be >= 0");
}

double kernel_eval(const EssKernelParams& ess, const WhiteKernelParams& white,
                   double ti, double tj) {
  double v = ess_value(ess, std::abs(ti - tj));
  if (ti == tj) v += white.sigma_w2;
  return v;
}

Eigen::MatrixXd gram(const EssKernelParams& ess, const WhiteKernelParams& white,
                     const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::MatrixXd k(a.size(), b.size());
  for (Eigen::Index i = 0; i < a.size(); ++i)
    for (Eigen::Index j = 0; j < b.size(); ++j)
      k(i, j) = kernel_eval(ess, white, a[i], b[j]);
  return k;
}

LmlValue log_marginal_likelihood(const KernelParams& kernel, double obs_noise,
                                 const Eigen::VectorXd& y_centered,
                                 bool with_gradient) {
  kernel.ess.validate();
  kernel.white.validate();
  const int n = static_cast<int>(y_centered.size());
  const KernelProfiles profiles = make_profiles(kernel.ess, n, with_gradient);
  const auto fact = cholesky_with_jitter(
      toeplitz_gram(profiles.ess, kernel.white.sigma_w2 + obs_noise, n));
  if (!fact) return {};

  const auto& l = fact->chol_lower;
  Eigen::VectorXd alpha = l.triangularView<Eigen::Lower>().solve(y_centered);
  const double quad = alpha.squaredNorm();
  l.triangularView<Eigen::Lower>().transpose().solveInPlace(alpha);

  LmlValue out;
  out.jitter = fact->jitter;
  out.value = -0.5 * quad - l.diagonal().array().log().sum() -
              0.5 * n * kLog2Pi;
  if (!with_gradient) return out;

  // d LML / d theta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta); both dK and K
  // are Toeplitz here, so only superdiagonal sums are needed.
  Eigen::MatrixXd w = Eigen::MatrixXd::Identity(n, n);
  l.triangularView<Eigen::Lower>().solveInPlace(w);
  Eigen::MatrixXd kinv(n, n);
  kinv.setZero();
  kinv.selfadjointView<Eigen::Lower>().rankUpdate(w.transpose());
  kinv = kinv.selfadjointView<Eigen::Lower>();

  const Eigen::VectorXd s_diff =
      autocorrelation_sums(alpha) - superdiagonal_sums(kinv);
  out.grad_log[0] = 0.5 * contract(s_diff, profiles.ess);
  out.grad_log[1] = 0.5 * contract(s_diff, profiles.d_log_l);
  out.grad_log[2] = 0.5 * contract(s_diff, profiles.d_log_period);
  out.grad_log[3] = 0.5 * s_diff[0] * kernel.white.sigma_w2;
  return out;
}

GPModel condition(const KernelParams& kernel, double obs_noise,
                  const ForcePattern& pattern) {
  kernel.ess.validate();
  kernel.white.validate();
  const int n = static_cast<int>(pattern.size());
  if (n < 1) throw std::invalid_argument("condition: empty force pattern");

  GPModel model;
  model.kernel = kernel;
  model.obs_noise = obs_noise;
  model.train_inputs = Eigen::VectorXd::LinSpaced(
      n, static_cast<double>(pattern.start_index),
      static_cast<double>(pattern.start_index + n - 1));
  model.train_targets =
      Eigen::Map<const Eigen::VectorXd>(pattern.magnitudes.data(), n);
  model.target_mean = model.train_targets.mean();

  const KernelProfiles profiles = make_profiles(kernel.ess, n, false);
  auto fact = cholesky_with_jitter(
      toeplitz_gram(profiles.ess, kernel.white.sigma_w2 + obs_noise, n));
  if (!fact)
    throw std::runtime_error(
        "gp: gram matrix not positive definite after maximum jitter");
  model.chol_lower = std::move(fact->chol_lower);
  model.jitter = fact->jitter;

  const Eigen::VectorXd yc =
      model.train_targets.array() - model.target_mean;
  Eigen::VectorXd v = model.chol_lower.triangularView<Eigen::Lower>().solve(yc);
  const double quad = v.squaredNorm();
  model.log_marginal = -0.5 * quad -
                       model.chol_lower.diagonal().array().log().sum() -
                       0.5 * n * kLog2Pi;
  model.chol_lower.triangularView<Eigen::Lower>().transpose().solveInPlace(v);
  model.alpha = std::move(v);
  return model;
}

GPModel fit(const ForcePattern& pattern, const KernelParams& init,
            double obs_noise, const FitOptions& options) {
  init.ess.validate();
  init.white.validate();
  if (pattern.size() < 2)
    throw std::invalid_argument("fit: need at least 2 samples");

  FitBounds bounds = options.bounds;
  if (std::isnan(bounds.period[0])) bounds.period[0] = 0.5 * init.ess.period;
  if (std::isnan(bounds.period[1])) bounds.period[1] = 2.0 * init.ess.period;

  const std::array<std::array<double, 2>, 4> box{
      bounds.sigma_p2, bounds.length_scale, bounds.period, bounds.sigma_w2};
  for (const auto& b : box)
    if (!(b[0] > 0.0) || !(b[1] >= b[0]))
      throw std::invalid_argument("fit: invalid bounds");

  Eigen::Vector4d lo, hi, x0;
  const std::array<double, 4> init_vals{init.ess.sigma_p2, init.ess.length_scale,
                                        init.ess.period, init.white.sigma_w2};
  std::array<bool, 4> active{};
  for (int i = 0; i < 4; ++i) {
    lo[i] = std::log(box[i][0]);
    hi[i] = std::log(box[i][1]);
    x0[i] = std::clamp(std::log(std::max(init_vals[i], 1e-300)), lo[i], hi[i]);
    active[i] = hi[i] > lo[i];
  }
  if (options.freeze_period) active[2] = false;

  std::vector<int> dims;
  for (int i = 0; i < 4; ++i)
    if (active[i]) dims.push_back(i);

  const int n = static_cast<int>(pattern.size());
  const int n_opt = std::min(n, std::max(2, options.max_opt_points));
  Eigen::VectorXd y_opt = Eigen::Map<const Eigen::VectorXd>(
      pattern.magnitudes.data() + (n - n_opt), n_opt);
  y_opt.array() -= y_opt.mean();

  Eigen::Vector4d best_x = x0;
  bool best_converged = false;
  bool any_evaluated = false;
  double best_f = std::numeric_limits<double>::infinity();

  if (!dims.empty()) {
    auto expand = [&](const Eigen::VectorXd& z) {
      Eigen::Vector4d full = x0;
      for (std::size_t i = 0; i < dims.size(); ++i) full[dims[i]] = z[i];
      return full;
    };
    auto objective = [&](const Eigen::VectorXd& z, double& f,
                         Eigen::VectorXd& g, bool need_grad) {
      const LogParams p{expand(z)};
      const LmlValue lml =
          log_marginal_likelihood(p.to_kernel(), obs_noise, y_opt, need_grad);
      if (!std::isfinite(lml.value)) return false;
      f = -lml.value;
      if (need_grad) {
        g.resize(dims.size());
        for (std::size_t i = 0; i < dims.size(); ++i)
          g[i] = -lml.grad_log[dims[i]];
      }
      return true;
    };

    Eigen::VectorXd lo_a(dims.size()), hi_a(dims.size()), z0(dims.size());
    for (std::size_t i = 0; i < dims.size(); ++i) {
      lo_a[i] = lo[dims[i]];
      hi_a[i] = hi[dims[i]];
      z0[i] = x0[dims[i]];
    }
    const BoxedLbfgs solver(lo_a, hi_a, objective);

    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> perturb(-0.7, 0.7);
    for (int s = 0; s < std::max(1, options.n_starts); ++s) {
      Eigen::VectorXd z = z0;
      if (s > 0)
        for (std::size_t i = 0; i < dims.size(); ++i)
          z[i] += (dims[i] == 2 ? 0.15 : 1.0) * perturb(rng);
      const auto res = solver.minimize(z, options.max_iterations,
                                       options.grad_tol,
                                       options.min_improvement);
      if (!res.evaluated) continue;
      any_evaluated = true;
      if (res.f < best_f) {
        best_f = res.f;
        best_x = expand(res.x);
        best_converged = res.converged;
      }
    }
    if (!any_evaluated)
      throw std::runtime_error(
          "gp: gram matrix not positive definite after maximum jitter");
  }

  KernelParams fitted;
  auto final_value = [&](int i) {
    if (active[i]) return std::exp(best_x[i]);
    if (box[i][0] == box[i][1]) return box[i][0];  // pinned exactly
    return std::clamp(init_vals[i], box[i][0], box[i][1]);
  };
  fitted.ess.sigma_p2 = final_value(0);
  fitted.ess.length_scale = final_value(1);
  fitted.ess.period = options.freeze_period ? init.ess.period : final_value(2);
  fitted.white.sigma_w2 = final_value(3);

  GPModel model = condition(fitted, obs_noise, pattern);
  model.converged = dims.empty() ? true : best_converged;
  return model;
}

namespace {

bool integer_valued(const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (v[i] != std::floor(v[i])) return false;
  return true;
}

// Cross-gram via a lag profile when all indices are integers; the ESS kernel
// depends only on |ti - tj|.
Eigen::MatrixXd cross_gram(const KernelParams& kernel,
                           const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() * b.size() > 4096 && integer_valued(a) && integer_valued(b)) {
    const double lo = std::min(a.minCoeff(), b.minCoeff());
    const double hi = std::max(a.maxCoeff(), b.maxCoeff());
    const auto span = static_cast<std::int64_t>(hi - lo);
    if (span < 1'000'000) {
      Eigen::VectorXd profile(span + 1);
      for (std::int64_t d = 0; d <= span; ++d)
        profile[d] = ess_value(kernel.ess, static_cast<double>(d));
      Eigen::MatrixXd k(a.size(), b.size());
      for (Eigen::Index j = 0; j < b.size(); ++j)
        for (Eigen::Index i = 0; i < a.size(); ++i) {
          const auto d = static_cast<std::int64_t>(std::abs(a[i] - b[j]));
          k(i, j) = profile[d] + (a[i] == b[j] ? kernel.white.sigma_w2 : 0.0);
        }
      return k;
    }
  }
  return gram(kernel.ess, kernel.white, a, b);
}

}  // namespace

Posterior predict(const GPModel& model, const Eigen::VectorXd& test_inputs) {
  Posterior post;
  const Eigen::Index m = test_inputs.size();
  post.mean.resize(m);
  post.std.resize(m);
  if (m == 0) return post;
  if (model.chol_lower.rows() == 0)
    throw std::runtime_error("predict: model is not fitted");

  const Eigen::MatrixXd ks = cross_gram(model.kernel, test_inputs,
                                        model.train_inputs);
  post.mean = ks * model.alpha;
  post.mean.array() += model.target_mean;

  const Eigen::MatrixXd w =
      model.chol_lower.triangularView<Eigen::Lower>().solve(ks.transpose());
  for (Eigen::Index j = 0; j < m; ++j) {
    const double prior = kernel_eval(model.kernel.ess, model.kernel.white,
                                     test_inputs[j], test_inputs[j]);
    post.std[j] = std::sqrt(std::max(prior - w.col(j).squaredNorm(), 0.0));
  }
  return post;
}

Eigen::VectorXd z_scores(const Posterior& posterior,
                         const Eigen::VectorXd& observed) {
  if (posterior.mean.size() != observed.size())
    throw std::invalid_argument("z_scores: length mismatch");
  return (observed - posterior.mean).array() /
         posterior.std.array().max(kStdFloor);
}

}  // namespace grains::gp
