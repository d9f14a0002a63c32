#pragma once

// Nonlinear fits of the decay models to delay histograms.
//
// Expected counts per bin are A * w * Simpson-average(shape) + b, where shape
// is the model with A = 1, b = 0 and w the bin width in ns. A is therefore
// the total number of proper counts and b a per-bin background.
//
// The optimizer is Levenberg-Marquardt on the Poisson deviance (or weighted
// least squares) with expected-information curvature. A, r, tau_n, tau_r and
// t0 are optimized in log space; b is kept >= 0 by projection. Jacobians come
// from forward-mode dual numbers.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "heraldsim/decay_model.hpp"
#include "heraldsim/dual.hpp"
#include "heraldsim/tagstream.hpp"

namespace heraldsim {

enum class ModelKind { heralded_closed, heralded_sum, periodic };
enum class Loss { poisson_mle, weighted_lsq };

inline std::string_view to_string(ModelKind m) {
  switch (m) {
    case ModelKind::heralded_closed: return "heralded_closed";
    case ModelKind::heralded_sum: return "heralded_sum";
    case ModelKind::periodic: return "periodic";
  }
  return "?";
}
inline std::optional<ModelKind> parse_model(std::string_view s) {
  if (s == "heralded_closed") return ModelKind::heralded_closed;
  if (s == "heralded_sum") return ModelKind::heralded_sum;
  if (s == "periodic") return ModelKind::periodic;
  return std::nullopt;
}
inline std::string_view to_string(Loss l) {
  return l == Loss::poisson_mle ? "poisson_mle" : "weighted_lsq";
}
inline std::optional<Loss> parse_loss(std::string_view s) {
  if (s == "poisson_mle") return Loss::poisson_mle;
  if (s == "weighted_lsq") return Loss::weighted_lsq;
  return std::nullopt;
}

enum class Param : std::size_t { amplitude, background, ratio, tau_n, tau_r, pulse_period };
inline constexpr std::size_t kParamCount = 6;
using ParamVector = std::array<double, kParamCount>;
inline constexpr std::array<std::string_view, kParamCount> kParamNames{"A",     "b",     "r",
                                                                       "tau_n", "tau_r", "t0"};

inline constexpr std::size_t index(Param p) { return static_cast<std::size_t>(p); }
inline std::string_view to_string(Param p) { return kParamNames[index(p)]; }
inline std::optional<Param> parse_param(std::string_view s) {
  for (std::size_t i = 0; i < kParamCount; ++i) {
    if (kParamNames[i] == s) return static_cast<Param>(i);
  }
  return std::nullopt;
}

inline ParamVector to_vector(const DecayParams& p) {
  return {p.amplitude,       p.background,      p.accidental_ratio,
          p.lifetimes.tau_n, p.lifetimes.tau_r, p.pulse_period};
}
inline DecayParams from_vector(const ParamVector& v) {
  return {v[0], v[1], v[2], {v[3], v[4]}, v[5]};
}
inline double get(const DecayParams& p, Param which) { return to_vector(p)[index(which)]; }

/// Histogram counts on a ns time axis. Counts may be non-integer (e.g. an
/// expected-count curve).
struct BinnedData {
  double t_min = 0.0;      ///< ns
  double bin_width = 0.0;  ///< ns
  std::vector<double> counts;

  std::size_t size() const { return counts.size(); }
  double edge(std::size_t i) const { return t_min + bin_width * static_cast<double>(i); }
  double t_max() const { return edge(counts.size()); }
};

inline BinnedData to_binned(const Histogram& h) {
  BinnedData d{ps_to_ns(static_cast<double>(h.t_min)), ps_to_ns(static_cast<double>(h.bin_width)),
               {}};
  d.counts.assign(h.counts.begin(), h.counts.end());
  return d;
}

struct FitProblem {
  BinnedData data;
  ModelKind model = ModelKind::heralded_closed;
  std::set<Param> fixed{Param::pulse_period};
  std::optional<DecayParams> init;
  double pulse_period = 12.5;  ///< t0 (ns) for the initial guess when init is empty
  Loss loss = Loss::poisson_mle;
  int series_terms = kDefaultSeriesTerms;  ///< heralded_sum only
  int max_iterations = 500;
  double tolerance = 1e-9;  ///< on the Newton decrement g^T H^-1 g
};

struct FitResult {
  DecayParams params;
  ParamVector std_errors{};  ///< NaN for fixed parameters or singular curvature
  Eigen::Matrix<double, 6, 6> covariance = Eigen::Matrix<double, 6, 6>::Zero();
  bool covariance_available = false;
  double loss_value = 0.0;  ///< deviance or chi^2
  int dof = 0;
  double statistic = 0.0;   ///< loss_value / dof
  double decrement = 0.0;   ///< Newton decrement at the returned point
  int n_iter = 0;
  bool converged = false;
  std::vector<double> loss_trace;  ///< loss after every accepted step

  double std_error(Param p) const { return std_errors[index(p)]; }
};

/// Raised when the histogram shows no usable decay peak. Distinct from a fit
/// that runs but does not converge (FitResult::converged == false).
class InitializationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Binned model evaluation

namespace detail {

template <class T>
T model_shape(ModelKind m, double t_ns, const std::array<T, kParamCount>& x, int terms) {
  const T t(t_ns);
  const T one(1.0);
  const T zero(0.0);
  switch (m) {
    case ModelKind::heralded_closed:
      return model::heralded_closed(t, one, zero, x[2], x[3], x[4], x[5]);
    case ModelKind::heralded_sum:
      return model::heralded_sum(t, one, zero, x[2], x[3], x[4], x[5], terms);
    case ModelKind::periodic:
      return model::periodic(t, one, zero, x[3], x[4], x[5]);
  }
  return zero;
}

}  // namespace detail

/// Expected counts per bin (Simpson rule on edges and midpoint).
template <class T>
std::vector<T> expected_counts(ModelKind m, const BinnedData& data,
                               const std::array<T, kParamCount>& x,
                               int terms = kDefaultSeriesTerms) {
  const std::size_t n = data.size();
  std::vector<T> edges(n + 1);
  for (std::size_t i = 0; i <= n; ++i) edges[i] = detail::model_shape(m, data.edge(i), x, terms);
  std::vector<T> mu(n);
  const double w = data.bin_width;
  for (std::size_t i = 0; i < n; ++i) {
    const T mid = detail::model_shape(m, data.edge(i) + 0.5 * w, x, terms);
    mu[i] = x[0] * (w / 6.0) * (edges[i] + 4.0 * mid + edges[i + 1]) + x[1];
  }
  return mu;
}

inline std::vector<double> expected_counts(ModelKind m, const BinnedData& data,
                                           const DecayParams& p,
                                           int terms = kDefaultSeriesTerms) {
  return expected_counts<double>(m, data, to_vector(p), terms);
}

/// Expected counts and their Jacobian with respect to the natural
/// parameters (A, b, r, tau_n, tau_r, t0), one row per bin.
inline std::vector<double> expected_counts_jacobian(ModelKind m, const BinnedData& data,
                                                    const DecayParams& p, Eigen::MatrixXd& jac,
                                                    int terms = kDefaultSeriesTerms) {
  using D = Dual<kParamCount>;
  const ParamVector v = to_vector(p);
  std::array<D, kParamCount> x;
  for (std::size_t j = 0; j < kParamCount; ++j) x[j] = D::variable(v[j], j);
  const auto mu_d = expected_counts<D>(m, data, x, terms);
  std::vector<double> mu(mu_d.size());
  jac.resize(static_cast<Eigen::Index>(mu_d.size()), kParamCount);
  for (std::size_t i = 0; i < mu_d.size(); ++i) {
    mu[i] = mu_d[i].v;
    for (std::size_t j = 0; j < kParamCount; ++j) {
      jac(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = mu_d[i].d[j];
    }
  }
  return mu;
}

/// Poisson deviance 2 sum[mu - y + y ln(y/mu)] or chi^2 with variance max(y, 1).
inline double loss_value(Loss loss, const std::vector<double>& y, const std::vector<double>& mu) {
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (loss == Loss::poisson_mle) {
      if (y[i] > 0.0) {
        if (!(mu[i] > 0.0)) return std::numeric_limits<double>::infinity();
        s += 2.0 * (mu[i] - y[i] + y[i] * std::log(y[i] / mu[i]));
      } else {
        s += 2.0 * mu[i];
      }
    } else {
      const double r = y[i] - mu[i];
      s += r * r / std::max(y[i], 1.0);
    }
  }
  return std::isfinite(s) ? s : std::numeric_limits<double>::infinity();
}

/// Loss gradient and expected-information curvature (both in loss units)
/// with respect to the natural parameters.
inline double loss_derivatives(Loss loss, const std::vector<double>& y,
                               const std::vector<double>& mu, const Eigen::MatrixXd& jac,
                               Eigen::VectorXd& grad, Eigen::MatrixXd& curvature) {
  const auto n = static_cast<Eigen::Index>(y.size());
  Eigen::VectorXd dl(n);
  Eigen::VectorXd w(n);
  double mu_max = 0.0;
  for (double m : mu) mu_max = std::max(mu_max, m);
  const double floor = std::max(1e-300, 1e-12 * mu_max);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (loss == Loss::poisson_mle) {
      const double m = std::max(mu[k], floor);
      dl(i) = 2.0 * (1.0 - y[k] / m);
      w(i) = 2.0 / m;
    } else {
      const double var = std::max(y[k], 1.0);
      dl(i) = -2.0 * (y[k] - mu[k]) / var;
      w(i) = 2.0 / var;
    }
  }
  grad = jac.transpose() * dl;
  curvature = jac.transpose() * w.asDiagonal() * jac;
  return loss_value(loss, y, mu);
}

// ---------------------------------------------------------------------------
// Initial guess

namespace detail {

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

/// Slope of a weighted least-squares line through (x, y).
inline std::optional<double> weighted_slope(const std::vector<double>& x,
                                            const std::vector<double>& y,
                                            const std::vector<double>& w) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    sx += w[i] * x[i];
    sy += w[i] * y[i];
    sxx += w[i] * x[i] * x[i];
    sxy += w[i] * x[i] * y[i];
  }
  const double det = sw * sxx - sx * sx;
  if (x.size() < 2 || !(det > 0.0)) return std::nullopt;
  return (sw * sxy - sx * sy) / det;
}

}  // namespace detail

/// Heuristic starting point for fit().
///
/// b: median of pre-trigger bins (heralded) or a fraction of the minimum
/// (periodic). tau_r: log-linear regression of (y - b) on the tail after the
/// peak, with an offset-free three-block estimate preferred when it is
/// consistent. tau_n: peak time / 3. A: from the peak height. r: excess
/// pre-trigger area over the main-peak area.
inline DecayParams initial_guess(const BinnedData& data, ModelKind model,
                                 double pulse_period = 12.5) {
  if (data.size() < 4) throw InitializationError("histogram too short to initialize");
  if (!(pulse_period > 0.0)) throw std::invalid_argument("pulse period must be > 0");
  const double w = data.bin_width;
  const bool heralded = model != ModelKind::periodic;
  auto center = [&](std::size_t i) { return data.edge(i) + 0.5 * w; };

  std::vector<double> pre;
  double y_min = data.counts[0];
  for (std::size_t i = 0; i < data.size(); ++i) {
    y_min = std::min(y_min, data.counts[i]);
    if (data.edge(i + 1) <= 0.0) pre.push_back(data.counts[i]);
  }
  double b = heralded && !pre.empty() ? detail::median(pre) : 0.1 * y_min;

  // Main peak within the first period after the trigger.
  const double main_end = heralded ? pulse_period : data.t_max();
  std::size_t i_peak = data.size();
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.edge(i) < 0.0 || data.edge(i + 1) > main_end + 1e-9) continue;
    if (i_peak == data.size() || data.counts[i] > data.counts[i_peak]) i_peak = i;
  }
  if (i_peak == data.size()) throw InitializationError("no bins after the trigger");
  const double peak = data.counts[i_peak];
  // Significance of the excess: main-window area over the pre-trigger
  // baseline (heralded) or early half over late half of the period.
  double excess = 0.0, var = 0.0;
  if (heralded) {
    std::size_t n_main = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.edge(i) < 0.0 || data.edge(i + 1) > main_end + 1e-9) continue;
      excess += data.counts[i] - b;
      var += std::max(data.counts[i], 1.0);
      ++n_main;
    }
    if (!pre.empty()) {
      const double n = static_cast<double>(n_main);
      var += n * n * (std::numbers::pi / 2.0) * std::max(b, 1.0) / static_cast<double>(pre.size());
    }
  } else {
    const std::size_t half = data.size() / 2;
    for (std::size_t i = 0; i < 2 * half; ++i) {
      excess += i < half ? data.counts[i] : -data.counts[i];
      var += std::max(data.counts[i], 1.0);
    }
  }
  if (excess < 3.0 * std::sqrt(var)) {
    throw InitializationError("no peak at least 3 sigma above background");
  }
  const double t_peak = std::max(center(i_peak), 0.5 * w);

  // Tail region: from a few rise times after the peak to the period end.
  const double tail_begin = t_peak + std::max(2.0 * t_peak, 2.0 * w);
  std::vector<std::size_t> tail;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.edge(i) >= tail_begin && data.edge(i + 1) <= main_end + 1e-9) tail.push_back(i);
  }

  double tau_r = std::nan("");
  if (tail.size() >= 6) {
    const std::size_t m = tail.size() / 3;
    double s[3] = {0, 0, 0};
    for (std::size_t k = 0; k < 3 * m; ++k) s[k / m] += data.counts[tail[k]];
    const double q = (s[1] - s[2]) / (s[0] - s[1]);
    if (q > 0.0 && q < 1.0) tau_r = -(static_cast<double>(m) * w) / std::log(q);
  }
  {
    std::vector<double> x, ly, wt;
    for (std::size_t i : tail) {
      const double excess = data.counts[i] - b;
      if (excess > 0.0) {
        x.push_back(center(i));
        ly.push_back(std::log(excess));
        wt.push_back(excess);
      }
    }
    const auto slope = detail::weighted_slope(x, ly, wt);
    const double regression = slope && *slope < 0.0 ? -1.0 / *slope : std::nan("");
    if (!std::isfinite(tau_r)) tau_r = regression;
  }
  if (!std::isfinite(tau_r) || tau_r <= 0.0) tau_r = std::max((main_end - t_peak) / 3.0, w);

  double tau_n = std::clamp(t_peak / 3.0, 0.25 * w, 0.5 * tau_r);

  DecayParams p;
  p.pulse_period = pulse_period;
  p.lifetimes = {tau_n, tau_r};
  const double shape_at_peak =
      heralded ? model::cascade_pdf(t_peak, tau_n, tau_r)
               : model::periodic(t_peak, 1.0, 0.0, tau_n, tau_r, pulse_period);
  p.amplitude = std::max(peak - b, 1.0) / (w * shape_at_peak);

  p.accidental_ratio = 0.0;
  if (heralded) {
    double side = 0.0, main = 0.0, floor = pre.empty() ? b : pre[0];
    for (double v : pre) floor = std::min(floor, v);
    std::size_t n_main = 0;
    for (std::size_t i = 0; i < data.size(); ++i) {
      if (data.edge(i) >= -pulse_period && data.edge(i + 1) <= 0.0) side += data.counts[i] - floor;
      if (data.edge(i) >= 0.0 && data.edge(i + 1) <= pulse_period + 1e-9) {
        main += data.counts[i];
        ++n_main;
      }
    }
    main -= floor * static_cast<double>(n_main);
    p.accidental_ratio = main > 0.0 ? std::clamp(side / main, 1e-3, 10.0) : 1e-3;
  }
  p.background = std::max(b, 0.0);
  return p;
}

// ---------------------------------------------------------------------------
// Fit

namespace detail {

inline bool log_scaled(std::size_t j) { return j != index(Param::background); }

inline void check_problem(const FitProblem& pr, const DecayParams& start) {
  if (pr.data.size() < 2 || !(pr.data.bin_width > 0.0)) {
    throw std::invalid_argument("fit needs at least two bins of positive width");
  }
  for (double y : pr.data.counts) {
    if (!(y >= 0.0)) throw std::invalid_argument("bin counts must be non-negative");
  }
  validate(start);
  if (pr.model == ModelKind::heralded_closed) {
    const auto w = ModelWindow::heralded(start.pulse_period);
    if (pr.data.t_min < w.t_min - 1e-9 || pr.data.t_max() > w.t_max + 1e-9) {
      throw std::invalid_argument("histogram range exceeds the closed-form window [-t0, 3t0]");
    }
  }
  if (pr.model == ModelKind::periodic &&
      (pr.data.t_min < -1e-9 || pr.data.t_max() > start.pulse_period + 1e-9)) {
    throw std::invalid_argument("periodic fit needs a histogram inside [0, t0]");
  }
}

struct Evaluation {
  std::vector<double> mu;
  Eigen::MatrixXd jac;
  Eigen::VectorXd grad;
  Eigen::MatrixXd curv;
  double loss = 0.0;
};

inline Evaluation evaluate(const FitProblem& pr, const ParamVector& x) {
  Evaluation e;
  e.mu = expected_counts_jacobian(pr.model, pr.data, from_vector(x), e.jac, pr.series_terms);
  e.loss = loss_derivatives(pr.loss, pr.data.counts, e.mu, e.jac, e.grad, e.curv);
  return e;
}

inline double loss_at(const FitProblem& pr, const ParamVector& x) {
  return loss_value(pr.loss, pr.data.counts,
                    expected_counts<double>(pr.model, pr.data, x, pr.series_terms));
}

}  // namespace detail

/// Minimizes the selected loss over the free parameters.
///
/// Never throws for non-convergence: the result carries converged = false.
/// The reported lifetimes are ordered tau_n <= tau_r.
inline FitResult fit(const FitProblem& problem) {
  const DecayParams start = problem.init ? *problem.init
                                         : initial_guess(problem.data, problem.model,
                                                         problem.pulse_period);
  std::set<Param> fixed = problem.fixed;
  if (problem.model == ModelKind::periodic) fixed.insert(Param::ratio);
  detail::check_problem(problem, start);

  std::vector<std::size_t> free;
  for (std::size_t j = 0; j < kParamCount; ++j) {
    if (!fixed.count(static_cast<Param>(j))) free.push_back(j);
  }
  ParamVector x = to_vector(start);
  for (std::size_t j : free) {
    if (detail::log_scaled(j) && !(x[j] > 0.0)) {
      if (j == index(Param::ratio)) {
        x[j] = 1e-3;
      } else {
        throw std::invalid_argument("free parameter " + std::string(kParamNames[j]) +
                                    " must start positive");
      }
    }
  }

  FitResult result;
  auto ev = detail::evaluate(problem, x);
  if (!std::isfinite(ev.loss)) {
    throw InitializationError("starting point predicts zero counts where data are nonzero");
  }
  result.loss_trace.push_back(ev.loss);

  const auto nf = static_cast<Eigen::Index>(free.size());
  double lambda = 1e-3;
  bool stuck = false;
  auto scale_of = [&](std::size_t j) { return detail::log_scaled(j) ? x[j] : 1.0; };

  for (int iter = 0; iter < problem.max_iterations && nf > 0; ++iter) {
    // Active set: b stays clamped at zero while the gradient pushes it down.
    std::vector<std::size_t> active;
    for (std::size_t j : free) {
      if (j == index(Param::background) && x[j] <= 0.0 &&
          ev.grad(static_cast<Eigen::Index>(j)) > 0.0) {
        continue;
      }
      active.push_back(j);
    }
    const auto na = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd g(na);
    Eigen::MatrixXd h(na, na);
    for (Eigen::Index a = 0; a < na; ++a) {
      const auto ja = static_cast<Eigen::Index>(active[static_cast<std::size_t>(a)]);
      g(a) = ev.grad(ja) * scale_of(active[static_cast<std::size_t>(a)]);
      for (Eigen::Index c = 0; c < na; ++c) {
        const auto jc = static_cast<Eigen::Index>(active[static_cast<std::size_t>(c)]);
        h(a, c) = ev.curv(ja, jc) * scale_of(active[static_cast<std::size_t>(a)]) *
                  scale_of(active[static_cast<std::size_t>(c)]);
      }
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    result.decrement = na == 0 ? 0.0 : std::abs(g.dot(ldlt.solve(g)));
    if (!std::isfinite(result.decrement)) result.decrement = std::numeric_limits<double>::infinity();
    if (result.decrement < problem.tolerance) {
      result.converged = true;
      break;
    }
    if (stuck) break;

    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = h;
      for (Eigen::Index a = 0; a < na; ++a) damped(a, a) += lambda * std::max(h(a, a), 1e-300);
      const Eigen::VectorXd step = damped.ldlt().solve(-g);
      ParamVector trial = x;
      for (Eigen::Index a = 0; a < na; ++a) {
        const std::size_t j = active[static_cast<std::size_t>(a)];
        const double s = std::clamp(step(a), -20.0, 20.0);
        trial[j] = detail::log_scaled(j) ? x[j] * std::exp(s) : std::max(0.0, x[j] + step(a));
      }
      const double trial_loss = detail::loss_at(problem, trial);
      if (std::isfinite(trial_loss) && trial_loss <= ev.loss) {
        x = trial;
        ev = detail::evaluate(problem, x);
        result.loss_trace.push_back(ev.loss);
        lambda = std::max(lambda / 3.0, 1e-12);
        accepted = true;
      } else {
        lambda *= 4.0;
        if (lambda > 1e16) {
          stuck = true;
          break;
        }
      }
    }
    ++result.n_iter;
  }
  if (nf == 0) result.converged = true;

  // Label convention tau_n <= tau_r.
  bool swapped = false;
  if (x[index(Param::tau_n)] > x[index(Param::tau_r)]) {
    std::swap(x[index(Param::tau_n)], x[index(Param::tau_r)]);
    swapped = true;
  }
  result.params = from_vector(x);
  result.loss_value = ev.loss;
  result.dof = static_cast<int>(problem.data.size()) - static_cast<int>(nf);
  result.statistic = result.dof > 0 ? ev.loss / result.dof : std::nan("");

  // Covariance = inverse Fisher information = 2 H^-1 in natural parameters.
  result.std_errors.fill(std::nan(""));
  if (nf > 0) {
    Eigen::MatrixXd h(nf, nf);
    for (Eigen::Index a = 0; a < nf; ++a) {
      for (Eigen::Index c = 0; c < nf; ++c) {
        h(a, c) = ev.curv(static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]),
                          static_cast<Eigen::Index>(free[static_cast<std::size_t>(c)]));
      }
    }
    // Singularity is judged on the unit-diagonal rescaling of h.
    const Eigen::VectorXd diag = h.diagonal();
    const bool positive_diag = (diag.array() > 0.0).all();
    const Eigen::VectorXd d = positive_diag ? Eigen::VectorXd(diag.cwiseSqrt().cwiseInverse())
                                            : Eigen::VectorXd::Ones(nf);
    const Eigen::MatrixXd hs = d.asDiagonal() * h * d.asDiagonal();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hs);
    const double lmax = eig.eigenvalues().maxCoeff();
    const double lmin = eig.eigenvalues().minCoeff();
    if (positive_diag && eig.info() == Eigen::Success && lmax > 0.0 && lmin > 1e-14 * lmax) {
      const Eigen::VectorXd inv = eig.eigenvalues().cwiseInverse();
      const Eigen::MatrixXd cov = 2.0 * d.asDiagonal() * eig.eigenvectors() * inv.asDiagonal() *
                                  eig.eigenvectors().transpose() * d.asDiagonal();
      for (Eigen::Index a = 0; a < nf; ++a) {
        for (Eigen::Index c = 0; c < nf; ++c) {
          result.covariance(static_cast<Eigen::Index>(free[static_cast<std::size_t>(a)]),
                            static_cast<Eigen::Index>(free[static_cast<std::size_t>(c)])) =
              0.5 * (cov(a, c) + cov(c, a));
        }
      }
      result.covariance_available = true;
      for (std::size_t j : free) {
        result.std_errors[j] =
            std::sqrt(result.covariance(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)));
      }
    }
  }
  if (swapped) {
    const auto a = static_cast<Eigen::Index>(index(Param::tau_n));
    const auto c = static_cast<Eigen::Index>(index(Param::tau_r));
    result.covariance.row(a).swap(result.covariance.row(c));
    result.covariance.col(a).swap(result.covariance.col(c));
    std::swap(result.std_errors[index(Param::tau_n)], result.std_errors[index(Param::tau_r)]);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Profile likelihood

struct ProfileInterval {
  double lower = 0.0;
  double upper = 0.0;
  bool lower_unbounded = false;  ///< profile never rose by the threshold
  bool upper_unbounded = false;
  bool lower_at_boundary = false;  ///< lower edge clipped at the parameter bound 0
};

/// 1-sigma profile interval: the set where the loss, re-minimized over the
/// other free parameters, stays within 1 unit (deviance or chi^2) of the
/// optimum.
inline ProfileInterval profile_uncertainty(const FitProblem& problem, const FitResult& result,
                                           Param which, double threshold = 1.0) {
  if (!result.converged) throw std::invalid_argument("profile needs a converged fit");
  if (problem.fixed.count(which)) throw std::invalid_argument("cannot profile a fixed parameter");
  const double best = get(result.params, which);
  const double base = result.loss_value;

  auto delta_at = [&](double v) {
    FitProblem sub = problem;
    ParamVector x = to_vector(result.params);
    x[index(which)] = v;
    sub.init = from_vector(x);
    sub.fixed.insert(which);
    const FitResult r = fit(sub);
    return std::max(0.0, r.loss_value - base);
  };

  double step = result.std_error(which);
  if (!std::isfinite(step) || step <= 0.0) step = 0.05 * std::abs(best);
  step = std::max(step, 1e-9 * std::max(std::abs(best), 1e-12));

  ProfileInterval out;
  for (int dir : {-1, +1}) {
    double inside = best;
    double outside = std::nan("");
    bool hit_bound = false;
    for (int k = 0; k < 40; ++k) {
      double v = best + dir * step * std::ldexp(1.0, k);
      if (dir < 0 && v <= 0.0) {
        // Only r and b can sit exactly on zero; others stop just above it.
        const bool zero_ok = which == Param::ratio || which == Param::background;
        v = zero_ok ? 0.0 : 1e-6 * best;
        if (delta_at(v) >= threshold) {
          outside = v;
        } else {
          inside = v;
          hit_bound = true;
        }
        break;
      }
      if (delta_at(v) >= threshold) {
        outside = v;
        break;
      }
      inside = v;
    }
    double edge;
    bool unbounded = false;
    if (std::isnan(outside)) {
      edge = inside;
      unbounded = !hit_bound;
    } else {
      double lo = inside, hi = outside;
      for (int k = 0; k < 50 && std::abs(hi - lo) > 1e-3 * step; ++k) {
        const double mid = 0.5 * (lo + hi);
        (delta_at(mid) >= threshold ? hi : lo) = mid;
      }
      edge = 0.5 * (lo + hi);
    }
    if (dir < 0) {
      out.lower = edge;
      out.lower_unbounded = unbounded;
      out.lower_at_boundary = hit_bound;
    } else {
      out.upper = edge;
      out.upper_unbounded = unbounded;
    }
  }
  return out;
}

}  // namespace heraldsim
