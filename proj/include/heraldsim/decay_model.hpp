#pragma once

// Fluorescence-decay models for a two-stage (non-radiative then radiative)
// emitter excited by a pulse train.
//
// All model times are double-precision nanoseconds. The data layer (tags,
// histograms) works in integer picoseconds; see ps_to_ns().

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "heraldsim/dual.hpp"

namespace heraldsim {

inline constexpr double ps_to_ns(double ps) { return ps * 1e-3; }
inline constexpr double ns_to_ps(double ns) { return ns * 1e3; }

/// Relative lifetime separation below which the cascade is evaluated with
/// the coincident-lifetime limit t*exp(-t/tau)/tau^2.
inline constexpr double kDegenerateLifetimeTol = 1e-6;

/// Default truncation for the accidental-coincidence series. The dropped tail
/// is bounded by exp(-n_max * t0 / max(tau)).
inline constexpr int kDefaultSeriesTerms = 64;

/// Non-radiative and radiative lifetimes in ns. The cascade law is symmetric
/// under exchange, so no ordering is required.
struct LifetimePair {
  double tau_n = 0.0;
  double tau_r = 0.0;

  friend bool operator==(const LifetimePair&, const LifetimePair&) = default;
};

/// Heralded-model parameters. Times in ns.
struct DecayParams {
  double amplitude = 1.0;         ///< A: scale from normalized pdf to counts
  double background = 0.0;        ///< b: flat background
  double accidental_ratio = 0.0;  ///< r: accidental / proper coincidences
  LifetimePair lifetimes{};
  double pulse_period = 12.5;     ///< t0

  friend bool operator==(const DecayParams&, const DecayParams&) = default;
};

/// Closed interval of delays (ns) over which a model is evaluated.
struct ModelWindow {
  double t_min = 0.0;
  double t_max = 0.0;

  /// The [-t0, 3t0] range on which the closed-form heralded model holds.
  static ModelWindow heralded(double pulse_period) {
    return {-pulse_period, 3.0 * pulse_period};
  }
  bool contains(double t) const { return t >= t_min && t <= t_max; }
};

inline void validate(const LifetimePair& lt) {
  if (!(lt.tau_n > 0.0) || !(lt.tau_r > 0.0) || !std::isfinite(lt.tau_n) ||
      !std::isfinite(lt.tau_r)) {
    throw std::domain_error("lifetimes must be finite and positive");
  }
}

inline void validate(const DecayParams& p) {
  validate(p.lifetimes);
  if (!(p.amplitude >= 0.0)) throw std::domain_error("amplitude must be >= 0");
  if (!(p.background >= 0.0)) throw std::domain_error("background must be >= 0");
  if (!(p.accidental_ratio >= 0.0)) {
    throw std::domain_error("accidental ratio must be >= 0");
  }
  if (!(p.pulse_period > 0.0)) throw std::domain_error("pulse period must be > 0");
}

namespace model {

// Templated kernels. T is double or Dual<N>; no validation is done here.

/// Cascade pdf, theta(t) (e^{-t/a} - e^{-t/b}) / (a - b).
///
/// Evaluated as e^{-t/slow} * (-expm1(-t (slow-fast)/(slow fast))) / (slow-fast),
/// which is exact under lifetime exchange, never overflows and keeps full
/// relative precision for nearby lifetimes.
template <class T>
T cascade_pdf(const T& t, const T& tau_a, const T& tau_b) {
  using std::exp;
  using std::expm1;
  if (value_of(t) < 0.0) return T(0.0);
  const bool a_slow = value_of(tau_a) >= value_of(tau_b);
  const T& slow = a_slow ? tau_a : tau_b;
  const T& fast = a_slow ? tau_b : tau_a;
  const T diff = slow - fast;
  if (value_of(diff) < kDegenerateLifetimeTol * value_of(slow)) {
    const T tau = 0.5 * (slow + fast);
    return t * exp(-t / tau) / (tau * tau);
  }
  return exp(-t / slow) * (-expm1(-t * diff / (slow * fast))) / diff;
}

/// sum_{n>=0} p(u + n t0) for u >= 0, by the geometric series.
template <class T>
T periodic_tail(const T& u, const T& tau_a, const T& tau_b, const T& t0) {
  using std::exp;
  using std::expm1;
  const bool a_slow = value_of(tau_a) >= value_of(tau_b);
  const T& slow = a_slow ? tau_a : tau_b;
  const T& fast = a_slow ? tau_b : tau_a;
  const T diff = slow - fast;
  if (value_of(diff) < kDegenerateLifetimeTol * value_of(slow)) {
    const T tau = 0.5 * (slow + fast);
    const T one_minus_q = -expm1(-t0 / tau);
    const T q = 1.0 - one_minus_q;
    return exp(-u / tau) / (tau * tau) *
           (u / one_minus_q + t0 * q / (one_minus_q * one_minus_q));
  }
  const T slow_part = exp(-u / slow) / (-expm1(-t0 / slow));
  const T fast_part = exp(-u / fast) / (-expm1(-t0 / fast));
  return (slow_part - fast_part) / diff;
}

/// Heralded model with accidentals, closed form valid on [-t0, 3t0].
///
/// The backward accidental copies sum_{n>=1} p(t + n t0) are written as
/// p(t + t0) + periodic_tail(t + 2 t0); peeling the first term keeps the
/// geometric difference well conditioned near t = -t0. Forward copies
/// p(t - n t0) are nonzero only for n = 1, 2 on the window.
template <class T>
T heralded_closed(const T& t, const T& amplitude, const T& background,
                  const T& ratio, const T& tau_n, const T& tau_r, const T& t0) {
  const T proper = cascade_pdf(t, tau_n, tau_r);
  const T backward =
      cascade_pdf(T(t + t0), tau_n, tau_r) + periodic_tail(T(t + 2.0 * t0), tau_n, tau_r, t0);
  const T forward = cascade_pdf(T(t - t0), tau_n, tau_r) +
                    cascade_pdf(T(t - 2.0 * t0), tau_n, tau_r);
  return amplitude * (proper + ratio * (backward + forward)) + background;
}

/// Heralded model by direct truncated summation of the accidental copies.
template <class T>
T heralded_sum(const T& t, const T& amplitude, const T& background, const T& ratio,
               const T& tau_n, const T& tau_r, const T& t0, int n_max) {
  T acc(0.0);
  for (int n = n_max; n >= 1; --n) {
    const T shift = static_cast<double>(n) * t0;
    acc += cascade_pdf(T(t + shift), tau_n, tau_r);
    acc += cascade_pdf(T(t - shift), tau_n, tau_r);
  }
  return amplitude * (cascade_pdf(t, tau_n, tau_r) + ratio * acc) + background;
}

/// Every-pulse excitation, t in [0, t0): sum over all pulses of p(t - n t0).
template <class T>
T periodic(const T& t, const T& amplitude, const T& background, const T& tau_n,
           const T& tau_r, const T& t0) {
  return amplitude * (cascade_pdf(t, tau_n, tau_r) +
                      periodic_tail(T(t + t0), tau_n, tau_r, t0)) +
         background;
}

}  // namespace model

/// Cascade emission pdf (per ns) at delay t (ns).
inline double eval_p(double t, const LifetimePair& lt) {
  validate(lt);
  return model::cascade_pdf(t, lt.tau_n, lt.tau_r);
}

/// Cumulative distribution of the cascade delay.
inline double cascade_cdf(double t, const LifetimePair& lt) {
  validate(lt);
  if (t <= 0.0) return 0.0;
  const double a = std::max(lt.tau_n, lt.tau_r);
  const double b = std::min(lt.tau_n, lt.tau_r);
  if (a - b < kDegenerateLifetimeTol * a) {
    const double tau = 0.5 * (a + b);
    return -std::expm1(-t / tau) - (t / tau) * std::exp(-t / tau);
  }
  return 1.0 - (a * std::exp(-t / a) - b * std::exp(-t / b)) / (a - b);
}

/// Delay at which the cascade pdf peaks.
inline double cascade_peak_time(const LifetimePair& lt) {
  validate(lt);
  const double a = lt.tau_n;
  const double b = lt.tau_r;
  if (std::abs(a - b) < kDegenerateLifetimeTol * std::max(a, b)) {
    return 0.5 * (a + b);
  }
  return a * b * std::log(a / b) / (a - b);
}

/// A (p(t) + r sum_{n=1..n_max} [p(t + n t0) + p(t - n t0)]) + b.
inline double eval_heralded_sum(double t, const DecayParams& p,
                                int n_max = kDefaultSeriesTerms) {
  validate(p);
  if (n_max < 1) throw std::domain_error("n_max must be >= 1");
  return model::heralded_sum(t, p.amplitude, p.background, p.accidental_ratio,
                             p.lifetimes.tau_n, p.lifetimes.tau_r, p.pulse_period,
                             n_max);
}

/// Closed form of eval_heralded_sum (n_max -> infinity) on [-t0, 3t0].
inline double eval_heralded_closed(double t, const DecayParams& p) {
  validate(p);
  const auto w = ModelWindow::heralded(p.pulse_period);
  if (!w.contains(t)) {
    throw std::domain_error("closed-form heralded model is only valid on [-t0, 3t0], got t = " +
                            std::to_string(t));
  }
  return model::heralded_closed(t, p.amplitude, p.background, p.accidental_ratio,
                                p.lifetimes.tau_n, p.lifetimes.tau_r, p.pulse_period);
}

/// Repetitive-excitation model on one period, t in [0, t0).
inline double eval_periodic(double t, double amplitude, double background,
                            const LifetimePair& lt, double pulse_period) {
  validate(lt);
  if (!(pulse_period > 0.0)) throw std::domain_error("pulse period must be > 0");
  if (t < 0.0 || t >= pulse_period) {
    throw std::domain_error("periodic model is only valid on [0, t0), got t = " +
                            std::to_string(t));
  }
  return model::periodic(t, amplitude, background, lt.tau_n, lt.tau_r, pulse_period);
}

}  // namespace heraldsim
