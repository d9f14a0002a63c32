#pragma once

// Heralded signal-to-noise ratio, count-rate chain and rate measurement on
// tag streams.

#include <cstdint>
#include <stdexcept>

#include "heraldsim/tagstream.hpp"

namespace heraldsim {

/// Rates in counts/s, efficiencies as probabilities.
struct SnrInputs {
  double n_f = 0.0;          ///< fluorescence counts/s
  double n_coinc = 0.0;      ///< herald-visible coincidence counts/s
  double n_vis = 0.0;        ///< visible counts/s
  double n_dc = 0.0;         ///< fluorescence-detector dark counts/s
  double eta_ir = 0.0;       ///< IR fiber coupling
  double eta_ir_sspd = 0.0;  ///< IR detector efficiency
  double eta_spdc = 0.0;     ///< pair probability per pulse
};

inline void validate(const SnrInputs& in) {
  for (double v : {in.n_f, in.n_coinc, in.n_vis, in.n_dc, in.eta_ir, in.eta_ir_sspd, in.eta_spdc}) {
    if (!(v >= 0.0)) throw std::invalid_argument("SNR inputs must be non-negative");
  }
  for (double p : {in.eta_ir, in.eta_ir_sspd, in.eta_spdc}) {
    if (p > 1.0) throw std::invalid_argument("efficiencies must be <= 1");
  }
  if (in.n_coinc > in.n_vis) throw std::invalid_argument("n_coinc must not exceed n_vis");
}

/// n_sh = (n_coinc / n_vis) n_f
inline double heralded_signal_rate(const SnrInputs& in) {
  validate(in);
  if (in.n_vis <= 0.0) throw std::domain_error("heralded signal rate undefined for n_vis = 0");
  return in.n_coinc / in.n_vis * in.n_f;
}

/// Probability that a dark count falls in an open heralding window.
inline double herald_probability(const SnrInputs& in) {
  return in.eta_ir * in.eta_ir_sspd * in.eta_spdc;
}

/// n_DCh = eta_ir eta_ir_sspd eta_spdc n_DC
inline double heralded_dark_rate(const SnrInputs& in) {
  validate(in);
  return herald_probability(in) * in.n_dc;
}

inline double snr(const SnrInputs& in) {
  const double dark = heralded_dark_rate(in);
  if (dark <= 0.0) throw std::domain_error("SNR unbounded: heralded dark rate is zero");
  return heralded_signal_rate(in) / dark;
}

/// Same ratio from heralded fractions: the unheralded SNR scaled by the
/// heralded share of signal over the heralded share of dark counts.
inline double snr_from_fractions(double unheralded_snr, double signal_fraction,
                                 double dark_fraction) {
  if (!(unheralded_snr >= 0.0) || !(signal_fraction >= 0.0) || !(dark_fraction >= 0.0)) {
    throw std::invalid_argument("SNR fractions must be non-negative");
  }
  if (dark_fraction <= 0.0) throw std::domain_error("SNR unbounded: heralded dark fraction is zero");
  return unheralded_snr * signal_fraction / dark_fraction;
}

struct RateChain {
  double n_spdc = 0.0;  ///< pairs/s
  double eta_vis = 0.0;
  double eta_ir = 0.0;
  double eta_ir_det = 0.0;
  double eta_conv = 0.0;
};

/// n_sh = N_SPDC eta_VIS eta_IR eta_IRdet eta_conv
inline double heralded_rate(const RateChain& c) {
  return c.n_spdc * c.eta_vis * c.eta_ir * c.eta_ir_det * c.eta_conv;
}

/// Solves heralded_rate() = n_sh for eta_conv; chain.eta_conv is ignored.
inline double conversion_efficiency(const RateChain& c, double n_sh) {
  for (double v : {c.n_spdc, c.eta_vis, c.eta_ir, c.eta_ir_det, n_sh}) {
    if (!(v >= 0.0)) throw std::invalid_argument("rate chain entries must be non-negative");
  }
  for (double p : {c.eta_vis, c.eta_ir, c.eta_ir_det}) {
    if (p > 1.0) throw std::invalid_argument("efficiencies must be <= 1");
  }
  const double denom = c.n_spdc * c.eta_vis * c.eta_ir * c.eta_ir_det;
  if (denom <= 0.0) throw std::domain_error("conversion efficiency undefined: zero rate chain");
  return n_sh / denom;
}

/// Rates measured on a tag stream.
///
/// Channel roles: the fluorescence channel supplies both n_f and n_vis (the
/// stream has no separate visible-arm detector), so n_coinc / n_vis is the
/// heralded share of fluorescence. n_coinc counts herald-fluorescence pairs
/// with delay in [center - half_window, center + half_window].
struct MeasuredRates {
  double duration_s = 0.0;
  double n_herald = 0.0;
  double n_f = 0.0;
  double n_vis = 0.0;
  double n_coinc = 0.0;
  std::uint64_t herald_count = 0;
  std::uint64_t fluorescence_count = 0;
  std::uint64_t coincidence_count = 0;

  /// SnrInputs with the measured rates; dark rate and efficiencies zero.
  SnrInputs partial_inputs() const {
    SnrInputs in;
    in.n_f = n_f;
    in.n_vis = n_vis;
    in.n_coinc = n_coinc;
    return in;
  }
};

inline constexpr std::int64_t kDefaultCoincidenceHalfWindow = 1000;  // ps

inline MeasuredRates measure_rates(const TagStream& stream,
                                   std::int64_t half_window = kDefaultCoincidenceHalfWindow,
                                   std::int64_t center = 0) {
  if (stream.duration <= 0) throw std::domain_error("stream duration must be positive");
  if (half_window < 0) throw std::invalid_argument("coincidence window must be non-negative");
  MeasuredRates m;
  m.duration_s = static_cast<double>(stream.duration) * 1e-12;
  m.herald_count = stream.count(Channel::herald);
  m.fluorescence_count = stream.count(Channel::fluorescence);
  m.coincidence_count = count_coincidences(stream, Channel::herald, Channel::fluorescence,
                                           center - half_window, center + half_window);
  m.n_herald = static_cast<double>(m.herald_count) / m.duration_s;
  m.n_f = static_cast<double>(m.fluorescence_count) / m.duration_s;
  m.n_vis = m.n_f;
  m.n_coinc = static_cast<double>(m.coincidence_count) / m.duration_s;
  return m;
}

}  // namespace heraldsim
