#pragma once

// Pulse-driven Monte-Carlo generation of time-tag streams.
//
// Work is split into fixed blocks of kBlockPulses pulses. Every block draws
// from its own SplitMix64 streams keyed by (seed, block, lane), so the output
// does not depend on how blocks are scheduled across threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "heraldsim/decay_model.hpp"
#include "heraldsim/rng.hpp"
#include "heraldsim/tagstream.hpp"

namespace heraldsim {

inline constexpr std::uint64_t kBlockPulses = 1u << 16;

struct ExperimentConfig {
  std::int64_t pulse_period = 12500;  ///< t0, ps
  std::uint64_t n_pulses = 1;
  double pair_prob = 0.0;             ///< pair creation probability per pulse
  double eta_herald = 1.0;            ///< IR arm: coupling x detector efficiency
  double eta_excite = 1.0;            ///< visible photon reaches and excites
  double eta_collect = 1.0;           ///< fluorescence photon is detected
  LifetimePair lifetimes{0.107, 7.68};  ///< ns
  double dark_rate_fluor = 0.0;       ///< events/s
  double dark_rate_herald = 0.0;      ///< events/s
  double jitter_sigma = 0.0;          ///< Gaussian timing jitter, ps
  std::uint64_t seed = 0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// n_pulses * pulse_period in ps; throws if it overflows a signed 64-bit ps
/// clock (about 106 days).
inline std::int64_t acquisition_span(const ExperimentConfig& c) {
  if (c.pulse_period <= 0 || c.n_pulses == 0) {
    throw std::invalid_argument("zero-duration experiment: need pulse_period > 0 and n_pulses >= 1");
  }
  const auto limit = static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max() / 2);
  if (c.n_pulses > limit / static_cast<std::uint64_t>(c.pulse_period)) {
    throw std::invalid_argument("experiment duration overflows the 64-bit picosecond clock");
  }
  return static_cast<std::int64_t>(c.n_pulses) * c.pulse_period;
}

inline void validate(const ExperimentConfig& c) {
  acquisition_span(c);
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument(std::string(name) + " must be in [0, 1]");
  };
  prob(c.pair_prob, "pair_prob");
  prob(c.eta_herald, "eta_herald");
  prob(c.eta_excite, "eta_excite");
  prob(c.eta_collect, "eta_collect");
  validate(c.lifetimes);
  if (!(c.dark_rate_fluor >= 0.0) || !(c.dark_rate_herald >= 0.0)) {
    throw std::invalid_argument("dark rates must be >= 0");
  }
  if (!(c.jitter_sigma >= 0.0)) throw std::invalid_argument("jitter_sigma must be >= 0");
}

/// FNV-1a over a canonical rendering of every field.
inline std::string config_digest(const ExperimentConfig& c) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%lld|%llu|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%llu",
                static_cast<long long>(c.pulse_period),
                static_cast<unsigned long long>(c.n_pulses), c.pair_prob, c.eta_herald,
                c.eta_excite, c.eta_collect, c.lifetimes.tau_n, c.lifetimes.tau_r,
                c.dark_rate_fluor, c.dark_rate_herald, c.jitter_sigma,
                static_cast<unsigned long long>(c.seed));
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char* p = buf; *p != '\0'; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 0x100000001b3ull;
  }
  char out[17];
  std::snprintf(out, sizeof out, "%016llx", static_cast<unsigned long long>(h));
  return out;
}

/// Expected fitted accidental ratio r.
///
/// A proper coincidence needs one pair with both photons detected:
/// P = q eh ex ec. An accidental at offset m != 0 pairs a detected herald from
/// one pulse with detected fluorescence from an independent pulse:
/// (q eh)(q ex ec). The ratio is the pair probability q for every offset.
inline double predict_accidental_ratio(const ExperimentConfig& c) { return c.pair_prob; }

enum class Excitation { heralded, laser };

struct SimulationTrace {
  TagStream stream;
  /// fluorescence - herald delay (ps) of every detected same-pair coincidence
  std::vector<std::int64_t> proper_delays;
};

namespace detail {

enum Lane : std::uint64_t { kPulseLane = 0, kDarkHeraldLane = 1, kDarkFluorLane = 2, kJitterLane = 3 };

struct BlockOutput {
  std::vector<TimeTag> tags;
  std::vector<std::int64_t> proper_delays;
};

inline void add_dark_counts(std::vector<TimeTag>& tags, Channel ch, double rate_hz,
                            std::int64_t begin, std::int64_t end, SplitMix64 rng) {
  if (!(rate_hz > 0.0)) return;
  const double mean_gap_ps = 1e12 / rate_hz;
  double t = static_cast<double>(begin);
  while (true) {
    t += rng.exponential(mean_gap_ps);
    if (t >= static_cast<double>(end)) break;
    tags.push_back({ch, static_cast<std::int64_t>(t)});
  }
}

inline std::int64_t jittered(std::int64_t t, double sigma, SplitMix64& rng) {
  if (sigma <= 0.0) return t;
  return std::max<std::int64_t>(0, t + std::llround(sigma * rng.normal()));
}

inline BlockOutput simulate_block(const ExperimentConfig& c, Excitation mode, std::uint64_t block,
                                  bool trace) {
  BlockOutput out;
  const std::uint64_t k_begin = block * kBlockPulses;
  const std::uint64_t k_end = std::min(c.n_pulses, k_begin + kBlockPulses);
  const double tau_n_ps = ns_to_ps(c.lifetimes.tau_n);
  const double tau_r_ps = ns_to_ps(c.lifetimes.tau_r);

  auto rng = SplitMix64::keyed(c.seed, block, kPulseLane);
  auto jitter_rng = SplitMix64::keyed(c.seed, block, kJitterLane);
  const double event_prob = mode == Excitation::heralded ? c.pair_prob : c.eta_excite;

  const std::uint64_t first_gap = event_prob > 0.0 ? rng.geometric(event_prob) : 0;
  if (event_prob > 0.0 && first_gap < k_end - k_begin) {
    std::uint64_t k = k_begin + first_gap;
    while (k < k_end) {
      const std::int64_t t_pulse = static_cast<std::int64_t>(k) * c.pulse_period;
      // Fixed draw order per event so runs differing only in efficiencies
      // share their random delays.
      const double u_herald = rng.uniform();
      const double u_excite = rng.uniform();
      const double u_collect = rng.uniform();
      const double delay = rng.exponential(tau_n_ps) + rng.exponential(tau_r_ps);

      std::int64_t herald_ts = -1;
      if (mode == Excitation::heralded && u_herald < c.eta_herald) {
        herald_ts = jittered(t_pulse, c.jitter_sigma, jitter_rng);
        out.tags.push_back({Channel::herald, herald_ts});
      }
      const bool excited = mode == Excitation::laser || u_excite < c.eta_excite;
      if (excited && u_collect < c.eta_collect) {
        const std::int64_t fluor_ts =
            jittered(t_pulse + std::llround(delay), c.jitter_sigma, jitter_rng);
        out.tags.push_back({Channel::fluorescence, fluor_ts});
        if (trace && herald_ts >= 0) out.proper_delays.push_back(fluor_ts - herald_ts);
      }
      const std::uint64_t gap = rng.geometric(event_prob);
      if (gap >= k_end - k) break;
      k += 1 + gap;
    }
  }

  const std::int64_t t_begin = static_cast<std::int64_t>(k_begin) * c.pulse_period;
  const std::int64_t t_end = static_cast<std::int64_t>(k_end) * c.pulse_period;
  const std::size_t n_signal = out.tags.size();
  if (mode == Excitation::heralded) {
    add_dark_counts(out.tags, Channel::herald, c.dark_rate_herald, t_begin, t_end,
                    SplitMix64::keyed(c.seed, block, kDarkHeraldLane));
  }
  add_dark_counts(out.tags, Channel::fluorescence, c.dark_rate_fluor, t_begin, t_end,
                  SplitMix64::keyed(c.seed, block, kDarkFluorLane));
  for (std::size_t i = n_signal; i < out.tags.size(); ++i) {
    out.tags[i].timestamp = jittered(out.tags[i].timestamp, c.jitter_sigma, jitter_rng);
  }
  return out;
}

inline SimulationTrace run(const ExperimentConfig& c, Excitation mode, unsigned threads,
                           bool trace) {
  validate(c);
  const std::int64_t span = acquisition_span(c);
  const std::uint64_t n_blocks = (c.n_pulses + kBlockPulses - 1) / kBlockPulses;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::uint64_t>(threads, n_blocks));

  std::vector<BlockOutput> blocks(n_blocks);
  std::atomic<std::uint64_t> next{0};
  auto worker = [&] {
    for (std::uint64_t b = next++; b < n_blocks; b = next++) {
      blocks[b] = simulate_block(c, mode, b, trace);
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  SimulationTrace result;
  std::size_t total = 0;
  for (const auto& b : blocks) total += b.tags.size();
  result.stream.tags.reserve(total);
  for (auto& b : blocks) {
    result.stream.tags.insert(result.stream.tags.end(), b.tags.begin(), b.tags.end());
    result.proper_delays.insert(result.proper_delays.end(), b.proper_delays.begin(),
                                b.proper_delays.end());
    b = {};
  }
  std::sort(result.stream.tags.begin(), result.stream.tags.end(), tag_order);
  result.stream.duration = span;
  if (!result.stream.tags.empty()) {
    result.stream.duration = std::max(span, result.stream.tags.back().timestamp + 1);
  }
  result.stream.config_digest = config_digest(c);
  return result;
}

}  // namespace detail

/// Heralded experiment: each pulse creates a pair with probability pair_prob;
/// the IR photon gives a herald tag with probability eta_herald, the visible
/// photon excites with eta_excite and the emitted photon is detected with
/// eta_collect after an Exp(tau_n) + Exp(tau_r) delay. Dark counts are
/// Poisson on both channels. threads = 0 uses all hardware threads.
inline TagStream simulate_heralded(const ExperimentConfig& c, unsigned threads = 0) {
  return detail::run(c, Excitation::heralded, threads, false).stream;
}

/// As simulate_heralded, also returning the true proper-coincidence delays.
inline SimulationTrace simulate_heralded_traced(const ExperimentConfig& c, unsigned threads = 0) {
  return detail::run(c, Excitation::heralded, threads, true);
}

/// Attenuated-laser reference: every pulse excites with probability
/// eta_excite; no herald channel, no herald dark counts.
inline TagStream simulate_laser(const ExperimentConfig& c, unsigned threads = 0) {
  return detail::run(c, Excitation::laser, threads, false).stream;
}

}  // namespace heraldsim
