#include <gtest/gtest.h>

#include <cmath>

#include "heraldsim/metrics.hpp"
#include "heraldsim/simulator.hpp"

using namespace heraldsim;

namespace {

/// Higher-power setting: unheralded SNR 0.65 against 65 dark counts/s,
/// 2.96% of fluorescence heralded, herald probability 0.00446.
SnrInputs high_power() {
  SnrInputs in;
  in.n_dc = 65.0;
  in.n_f = 0.65 * 65.0;
  in.n_vis = 1000.0;
  in.n_coinc = 29.6;
  in.eta_ir = 0.2;
  in.eta_ir_sspd = 0.223;
  in.eta_spdc = 0.1;
  return in;
}

}  // namespace

TEST(HeraldedSignalRate, Fractions) {
  SnrInputs in = high_power();
  in.n_f = 100.0;
  EXPECT_NEAR(heralded_signal_rate(in), 2.96, 1e-12);
  in.n_coinc = in.n_vis;
  EXPECT_EQ(heralded_signal_rate(in), 100.0);
  in.n_coinc = 0.0;
  EXPECT_EQ(heralded_signal_rate(in), 0.0);
  in.n_vis = 0.0;
  EXPECT_THROW(heralded_signal_rate(in), std::domain_error);
}

TEST(HeraldedDarkRate, ProductOfHeraldingFactors) {
  SnrInputs in = high_power();
  EXPECT_NEAR(herald_probability(in), 0.00446, 1e-12);
  EXPECT_NEAR(heralded_dark_rate(in), 0.2899, 1e-4);
  in.eta_ir = 0.0;
  EXPECT_EQ(heralded_dark_rate(in), 0.0);
  in.eta_ir = in.eta_ir_sspd = in.eta_spdc = 1.0;
  EXPECT_EQ(heralded_dark_rate(in), in.n_dc);
  in.eta_spdc = 1.5;
  EXPECT_THROW(heralded_dark_rate(in), std::invalid_argument);
}

TEST(Snr, ReferenceSettings) {
  EXPECT_NEAR(snr(high_power()), 0.65 * 0.0296 / 0.00446, 1e-12);
  EXPECT_NEAR(snr(high_power()), 4.3, 0.1);
  EXPECT_NEAR(snr_from_fractions(0.65, 0.0296, 0.00446), 4.3139, 1e-4);
  EXPECT_NEAR(snr_from_fractions(0.154, 0.0142, 0.00172), 1.2714, 1e-4);
}

TEST(Snr, InvariantUnderCommonScaling) {
  SnrInputs a = high_power(), b = a;
  b.n_f *= 7.0;
  b.n_dc *= 7.0;
  EXPECT_NEAR(snr(a), snr(b), 1e-12 * snr(a));
}

TEST(Snr, ZeroDarkRateIsAnError) {
  SnrInputs in = high_power();
  in.n_dc = 0.0;
  EXPECT_THROW(snr(in), std::domain_error);
  EXPECT_THROW(snr_from_fractions(0.65, 0.0296, 0.0), std::domain_error);
}

TEST(Snr, HeraldedRatesNeverExceedUnheralded) {
  const SnrInputs in = high_power();
  EXPECT_LE(heralded_signal_rate(in), in.n_f);
  EXPECT_LE(heralded_dark_rate(in), in.n_dc);
}

TEST(ConversionEfficiency, RoundTrip) {
  RateChain c{2.0e6, 0.3, 0.4, 0.8, 7.0e-6};
  const double n_sh = heralded_rate(c);
  EXPECT_NEAR(conversion_efficiency(c, n_sh) / 7.0e-6, 1.0, 1e-12);
  EXPECT_NEAR(conversion_efficiency(c, n_sh / 2) / 3.5e-6, 1.0, 1e-12);
  c.eta_conv = 1.0;
  EXPECT_NEAR(conversion_efficiency(c, heralded_rate(c)), 1.0, 1e-15);
  c.eta_vis = 0.0;
  EXPECT_THROW(conversion_efficiency(c, 1.0), std::domain_error);
}

TEST(MeasureRates, TrivialStreams) {
  TagStream s;
  s.duration = 1'000'000'000'000;  // 1 s
  MeasuredRates m = measure_rates(s);
  EXPECT_EQ(m.n_f, 0.0);
  EXPECT_EQ(m.n_coinc, 0.0);
  for (int i = 0; i < 100; ++i) s.tags.push_back({Channel::fluorescence, i * 10'000'000'000ll});
  m = measure_rates(s);
  EXPECT_DOUBLE_EQ(m.n_f, 100.0);
  EXPECT_DOUBLE_EQ(m.n_vis, 100.0);
  s.duration = 0;
  EXPECT_THROW(measure_rates(s), std::domain_error);
}

TEST(MeasureRates, CoincidencesFollowEfficiencyChain) {
  ExperimentConfig c;
  c.n_pulses = 4'000'000;
  c.pair_prob = 0.05;
  c.eta_herald = 0.3;
  c.eta_excite = 0.5;
  c.eta_collect = 0.8;
  c.seed = 5;
  const TagStream s = simulate_heralded(c, 1);
  const std::int64_t hw = 6000;
  const MeasuredRates m = measure_rates(s, hw);

  // Proper pairs inside the window plus accidentals from earlier pulses.
  const double t0 = ps_to_ns(c.pulse_period), w = ps_to_ns(hw);
  double p = cascade_cdf(w, c.lifetimes);
  for (int n = 1; n < 64; ++n) {
    p += c.pair_prob * (cascade_cdf(w + n * t0, c.lifetimes) - cascade_cdf(n * t0 - w, c.lifetimes));
  }
  const double pp = c.pair_prob * c.eta_herald * c.eta_excite * c.eta_collect * p;
  const double expected = c.n_pulses * pp;
  EXPECT_NEAR(m.coincidence_count, expected, 3.0 * std::sqrt(expected * (1 - pp)));

  const double frac = c.pair_prob * c.eta_excite * c.eta_collect;
  EXPECT_NEAR(m.fluorescence_count, c.n_pulses * frac, 3.0 * std::sqrt(c.n_pulses * frac));
  EXPECT_NEAR(m.n_coinc / m.n_vis, c.eta_herald * p, 0.02 * c.eta_herald * p);
}
