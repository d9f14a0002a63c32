// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "heraldsim/heraldsim.hpp"

using namespace heraldsim;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4)));
};

void Outcome::require(bool ok, const char* fmt, ...) {
  char buf[256];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, args);
  va_end(args);
  if (!detail.empty()) detail += "; ";
  detail += buf;
  if (!ok) {
    detail += " [x]";
    pass = false;
  }
}

constexpr LifetimePair kHigh{0.107, 7.68};
constexpr std::int64_t kPeriodPs = 12'500;

/// Two-exponential cascade CDF, written out independently of the library.
double cascade_cdf_oracle(double t, double tn, double tr) {
  if (t <= 0.0) return 0.0;
  return 1.0 - (tn * std::exp(-t / tn) - tr * std::exp(-t / tr)) / (tn - tr);
}

template <class F>
double simpson(F&& f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

double rel(double got, double want) { return std::abs(got - want) / std::abs(want); }

ExperimentConfig heralded_config(double pair_prob, std::uint64_t n_pulses, std::uint64_t seed) {
  ExperimentConfig c;
  c.pulse_period = kPeriodPs;
  c.n_pulses = n_pulses;
  c.pair_prob = pair_prob;
  c.eta_herald = 0.5;
  c.eta_excite = 0.2;
  c.eta_collect = 0.5;
  c.lifetimes = kHigh;
  c.dark_rate_fluor = 65.0;
  c.dark_rate_herald = 100.0;
  c.seed = seed;
  return c;
}

Histogram heralded_histogram(const TagStream& s) {
  return delay_histogram(s, Channel::herald, Channel::fluorescence, -kPeriodPs, 3 * kPeriodPs, 50);
}

double side_to_main(const Histogram& h) {
  return static_cast<double>(h.area(-kPeriodPs, 0)) / static_cast<double>(h.area(0, kPeriodPs));
}

// 1. Closed form against the truncated series.
Outcome closed_form() {
  Outcome o;
  const auto start = Clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int set = 0; set < 100; ++set) {
    const double t0 = 5.0 + 20.0 * u(rng);
    const double slow = t0 * (0.05 + 0.95 * u(rng));
    const double fast = slow * (0.005 + 0.9 * u(rng));
    DecayParams p{1.0 + 1e4 * u(rng), 10.0 * u(rng), 0.5 * u(rng),
                  u(rng) < 0.5 ? LifetimePair{fast, slow} : LifetimePair{slow, fast}, t0};
    for (int i = 0; i < 10'000; ++i) {
      const double t = std::min(3.0 * t0, -t0 + 4.0 * t0 * i / 9999.0);
      const double want = eval_heralded_sum(t, p, 128);
      worst = std::max(worst, std::abs(eval_heralded_closed(t, p) - want) / std::abs(want));
    }
  }
  const double elapsed = seconds_since(start);
  o.require(worst <= 1e-10, "max rel err %.2e", worst);
  o.require(elapsed < 5.0, "%.2f s", elapsed);
  return o;
}

// 2. Normalization, exchange symmetry, degenerate continuity.
Outcome normalization_symmetry() {
  Outcome o;
  double worst_norm = 0.0;
  for (LifetimePair lt : {kHigh, LifetimePair{0.112, 7.17}, LifetimePair{0.12, 6.6},
                          LifetimePair{3.0, 3.0}, LifetimePair{1.0, 1.2}}) {
    const double upper = 60.0 * std::max(lt.tau_n, lt.tau_r);
    const double area = simpson([&](double t) { return eval_p(t, lt); }, 0.0, upper, 600'000);
    worst_norm = std::max(worst_norm, std::abs(area - 1.0));
  }
  o.require(worst_norm <= 1e-6, "|int p - 1| %.2e", worst_norm);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> tau(0.01, 20.0), time(-5.0, 100.0);
  int asymmetric = 0;
  for (int i = 0; i < 100'000; ++i) {
    const double a = tau(rng), b = tau(rng), t = time(rng);
    if (eval_p(t, {a, b}) != eval_p(t, {b, a})) ++asymmetric;
  }
  o.require(asymmetric == 0, "%d asymmetric evaluations", asymmetric);

  double jump = 0.0;
  for (double tau_v : {0.1, 3.0, 7.68}) {
    for (double t : {0.01, 0.5, 3.0, 20.0, 60.0}) {
      const double below = eval_p(t, {tau_v, tau_v * (1.0 + 0.9999999e-6)});
      const double above = eval_p(t, {tau_v, tau_v * (1.0 + 1.0000001e-6)});
      jump = std::max(jump, std::abs(below - above) / above);
    }
  }
  o.require(jump < 1e-6, "degenerate jump %.2e", jump);
  return o;
}

// 3. Simulated proper delays follow the cascade law.
Outcome simulator_law() {
  Outcome o;
  const auto start = Clock::now();
  ExperimentConfig c;
  c.pulse_period = kPeriodPs;
  c.n_pulses = 2'000'000;
  c.pair_prob = 0.5;
  c.lifetimes = kHigh;
  c.seed = 3;
  auto delays = simulate_heralded_traced(c).proper_delays;
  std::sort(delays.begin(), delays.end());
  const double n = static_cast<double>(delays.size());
  double d = 0.0;
  for (std::size_t i = 0; i < delays.size(); ++i) {
    const double f = cascade_cdf_oracle(delays[i] * 1e-3, kHigh.tau_n, kHigh.tau_r);
    d = std::max({d, std::abs(f - i / n), std::abs(f - (i + 1) / n)});
  }
  const double elapsed = seconds_since(start);
  o.require(delays.size() >= 990'000, "%zu coincidences", delays.size());
  o.require(d < 0.01, "KS %.2e", d);
  o.require(elapsed < 120.0, "%.1f s", elapsed);
  return o;
}

// 4. Higher-power recovery.
Outcome high_power(double* side_ratio) {
  Outcome o;
  const ExperimentConfig c = heralded_config(0.233, 50'000'000, 4);
  const Histogram h = heralded_histogram(simulate_heralded(c));
  *side_ratio = side_to_main(h);
  FitProblem pr;
  pr.data = to_binned(h);
  const FitResult r = fit(pr);
  const double r_pred = predict_accidental_ratio(c);
  o.require(r.converged, "converged=%d", r.converged);
  o.require(rel(r.params.lifetimes.tau_r, 7.68) < 0.05, "tau_r %.4f ns", r.params.lifetimes.tau_r);
  o.require(rel(r.params.lifetimes.tau_n, 0.107) < 0.25, "tau_n %.4f ns", r.params.lifetimes.tau_n);
  o.require(rel(r.params.accidental_ratio, r_pred) < 0.15, "r %.4f (pred %.4f)",
            r.params.accidental_ratio, r_pred);

  // Noiseless fit on the expected counts of the fitted model.
  const DecayParams truth{r.params.amplitude, r.params.background, r_pred, kHigh,
                          ps_to_ns(kPeriodPs)};
  BinnedData exact = pr.data;
  exact.counts = expected_counts(ModelKind::heralded_closed, exact, truth);
  FitProblem pe;
  pe.data = exact;
  const FitResult e = fit(pe);
  double worst = 0.0;
  for (Param p : {Param::amplitude, Param::background, Param::ratio, Param::tau_n, Param::tau_r}) {
    worst = std::max(worst, rel(get(e.params, p), get(truth, p)));
  }
  o.require(e.converged && worst < 1e-6, "noiseless max rel err %.1e", worst);
  return o;
}

// 5. Lower-power analogue.
Outcome low_power(double high_side_ratio) {
  Outcome o;
  const ExperimentConfig c = heralded_config(0.0225, 200'000'000, 5);
  const Histogram h = heralded_histogram(simulate_heralded(c));
  FitProblem pr;
  pr.data = to_binned(h);
  const FitResult r = fit(pr);
  const double r_pred = predict_accidental_ratio(c);
  o.require(r.converged, "converged=%d", r.converged);
  const ProfileInterval iv = profile_uncertainty(pr, r, Param::ratio, 3.84);  // 95%
  o.require(iv.lower <= r_pred && r_pred <= iv.upper, "r %.4f, 95%% CI [%.4f, %.4f] vs pred %.4f",
            r.params.accidental_ratio, iv.lower, iv.upper, r_pred);
  const double ratio = side_to_main(h);
  o.require(high_side_ratio / ratio >= 5.0, "side/main %.4f vs %.4f (%.1fx)", ratio,
            high_side_ratio, high_side_ratio / ratio);
  return o;
}

// 6. Laser reference with the periodic model.
Outcome laser() {
  Outcome o;
  ExperimentConfig c;
  c.pulse_period = kPeriodPs;
  c.n_pulses = 20'000'000;
  c.eta_excite = 0.01;
  c.eta_collect = 0.5;
  c.lifetimes = {0.12, 6.6};
  c.dark_rate_fluor = 65.0;
  c.seed = 6;
  const Histogram h = folded_histogram(simulate_laser(c), Channel::fluorescence, kPeriodPs, 50);
  FitProblem pr;
  pr.data = to_binned(h);
  pr.model = ModelKind::periodic;
  const FitResult r = fit(pr);
  o.require(r.converged, "converged=%d", r.converged);
  o.require(rel(r.params.lifetimes.tau_r, 6.6) < 0.05, "tau_r %.3f ns", r.params.lifetimes.tau_r);
  return o;
}

// 7. SNR from heralded fractions.
Outcome snr_fractions() {
  Outcome o;
  const double high = snr_from_fractions(0.65, 0.0296, 0.00446);
  const double low = snr_from_fractions(0.154, 0.0142, 0.00172);
  o.require(std::abs(high - 4.3) <= 0.1, "high %.3f", high);
  o.require(std::abs(low - 1.3) <= 0.1, "low %.3f", low);
  return o;
}

// 8. g2 ordering between pump settings.
Outcome g2_ordering() {
  Outcome o;
  auto run = [](double pair_prob, std::uint64_t seed) {
    ExperimentConfig c;
    c.pulse_period = kPeriodPs;
    c.n_pulses = 1'000'000'000;
    c.pair_prob = pair_prob;
    c.eta_herald = 0.1;
    c.eta_excite = 0.5;
    c.eta_collect = 1.0;
    c.lifetimes = kHigh;
    c.dark_rate_fluor = 65.0;
    c.dark_rate_herald = 100.0;
    c.seed = seed;
    return estimate_g2(simulate_heralded(c), kPeriodPs);
  };
  const G2Estimate high = run(5e-3, 81), low = run(5.6e-4, 82);
  o.require(low.g2 < high.g2, "g2 low %.4f(%.4f) high %.4f(%.4f)", low.g2, low.std_error,
            high.g2, high.std_error);
  o.require(high.g2 < 0.05 && low.g2 < 0.05, "both < 0.05");
  return o;
}

// 9. Jacobian, covariance and profile coverage.
Outcome optimizer_hygiene() {
  Outcome o;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  BinnedData axis{-12.5, 0.1, std::vector<double>(500, 0.0)};
  double worst_jac = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const DecayParams p{1e3 + 1e5 * u(rng), 10 * u(rng), 0.01 + 0.5 * u(rng),
                        {0.05 + 0.5 * u(rng), 2.0 + 8.0 * u(rng)}, 12.5 * (0.9 + 0.2 * u(rng))};
    // Bin edges kept off t = n t0, where the shifted copies have kinks.
    BinnedData a = axis;
    a.t_min = -0.99 * p.pulse_period;
    a.bin_width = 3.9 * p.pulse_period / static_cast<double>(a.size());
    Eigen::MatrixXd jac;
    expected_counts_jacobian(ModelKind::heralded_closed, a, p, jac);
    const ParamVector v = to_vector(p);
    for (std::size_t j = 0; j < kParamCount; ++j) {
      const double step = 1e-5 * std::max(std::abs(v[j]), 1e-3);
      ParamVector up = v, dn = v;
      up[j] += step;
      dn[j] -= step;
      const auto mu_up = expected_counts(ModelKind::heralded_closed, a, from_vector(up));
      const auto mu_dn = expected_counts(ModelKind::heralded_closed, a, from_vector(dn));
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double fd = (mu_up[i] - mu_dn[i]) / (2 * step);
        num += (jac(i, j) - fd) * (jac(i, j) - fd);
        den += fd * fd;
      }
      worst_jac = std::max(worst_jac, std::sqrt(num / den));
    }
  }
  o.require(worst_jac < 1e-5, "jacobian rel err %.1e", worst_jac);

  const DecayParams truth{2e4, 3.0, 0.233, kHigh, 12.5};
  BinnedData mean = axis;
  mean.counts = expected_counts(ModelKind::heralded_closed, axis, truth);
  int covered = 0, converged = 0, non_psd = 0;
  std::mt19937_64 noise(90);
  for (int rep = 0; rep < 100; ++rep) {
    BinnedData d = mean;
    for (double& y : d.counts) y = static_cast<double>(std::poisson_distribution<long>(y)(noise));
    FitProblem pr;
    pr.data = d;
    const FitResult r = fit(pr);
    if (!r.converged) continue;
    ++converged;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 6, 6>> eig(r.covariance);
    if (!r.covariance_available ||
        eig.eigenvalues().minCoeff() < -1e-12 * eig.eigenvalues().maxCoeff()) {
      ++non_psd;
    }
    const ProfileInterval iv = profile_uncertainty(pr, r, Param::tau_r);
    if (iv.lower <= truth.lifetimes.tau_r && truth.lifetimes.tau_r <= iv.upper) ++covered;
  }
  o.require(converged == 100 && non_psd == 0, "%d/100 converged, %d non-PSD", converged, non_psd);
  const double coverage = covered / 100.0;
  o.require(std::abs(coverage - 0.68) <= 0.10, "tau_r profile coverage %.2f", coverage);
  return o;
}

// 10. Thread-count independence of the output file.
Outcome determinism() {
  Outcome o;
  ExperimentConfig c = heralded_config(0.233, 3'000'000, 10);
  c.jitter_sigma = 20.0;
  const std::string one = encode_tags_binary(simulate_heralded(c, 1));
  bool same = true;
  for (unsigned threads : {2u, 4u, 8u}) same = same && encode_tags_binary(simulate_heralded(c, threads)) == one;
  o.require(same, "%zu bytes, threads 1/2/4/8", one.size());
  return o;
}

}  // namespace

int main() {
  double high_side_ratio = 0.0;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"closed form matches series", closed_form},
      {"normalization and symmetry", normalization_symmetry},
      {"simulator delay law", simulator_law},
      {"higher-power recovery", [&] { return high_power(&high_side_ratio); }},
      {"lower-power recovery", [&] { return low_power(high_side_ratio); }},
      {"periodic laser fit", laser},
      {"SNR from fractions", snr_fractions},
      {"g2 ordering", g2_ordering},
      {"optimizer hygiene", optimizer_hygiene},
      {"determinism across threads", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failed;
    std::printf("AC%-2zu %s  %-28s %s (%.1f s)\n", i + 1, o.pass ? "PASS" : "FAIL",
                criteria[i].first, o.detail.c_str(), seconds_since(start));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
