// heraldsim command-line front end: simulate, histogram, fit, model-eval,
// g2 and snr subcommands.
//
// Exit codes: 0 success, 1 computation failed (e.g. no decay peak to fit),
// 2 usage or configuration error, 3 I/O error or malformed input file.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "heraldsim/heraldsim.hpp"

namespace hs = heraldsim;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct ExitError : std::runtime_error {
  int code;
  ExitError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

ExitError config_error(const std::string& what) { return {2, "config error: " + what}; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

/// Parses a %.6g rendering back so JSON and text agree digit for digit.
json rounded(double v) {
  if (!std::isfinite(v)) return nullptr;
  return std::stod(fmt(v));
}

json load_json(const std::string& path) {
  const std::string text = hs::read_file(path);
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw config_error(path + ": not valid JSON");
  if (!doc.is_object()) throw config_error(path + ": top level must be an object");
  if (!doc.contains("schema_version")) throw config_error("missing key 'schema_version'");
  const json& v = doc["schema_version"];
  if (!v.is_number_integer() || v.get<int>() != kSchemaVersion) {
    throw config_error("key 'schema_version': unsupported value " + v.dump() + " (expected " +
                       std::to_string(kSchemaVersion) + ")");
  }
  return doc;
}

double get_number(const json& doc, const std::string& key) {
  const json& v = doc.at(key);
  if (!v.is_number()) throw config_error("key '" + key + "' must be a number");
  return v.get<double>();
}

std::uint64_t get_unsigned(const json& doc, const std::string& key) {
  const json& v = doc.at(key);
  if (!v.is_number_unsigned()) throw config_error("key '" + key + "' must be a non-negative integer");
  return v.get<std::uint64_t>();
}

std::int64_t get_integer(const json& doc, const std::string& key) {
  const json& v = doc.at(key);
  if (!v.is_number_integer()) throw config_error("key '" + key + "' must be an integer");
  return v.get<std::int64_t>();
}

// ---------------------------------------------------------------------------
// simulate

struct SimulationSpec {
  hs::ExperimentConfig config;
  hs::Excitation mode = hs::Excitation::heralded;
};

SimulationSpec parse_simulation(const json& doc) {
  SimulationSpec s;
  hs::ExperimentConfig& c = s.config;
  for (const auto& [key, value] : doc.items()) {
    if (key == "schema_version") continue;
    if (key == "mode") {
      if (value == "heralded") {
        s.mode = hs::Excitation::heralded;
      } else if (value == "laser") {
        s.mode = hs::Excitation::laser;
      } else {
        throw config_error("key 'mode' must be \"heralded\" or \"laser\"");
      }
    } else if (key == "pulse_period_ps") {
      c.pulse_period = get_integer(doc, key);
    } else if (key == "n_pulses") {
      c.n_pulses = get_unsigned(doc, key);
    } else if (key == "pair_prob") {
      c.pair_prob = get_number(doc, key);
    } else if (key == "eta_herald") {
      c.eta_herald = get_number(doc, key);
    } else if (key == "eta_excite") {
      c.eta_excite = get_number(doc, key);
    } else if (key == "eta_collect") {
      c.eta_collect = get_number(doc, key);
    } else if (key == "tau_n_ps") {
      c.lifetimes.tau_n = hs::ps_to_ns(get_number(doc, key));
    } else if (key == "tau_r_ps") {
      c.lifetimes.tau_r = hs::ps_to_ns(get_number(doc, key));
    } else if (key == "dark_rate_fluor_hz") {
      c.dark_rate_fluor = get_number(doc, key);
    } else if (key == "dark_rate_herald_hz") {
      c.dark_rate_herald = get_number(doc, key);
    } else if (key == "jitter_sigma_ps") {
      c.jitter_sigma = get_number(doc, key);
    } else if (key == "seed") {
      c.seed = get_unsigned(doc, key);
    } else {
      throw config_error("unknown key '" + key + "'");
    }
  }
  try {
    hs::validate(c);
  } catch (const std::exception& e) {
    throw config_error(e.what());
  }
  return s;
}

int cmd_simulate(const std::string& config_path, const std::string& out,
                 std::optional<std::uint64_t> seed, unsigned threads) {
  SimulationSpec spec = parse_simulation(load_json(config_path));
  if (seed) spec.config.seed = *seed;
  const hs::TagStream s = spec.mode == hs::Excitation::heralded
                              ? hs::simulate_heralded(spec.config, threads)
                              : hs::simulate_laser(spec.config, threads);
  hs::write_tags(s, out);
  std::cout << "mode=" << (spec.mode == hs::Excitation::heralded ? "heralded" : "laser") << '\n'
            << "herald_tags=" << s.count(hs::Channel::herald) << '\n'
            << "fluorescence_tags=" << s.count(hs::Channel::fluorescence) << '\n'
            << "duration_ps=" << s.duration << '\n'
            << "seed=" << spec.config.seed << '\n'
            << "config_digest=" << s.config_digest << '\n'
            << "predicted_r=" << fmt(hs::predict_accidental_ratio(spec.config)) << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// histogram

hs::Channel channel_arg(const std::string& name) {
  const auto c = hs::parse_channel(name);
  if (!c) throw ExitError(2, "unknown channel '" + name + "'");
  return *c;
}

int cmd_histogram(const std::string& tags, const std::string& out, const std::string& start,
                  const std::string& stop, std::int64_t t_min, std::int64_t t_max,
                  std::int64_t width, std::optional<std::int64_t> fold) {
  const hs::Channel a = channel_arg(start), b = channel_arg(stop);
  const hs::TagStream s = hs::read_tags(tags);
  hs::Histogram h;
  try {
    h = fold ? hs::folded_histogram(s, b, *fold, width)
             : hs::delay_histogram(s, a, b, t_min, t_max, width);
  } catch (const std::invalid_argument& e) {
    throw ExitError(2, e.what());
  }
  hs::write_file(out, hs::encode_histogram_csv(h));
  std::cout << "bins=" << h.size() << "\ntotal=" << h.total() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// fit

std::string param_key(hs::Param p) {
  switch (p) {
    case hs::Param::tau_n: return "tau_n_ps";
    case hs::Param::tau_r: return "tau_r_ps";
    case hs::Param::pulse_period: return "t0_ps";
    default: return std::string(hs::to_string(p));
  }
}

/// Report units: times in ps, A in counts, b in counts per bin.
double report_scale(hs::Param p) {
  return p == hs::Param::tau_n || p == hs::Param::tau_r || p == hs::Param::pulse_period ? 1e3 : 1.0;
}

std::vector<hs::Param> param_list(const std::vector<std::string>& names) {
  std::vector<hs::Param> out;
  for (const auto& n : names) {
    const auto p = hs::parse_param(n);
    if (!p) throw ExitError(2, "unknown parameter '" + n + "' (expected A, b, r, tau_n, tau_r, t0)");
    out.push_back(*p);
  }
  return out;
}

std::string fit_report(const hs::FitProblem& pr, const hs::FitResult& r,
                       const std::vector<std::pair<hs::Param, hs::ProfileInterval>>& profiles) {
  std::ostringstream os;
  json doc;
  doc["model"] = std::string(hs::to_string(pr.model));
  doc["loss"] = std::string(hs::to_string(pr.loss));
  doc["converged"] = r.converged;
  doc["iterations"] = r.n_iter;
  doc["loss_value"] = rounded(r.loss_value);
  doc["dof"] = r.dof;
  doc["statistic"] = rounded(r.statistic);
  os << "model=" << hs::to_string(pr.model) << '\n'
     << "loss=" << hs::to_string(pr.loss) << '\n'
     << "converged=" << (r.converged ? "true" : "false") << '\n'
     << "iterations=" << r.n_iter << '\n'
     << "loss_value=" << fmt(r.loss_value) << '\n'
     << "dof=" << r.dof << '\n'
     << "statistic=" << fmt(r.statistic) << '\n';
  json params = json::array();
  for (std::size_t j = 0; j < hs::kParamCount; ++j) {
    const auto p = static_cast<hs::Param>(j);
    if (pr.model == hs::ModelKind::periodic && p == hs::Param::ratio) continue;
    const double scale = report_scale(p);
    const double est = hs::get(r.params, p) * scale;
    const double err = r.std_errors[j] * scale;
    const std::string key = param_key(p);
    os << key << '=' << fmt(est) << '\n';
    os << key << "_std_error=" << (std::isfinite(err) ? fmt(err) : "nan") << '\n';
    params.push_back({{"param", key}, {"estimate", rounded(est)}, {"std_error", rounded(err)}});
  }
  doc["params"] = params;
  for (const auto& [p, iv] : profiles) {
    const double scale = report_scale(p);
    const std::string key = param_key(p);
    os << key << "_profile_lower=" << fmt(iv.lower * scale) << (iv.lower_unbounded ? " unbounded" : "")
       << (iv.lower_at_boundary ? " boundary" : "") << '\n';
    os << key << "_profile_upper=" << fmt(iv.upper * scale) << (iv.upper_unbounded ? " unbounded" : "")
       << '\n';
    doc["profiles"].push_back({{"param", key},
                               {"lower", rounded(iv.lower * scale)},
                               {"upper", rounded(iv.upper * scale)},
                               {"lower_unbounded", iv.lower_unbounded},
                               {"upper_unbounded", iv.upper_unbounded},
                               {"lower_at_boundary", iv.lower_at_boundary}});
  }
  os << "--- json\n" << doc.dump(2) << '\n';
  return os.str();
}

int cmd_fit(const std::string& hist, const std::string& model, const std::string& loss,
            const std::vector<std::string>& fix, const std::vector<std::string>& profile,
            std::int64_t period_ps, bool fit_t0, const std::string& out) {
  hs::FitProblem pr;
  const auto m = hs::parse_model(model);
  if (!m) throw ExitError(2, "unknown model '" + model + "'");
  const auto l = hs::parse_loss(loss);
  if (!l) throw ExitError(2, "unknown loss '" + loss + "'");
  if (period_ps <= 0) throw ExitError(2, "--pulse-period-ps must be positive");
  pr.model = *m;
  pr.loss = *l;
  pr.pulse_period = hs::ps_to_ns(static_cast<double>(period_ps));
  pr.fixed.clear();
  for (hs::Param p : param_list(fix)) pr.fixed.insert(p);
  if (!fit_t0) pr.fixed.insert(hs::Param::pulse_period);

  hs::Histogram h;
  try {
    h = hs::decode_histogram_csv(hs::read_file(hist));
  } catch (const std::invalid_argument& e) {
    throw ExitError(3, hist + ": " + e.what());
  }
  pr.data = hs::to_binned(h);

  hs::FitResult r;
  try {
    r = hs::fit(pr);
  } catch (const std::invalid_argument& e) {
    throw ExitError(2, e.what());
  }
  std::vector<std::pair<hs::Param, hs::ProfileInterval>> profiles;
  for (hs::Param p : param_list(profile)) {
    if (pr.fixed.count(p) || (pr.model == hs::ModelKind::periodic && p == hs::Param::ratio)) {
      throw ExitError(2, "cannot profile fixed parameter '" + std::string(hs::to_string(p)) + "'");
    }
    if (!r.converged) throw ExitError(1, "fit did not converge; no profile computed");
    profiles.emplace_back(p, hs::profile_uncertainty(pr, r, p));
  }
  const std::string report = fit_report(pr, r, profiles);
  if (out.empty()) {
    std::cout << report;
  } else {
    hs::write_file(out, report);
  }
  return r.converged ? 0 : 1;
}

// ---------------------------------------------------------------------------
// model-eval

int cmd_model_eval(const std::string& model, double amplitude, double background, double ratio,
                   double tau_n_ps, double tau_r_ps, std::int64_t period_ps, std::int64_t t_min,
                   std::int64_t t_max, std::int64_t step, int terms, const std::string& out) {
  const auto m = hs::parse_model(model);
  if (!m) throw ExitError(2, "unknown model '" + model + "'");
  if (step <= 0 || t_max <= t_min) throw ExitError(2, "need --step-ps > 0 and --t-max-ps > --t-min-ps");
  const hs::DecayParams p{amplitude, background, ratio,
                          {hs::ps_to_ns(tau_n_ps), hs::ps_to_ns(tau_r_ps)},
                          hs::ps_to_ns(static_cast<double>(period_ps))};
  std::string csv = "t_ps,value\n";
  try {
    hs::validate(p);
    for (std::int64_t t = t_min; t < t_max; t += step) {
      const double tn = hs::ps_to_ns(static_cast<double>(t));
      double v = 0.0;
      switch (*m) {
        case hs::ModelKind::heralded_closed: v = hs::eval_heralded_closed(tn, p); break;
        case hs::ModelKind::heralded_sum: v = hs::eval_heralded_sum(tn, p, terms); break;
        case hs::ModelKind::periodic:
          v = hs::eval_periodic(tn, amplitude, background, p.lifetimes, p.pulse_period);
          break;
      }
      char line[64];
      std::snprintf(line, sizeof line, "%lld,%.17g\n", static_cast<long long>(t), v);
      csv += line;
    }
  } catch (const std::domain_error& e) {
    throw ExitError(2, e.what());
  }
  if (out.empty()) {
    std::cout << csv;
  } else {
    hs::write_file(out, csv);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// g2

int cmd_g2(const std::string& tags, std::int64_t window, std::int64_t offset) {
  const hs::TagStream s = hs::read_tags(tags);
  hs::G2Estimate e;
  try {
    e = hs::estimate_g2(s, window, offset);
  } catch (const std::invalid_argument& ex) {
    throw ExitError(2, ex.what());
  } catch (const std::domain_error& ex) {
    throw ExitError(1, ex.what());
  }
  std::cout << "g2=" << fmt(e.g2) << '\n'
            << "g2_std_error=" << fmt(e.std_error) << '\n'
            << "heralds=" << e.heralds << '\n'
            << "heralds_with_one_or_more=" << e.heralds_with_one_or_more << '\n'
            << "heralds_with_two_or_more=" << e.heralds_with_two_or_more << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// snr

struct SnrOverrides {
  std::optional<double> n_dc, eta_ir, eta_ir_sspd, eta_spdc;
};

void print_snr(const hs::SnrInputs& in) {
  std::cout << "n_f=" << fmt(in.n_f) << '\n'
            << "n_coinc=" << fmt(in.n_coinc) << '\n'
            << "n_vis=" << fmt(in.n_vis) << '\n'
            << "heralded_signal_rate=" << fmt(hs::heralded_signal_rate(in)) << '\n'
            << "heralded_dark_rate=" << fmt(hs::heralded_dark_rate(in)) << '\n';
  if (hs::heralded_dark_rate(in) > 0.0) {
    std::cout << "snr=" << fmt(hs::snr(in)) << '\n';
  } else {
    std::cout << "snr=unbounded\n";
  }
}

int cmd_snr_inputs(const std::string& path) {
  const json doc = load_json(path);
  const bool fractions = doc.contains("unheralded_snr");
  hs::SnrInputs in;
  double u = 0, sig = 0, dark = 0;
  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (key == "schema_version") continue;
    double* target = nullptr;
    if (fractions) {
      if (key == "unheralded_snr") target = &u;
      if (key == "signal_fraction") target = &sig;
      if (key == "dark_fraction") target = &dark;
    } else {
      if (key == "n_f") target = &in.n_f;
      if (key == "n_coinc") target = &in.n_coinc;
      if (key == "n_vis") target = &in.n_vis;
      if (key == "n_dc") target = &in.n_dc;
      if (key == "eta_ir") target = &in.eta_ir;
      if (key == "eta_ir_sspd") target = &in.eta_ir_sspd;
      if (key == "eta_spdc") target = &in.eta_spdc;
    }
    if (target == nullptr) throw config_error("unknown key '" + key + "'");
    *target = get_number(doc, key);
  }
  try {
    if (fractions) {
      for (const char* k : {"signal_fraction", "dark_fraction"}) {
        if (!doc.contains(k)) throw config_error(std::string("missing key '") + k + "'");
      }
      std::cout << "snr=" << fmt(hs::snr_from_fractions(u, sig, dark)) << '\n';
    } else {
      print_snr(in);
    }
  } catch (const std::invalid_argument& e) {
    throw config_error(e.what());
  } catch (const std::domain_error& e) {
    throw ExitError(1, e.what());
  }
  return 0;
}

int cmd_snr_tags(const std::string& tags, std::int64_t half_window, std::int64_t center,
                 const SnrOverrides& o) {
  const hs::TagStream s = hs::read_tags(tags);
  hs::MeasuredRates m;
  try {
    m = hs::measure_rates(s, half_window, center);
  } catch (const std::exception& e) {
    throw ExitError(2, e.what());
  }
  std::cout << "duration_s=" << fmt(m.duration_s) << '\n'
            << "n_herald=" << fmt(m.n_herald) << '\n'
            << "coincidences=" << m.coincidence_count << '\n';
  hs::SnrInputs in = m.partial_inputs();
  in.n_dc = o.n_dc.value_or(0.0);
  in.eta_ir = o.eta_ir.value_or(0.0);
  in.eta_ir_sspd = o.eta_ir_sspd.value_or(0.0);
  in.eta_spdc = o.eta_spdc.value_or(0.0);
  try {
    if (in.n_vis > 0.0) {
      print_snr(in);
    } else {
      std::cout << "n_vis=0\n";
    }
  } catch (const std::invalid_argument& e) {
    throw ExitError(2, e.what());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heralded fluorescence simulation and analysis"};
  app.set_version_flag("--version", std::string("heraldsim ") + hs::kVersion);
  app.require_subcommand(1);
  app.fallthrough(false);

  auto version = [](CLI::App* sub) {
    sub->set_version_flag("--version", std::string("heraldsim ") + hs::kVersion);
  };

  // simulate
  std::string sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  unsigned sim_threads = 0;
  auto* sim = app.add_subcommand("simulate", "Generate a tag stream from a JSON experiment config");
  version(sim);
  sim->add_option("-c,--config", sim_config, "JSON experiment config")->required();
  sim->add_option("-o,--out", sim_out, "Output tag file (.csv for text, binary otherwise)")->required();
  sim->add_option("--seed", sim_seed, "Override the config seed");
  sim->add_option("--threads", sim_threads, "Worker threads (0 = all cores)");

  // histogram
  std::string h_tags, h_out, h_start = "herald", h_stop = "fluorescence";
  std::int64_t h_min = -12'500, h_max = 37'500, h_width = 50;
  std::optional<std::int64_t> h_fold;
  auto* hist = app.add_subcommand("histogram", "Start-stop delay histogram of a tag file");
  version(hist);
  hist->add_option("-t,--tags", h_tags, "Input tag file")->required();
  hist->add_option("-o,--out", h_out, "Output histogram CSV")->required();
  hist->add_option("--start", h_start, "Start channel")->capture_default_str();
  hist->add_option("--stop", h_stop, "Stop channel")->capture_default_str();
  hist->add_option("--t-min-ps", h_min, "Window start")->capture_default_str();
  hist->add_option("--t-max-ps", h_max, "Window end")->capture_default_str();
  hist->add_option("--bin-width-ps", h_width, "Bin width")->capture_default_str();
  hist->add_option("--fold-period-ps", h_fold,
                   "Fold stop-channel arrival times modulo this period instead");

  // fit
  std::string f_hist, f_model = "heralded_closed", f_loss = "poisson_mle", f_out;
  std::vector<std::string> f_fix, f_profile;
  std::int64_t f_period = 12'500;
  auto* fitc = app.add_subcommand("fit", "Fit a decay model to a histogram CSV");
  version(fitc);
  fitc->add_option("-i,--histogram", f_hist, "Histogram CSV")->required();
  fitc->add_option("--model", f_model, "heralded_closed | heralded_sum | periodic")->capture_default_str();
  fitc->add_option("--loss", f_loss, "poisson_mle | weighted_lsq")->capture_default_str();
  fitc->add_option("--fix", f_fix, "Parameters held at their initial guess (A,b,r,tau_n,tau_r)")->delimiter(',');
  fitc->add_option("--profile", f_profile, "Parameters to profile")->delimiter(',');
  fitc->add_option("--pulse-period-ps", f_period, "Pulse period t0")->capture_default_str();
  bool f_fit_t0 = false;
  fitc->add_flag("--fit-t0", f_fit_t0, "Also fit the pulse period");
  fitc->add_option("-o,--out", f_out, "Report file (default: stdout)");

  // model-eval
  std::string e_model = "heralded_closed", e_out;
  double e_a = 1.0, e_b = 0.0, e_r = 0.0, e_tn = 107.0, e_tr = 7680.0;
  std::int64_t e_period = 12'500, e_min = -12'500, e_max = 37'500, e_step = 50;
  int e_terms = hs::kDefaultSeriesTerms;
  auto* eval = app.add_subcommand("model-eval", "Evaluate a model curve on a time grid");
  version(eval);
  eval->add_option("--model", e_model, "heralded_closed | heralded_sum | periodic")->capture_default_str();
  eval->add_option("--amplitude", e_a, "A")->capture_default_str();
  eval->add_option("--background", e_b, "b")->capture_default_str();
  eval->add_option("--ratio", e_r, "r")->capture_default_str();
  eval->add_option("--tau-n-ps", e_tn, "tau_N")->capture_default_str();
  eval->add_option("--tau-r-ps", e_tr, "tau_R")->capture_default_str();
  eval->add_option("--pulse-period-ps", e_period, "t0")->capture_default_str();
  eval->add_option("--t-min-ps", e_min, "Grid start")->capture_default_str();
  eval->add_option("--t-max-ps", e_max, "Grid end (exclusive)")->capture_default_str();
  eval->add_option("--step-ps", e_step, "Grid step")->capture_default_str();
  eval->add_option("--terms", e_terms, "Series terms for heralded_sum")->capture_default_str();
  eval->add_option("-o,--out", e_out, "Output CSV (default: stdout)");

  // g2
  std::string g_tags;
  std::int64_t g_window = 12'500, g_offset = 0;
  auto* g2 = app.add_subcommand("g2", "Heralded g2(0) of a tag file");
  version(g2);
  g2->add_option("-t,--tags", g_tags, "Input tag file")->required();
  g2->add_option("--window-ps", g_window, "Slot length after each herald")->capture_default_str();
  g2->add_option("--offset-ps", g_offset, "Slot start relative to the herald")->capture_default_str();

  // snr
  std::string s_inputs, s_tags;
  std::int64_t s_half = hs::kDefaultCoincidenceHalfWindow, s_center = 0;
  SnrOverrides s_over;
  auto* snrc = app.add_subcommand("snr", "Heralded signal-to-noise ratio");
  version(snrc);
  auto* in_opt = snrc->add_option("--inputs", s_inputs, "JSON rate or fraction inputs");
  auto* tag_opt = snrc->add_option("-t,--tags", s_tags, "Tag file to measure rates from");
  in_opt->excludes(tag_opt);
  snrc->add_option("--half-window-ps", s_half, "Coincidence half window")->capture_default_str();
  snrc->add_option("--center-ps", s_center, "Coincidence window center")->capture_default_str();
  snrc->add_option("--dark-rate-hz", s_over.n_dc, "Fluorescence detector dark rate");
  snrc->add_option("--eta-ir", s_over.eta_ir, "IR coupling efficiency");
  snrc->add_option("--eta-ir-sspd", s_over.eta_ir_sspd, "IR detector efficiency");
  snrc->add_option("--eta-spdc", s_over.eta_spdc, "Pair probability per pulse");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) return cmd_simulate(sim_config, sim_out, sim_seed, sim_threads);
    if (*hist) return cmd_histogram(h_tags, h_out, h_start, h_stop, h_min, h_max, h_width, h_fold);
    if (*fitc) return cmd_fit(f_hist, f_model, f_loss, f_fix, f_profile, f_period, f_fit_t0, f_out);
    if (*eval) {
      return cmd_model_eval(e_model, e_a, e_b, e_r, e_tn, e_tr, e_period, e_min, e_max, e_step,
                            e_terms, e_out);
    }
    if (*g2) return cmd_g2(g_tags, g_window, g_offset);
    if (*snrc) {
      if (!s_inputs.empty()) return cmd_snr_inputs(s_inputs);
      if (!s_tags.empty()) return cmd_snr_tags(s_tags, s_half, s_center, s_over);
      std::cerr << "snr: one of --inputs or --tags is required\n";
      return 2;
    }
  } catch (const ExitError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.code;
  } catch (const hs::IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return 3;
  } catch (const hs::TagParseError& e) {
    std::cerr << "malformed tag file: " << e.what() << '\n';
    return 3;
  } catch (const hs::InitializationError& e) {
    std::cerr << "fit initialization failed: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
