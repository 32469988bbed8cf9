#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alb.hpp"
#include "aub.hpp"
#include "classic_bounds.hpp"
#include "common.hpp"
#include "config.hpp"
#include "mc_sim.hpp"
#include "mie.hpp"
#include "parallel.hpp"
#include "signal_model.hpp"
#include "thresholds.hpp"

namespace mlelab {

inline constexpr double ns = 1e-9;
inline constexpr double ghz = 1e9;
inline constexpr double ps = 1e-12;
inline constexpr const char* tool_version = "1.0.0";

/// Everything derived once from a config: signal, partition, SNR grid.
struct Lab {
  ExperimentConfig cfg;
  PulseSpec pulse;
  DomainSpec domain;
  SignalSetup sig;
  PartitionMode mode = PartitionMode::non_oscillating;
  Partition part;
  std::vector<double> snr_db;
  std::vector<double> rho;
  int threads = 1;
};

inline PulseSpec pulse_from_config(const ExperimentConfig& cfg) {
  PulseSpec p;
  p.tw = cfg.pulse.tw_ns * ns;
  p.fc = cfg.fc_ghz() * ghz;
  p.es = cfg.es();
  p.oversample = cfg.oversample();
  return p;
}

inline DomainSpec domain_from_config(const ExperimentConfig& cfg) {
  return DomainSpec{cfg.domain.theta1_ns * ns, cfg.domain.theta2_ns * ns, cfg.domain.theta0_ns * ns};
}

inline std::vector<double> to_linear(const std::vector<double>& db) {
  std::vector<double> out(db.size());
  for (std::size_t i = 0; i < db.size(); ++i) out[i] = db_to_linear(db[i]);
  return out;
}

inline Lab make_lab(const ExperimentConfig& cfg, int threads) {
  Lab lab;
  lab.cfg = cfg;
  lab.threads = std::max(1, threads);
  lab.snr_db = snr_grid_db(cfg.snr);
  lab.rho = to_linear(lab.snr_db);
  lab.pulse = pulse_from_config(cfg);
  lab.domain = domain_from_config(cfg);
  lab.sig = make_signal(lab.pulse, lab.domain);
  lab.mode = cfg.partition_mode() == "oscillating" ? PartitionMode::oscillating : PartitionMode::non_oscillating;
  lab.part = make_partition(lab.sig.model, lab.domain, lab.mode, cfg.n_intervals());
  return lab;
}

/// Whole domain as one interval; used when the ACR has no side peaks.
inline Partition single_interval_partition(const DomainSpec& d) {
  Partition p;
  p.mode = PartitionMode::oscillating;
  p.domain = d;
  p.boundaries = {d.theta1, d.theta2};
  p.testpoints = {d.theta0};
  p.edge = {true};
  p.center = 0;
  return p;
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// ---------------------------------------------------------------- curves

struct MseaLabel {
  int prob_scheme = 1;
  MomentScheme moments = MomentScheme::uniform;
};

inline std::optional<MseaLabel> parse_msea_label(const std::string& s) {
  if (s.size() < 5 || s.rfind("e_", 0) != 0) return std::nullopt;
  const char i = s[2];
  if (i < '1' || i > '3' || s[3] != '_') return std::nullopt;
  const std::string rest = s.substr(4);
  MseaLabel l;
  l.prob_scheme = i - '0';
  if (rest == "U") l.moments = MomentScheme::uniform;
  else if (rest == "1_c") l.moments = MomentScheme::monotone_bernoulli;
  else if (rest == "2_c") l.moments = MomentScheme::monotone_noiseless;
  else if (rest == "1_o") l.moments = MomentScheme::peak_gaussian;
  else if (rest == "2_o") l.moments = MomentScheme::peak_noiseless;
  else return std::nullopt;
  return l;
}

inline const std::vector<std::string>& simple_curve_labels() {
  static const std::vector<std::string> v{"e_U", "c", "c_e", "c_B", "e_MN", "e_M", "e_C", "z_1", "b_1", "z_2", "b_2", "e_S"};
  return v;
}

inline std::vector<std::string> default_curve_labels(PartitionMode mode) {
  std::vector<std::string> out{"e_U", "c", "c_e", "c_B"};
  const char x = mode == PartitionMode::oscillating ? 'o' : 'c';
  for (int i = 1; i <= 3; ++i) {
    const std::string p = "e_" + std::to_string(i) + "_";
    out.push_back(p + "U");
    out.push_back(p + "1_" + x);
    out.push_back(p + "2_" + x);
  }
  for (const char* s : {"e_MN", "e_M", "e_C", "z_1", "b_1", "e_S"}) out.emplace_back(s);
  return out;
}

inline void validate_curve_labels(const std::vector<std::string>& labels, PartitionMode mode) {
  require(!labels.empty(), ErrorKind::argument, "no curves requested");
  for (const auto& l : labels) {
    if (std::find(simple_curve_labels().begin(), simple_curve_labels().end(), l) != simple_curve_labels().end()) continue;
    const auto m = parse_msea_label(l);
    if (!m) fail(ErrorKind::argument, "unknown curve label '" + l + "'");
    if (!scheme_fits(m->moments, mode))
      fail(ErrorKind::argument, "curve '" + l + "' does not apply to a " + std::string(to_string(mode)) + " partition");
  }
}

struct CurveSet {
  std::vector<double> snr_db;
  std::vector<BoundCurve> curves;
  bool blb_jitter = false;

  const BoundCurve& get(const std::string& label) const {
    for (const auto& c : curves)
      if (c.label == label) return c;
    fail(ErrorKind::argument, "curve '" + label + "' was not computed");
  }
};

inline SimResult simulate_lab(const Lab& lab, const std::vector<double>& rho, bool with_partition, int trials,
                              std::uint64_t seed) {
  SimConfig sc;
  sc.model = lab.sig.model;
  sc.domain = lab.domain;
  sc.rho = rho;
  sc.trials = trials;
  sc.grid_points = static_cast<std::size_t>(lab.cfg.grid_points());
  sc.seed = seed;
  sc.refine = lab.cfg.refine();
  sc.threads = lab.threads;
  if (with_partition) sc.partition = lab.part;
  return simulate(sc);
}

inline CurveSet compute_curves(const Lab& lab, const std::vector<std::string>& labels) {
  validate_curve_labels(labels, lab.mode);
  const std::size_t nr = lab.rho.size();
  const auto& model = lab.sig.model;
  const auto& d = lab.domain;
  auto wants = [&](const std::string& l) { return std::find(labels.begin(), labels.end(), l) != labels.end(); };

  std::map<std::string, std::vector<double>> values;
  for (const auto& l : labels) values[l].assign(nr, 0.0);

  std::vector<MseaLabel> mseas;
  bool need_p1 = false, need_p2 = false;
  for (const auto& l : labels)
    if (auto m = parse_msea_label(l)) {
      mseas.push_back(*m);
      need_p1 |= m->prob_scheme == 1;
      need_p2 |= m->prob_scheme != 1;
    }

  std::vector<char> jitter(nr, 0);
  const MvnConfig mvn{lab.cfg.mvn_points(), lab.cfg.mvn_seed()};
  const double eu = max_mse(d);
  const auto cv = curvatures(model);

  parallel_for(nr, lab.threads, [&](std::size_t k) {
    const double rho = lab.rho[k];
    auto put = [&](const char* l, double v) {
      if (wants(l)) values[l][k] = v;
    };
    put("e_U", eu);
    put("c", crlb(rho, cv.beta_s2));
    put("c_e", ecrlb(rho, cv.beta_e2));
    if (wants("c_B")) {
      const auto r = blb(model, d, lab.part.testpoints, rho);
      values["c_B"][k] = r.value;
      jitter[k] = r.jitter_applied;
    }
    if (wants("e_M")) values["e_M"][k] = aub_density(model, d, rho).mse;
    if (wants("e_MN")) values["e_MN"][k] = msea_mn(model, d, rho, lab.mode).density.mse;
    if (wants("e_C")) values["e_C"][k] = taylor_alb(lab.sig.stats, model, d, rho).mse;
    if (wants("z_1") || wants("b_1") || wants("z_2") || wants("b_2")) {
      const auto z = zz_alb(model, d, rho);
      put("z_1", z.z1);
      put("b_1", z.b1);
      put("z_2", z.z2);
      put("b_2", z.b2);
    }
    if (!mseas.empty()) {
      std::vector<double> p1, p2, p3;
      if (need_p1) p1 = interval_probs_p1(lab.part, model, rho, MvnConfig{mvn.n_points, derive_seed(mvn.seed, k)}).p;
      if (need_p2) {
        p2 = interval_probs_p2(lab.part, model, rho).p;
        p3 = interval_probs_p3(lab.part, model, rho).p;
      }
      std::map<MomentScheme, IntervalMoments> mom;
      for (const auto& m : mseas) {
        if (!mom.count(m.moments)) mom[m.moments] = interval_moments(lab.part, model, rho, m.moments);
        const auto& probs = m.prob_scheme == 1 ? p1 : (m.prob_scheme == 2 ? p2 : p3);
        const std::string l = "e_" + std::to_string(m.prob_scheme) + "_" + std::string(to_string(m.moments));
        values[l][k] = msea(lab.part, probs, mom[m.moments]).mse;
      }
    }
  });

  if (wants("e_S")) {
    const auto sim = simulate_lab(lab, lab.rho, false, lab.cfg.trials(), lab.cfg.sim_seed());
    for (std::size_t k = 0; k < nr; ++k) values["e_S"][k] = sim.points[k].mse;
  }

  CurveSet cs;
  cs.snr_db = lab.snr_db;
  for (char j : jitter) cs.blb_jitter |= j != 0;
  for (const auto& l : labels) cs.curves.push_back(BoundCurve{l, lab.rho, values[l]});
  return cs;
}

inline std::string curves_csv(const CurveSet& cs) {
  std::string out = "label,rho_db,sqrt_mse_ps\n";
  for (const auto& c : cs.curves)
    for (std::size_t k = 0; k < c.rho.size(); ++k)
      out += c.label + "," + fmt(cs.snr_db[k]) + "," + fmt(std::sqrt(c.mse[k]) / ps) + "\n";
  return out;
}

inline std::vector<std::string> requested_labels(const Lab& lab) {
  if (lab.cfg.outputs && lab.cfg.outputs->curves) return *lab.cfg.outputs->curves;
  return default_curve_labels(lab.mode);
}

// ------------------------------------------------------------ thresholds

struct CurveThresholds {
  std::map<std::string, double> values;  // rho_pr_db, rho_as_db, rho_am1_db, rho_am2_db
  std::map<std::string, std::pair<ErrorKind, std::string>> errors;
};

/// Thresholds of one curve. Each one is attempted on its own, so a missing
/// crossing is reported without hiding the others. Ambiguity thresholds are
/// only defined for oscillating ACRs.
inline CurveThresholds curve_thresholds(const Lab& lab, const BoundCurve& curve) {
  const std::size_t n = lab.rho.size();
  std::vector<double> c(n), ce(n);
  const auto cv = curvatures(lab.sig.model);
  for (std::size_t k = 0; k < n; ++k) {
    c[k] = crlb(lab.rho[k], cv.beta_s2);
    ce[k] = ecrlb(lab.rho[k], cv.beta_e2);
  }
  const ThresholdAlphas a;
  CurveThresholds out;
  auto attempt = [&](const std::string& key, auto&& fn) {
    try {
      out.values[key] = fn();
    } catch (const Error& e) {
      out.errors[key] = {e.kind(), e.what()};
    }
  };
  ThresholdOptions opt;
  opt.ambiguity = lab.mode == PartitionMode::oscillating;
  try {
    const auto t = extract_thresholds(curve, c, ce, max_mse(lab.domain), opt);
    out.values["rho_pr_db"] = t.rho_pr_db;
    out.values["rho_as_db"] = t.rho_as_db;
    if (t.rho_am1_db) out.values["rho_am1_db"] = *t.rho_am1_db;
    if (t.rho_am2_db) out.values["rho_am2_db"] = *t.rho_am2_db;
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::argument) out.errors["span"] = {e.kind(), e.what()};
  }
  // Fall back to crossing-by-crossing extraction without the span check.
  curve.validate();
  auto scaled = [](const std::vector<double>& v, double k) {
    auto o = v;
    for (auto& x : o) x *= k;
    return o;
  };
  auto cross = [&](const std::string& key, const std::vector<double>& target, Crossing which) {
    attempt(key, [&] {
      const auto v = find_crossing(curve.rho, curve.mse, target, which);
      if (!v) fail(ErrorKind::range, "no crossing found for " + key.substr(0, key.size() - 3) + " on curve '" + curve.label + "'");
      return *v;
    });
  };
  cross("rho_pr_db", std::vector<double>(n, a.pr * max_mse(lab.domain)), Crossing::first);
  cross("rho_as_db", scaled(c, a.as), Crossing::last);
  if (opt.ambiguity) {
    cross("rho_am1_db", scaled(ce, a.am1), Crossing::first);
    cross("rho_am2_db", scaled(ce, a.am2), Crossing::last);
  }
  return out;
}

inline json thresholds_json(const Lab& lab, const CurveSet& cs) {
  const ThresholdAlphas a;
  json out;
  out["alphas"] = json{{"pr", a.pr}, {"as", a.as}, {"am1", a.am1}, {"am2", a.am2}};
  json curves = json::object();
  for (const auto& curve : cs.curves) {
    const auto t = curve_thresholds(lab, curve);
    json entry = json::object();
    for (const auto& [k, v] : t.values) entry[k] = v;
    for (const auto& [k, e] : t.errors)
      entry["errors"][k] = json{{"kind", std::string(to_string(e.first))}, {"message", e.second}};
    curves[curve.label] = entry;
  }
  out["curves"] = curves;
  return out;
}

// --------------------------------------------------------- other outputs

inline json signal_info_json(const Lab& lab) {
  const auto& m = lab.sig.model;
  const auto cv = curvatures(m);
  const auto& st = lab.sig.stats;
  json j;
  j["beta_s2"] = cv.beta_s2;
  j["beta_e2"] = cv.beta_e2;
  j["beta_ratio"] = cv.beta_s2 / cv.beta_e2;
  j["fc_mean_hz"] = m.fc_mean();
  j["identity_residual"] = curvature_identity_residual(m);
  j["e_sdot_over_es"] = st.e_sdot / st.e_s;
  j["delta4"] = st.delta4;
  j["nu0"] = st.nu0;
  j["max_mse_s2"] = max_mse(lab.domain);
  j["partition"] = json{{"mode", std::string(to_string(lab.mode))},
                        {"intervals", lab.part.size()},
                        {"center", lab.part.center},
                        {"count_adjusted", lab.part.count_adjusted}};
  return j;
}

struct Table1Row {
  double fc_ghz = 0.0;
  double rho_db = 0.0;
  double sqrt_c = 0.0;   // s
  double sqrt_es = 0.0;  // s
  long n0 = 0;
  long n1 = 0;
  int trials = 0;
};

inline std::vector<Table1Row> table1_rows(const Lab& lab) {
  std::vector<double> fcs{lab.cfg.fc_ghz()};
  std::vector<double> rdb{10.0, 15.0, 20.0};
  if (lab.cfg.table1 && lab.cfg.table1->fc_ghz) fcs = *lab.cfg.table1->fc_ghz;
  if (lab.cfg.table1 && lab.cfg.table1->rho_db) rdb = *lab.cfg.table1->rho_db;
  require(!fcs.empty() && !rdb.empty(), ErrorKind::argument, "table1 needs carrier and SNR lists");
  const auto rho = to_linear(rdb);
  std::vector<Table1Row> rows;
  for (double fc : fcs) {
    ExperimentConfig cfg = lab.cfg;
    cfg.pulse.fc_ghz = fc;
    Lab sub;
    sub.cfg = cfg;
    sub.threads = lab.threads;
    sub.pulse = pulse_from_config(cfg);
    sub.domain = lab.domain;
    sub.sig = make_signal(sub.pulse, sub.domain);
    // Counts refer to the lobes of the ACR; a pulse without side lobes has
    // a single interval and N1 = 0.
    try {
      sub.part = make_partition(sub.sig.model, sub.domain, PartitionMode::oscillating);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::model) throw;
      sub.part = single_interval_partition(sub.domain);
    }
    const auto sim = simulate_lab(sub, rho, true, cfg.trials(), cfg.sim_seed());
    const double bs = sub.sig.model.beta_s2();
    for (std::size_t k = 0; k < rho.size(); ++k) {
      const auto& pt = sim.points[k];
      const auto p1 = sub.part.position_of(1);
      rows.push_back(Table1Row{fc, rdb[k], std::sqrt(crlb(rho[k], bs)), pt.rmse, pt.hits[sub.part.center],
                               p1 ? pt.hits[*p1] : 0, sim.trials});
    }
  }
  return rows;
}

inline std::string table1_csv(const std::vector<Table1Row>& rows) {
  std::string out = "fc_ghz,rho_db,sqrt_c_ps,sqrt_es_ps,ratio,n0,n1\n";
  for (const auto& r : rows)
    out += fmt(r.fc_ghz) + "," + fmt(r.rho_db) + "," + fmt(r.sqrt_c / ps) + "," + fmt(r.sqrt_es / ps) + "," +
           fmt(r.sqrt_es / r.sqrt_c) + "," + std::to_string(r.n0) + "," + std::to_string(r.n1) + "\n";
  return out;
}

inline std::vector<int> requested_intervals(const Lab& lab, std::vector<int> fallback) {
  if (lab.cfg.outputs && lab.cfg.outputs->intervals) return *lab.cfg.outputs->intervals;
  return fallback;
}

inline std::size_t require_interval(const Partition& part, int n) {
  const auto p = part.position_of(n);
  if (!p) fail(ErrorKind::argument, "interval n=" + std::to_string(n) + " is not in the partition");
  return *p;
}

struct ProbRow {
  double rho_db = 0.0;
  int n = 0;
  double p_s = 0.0, p_1 = 0.0, p_1_err = 0.0, p_2 = 0.0, p_3 = 0.0;
};

inline std::vector<ProbRow> prob_rows(const Lab& lab) {
  std::vector<double> db = lab.snr_db;
  if (lab.cfg.prob_curves && lab.cfg.prob_curves->snr) db = snr_grid_db(*lab.cfg.prob_curves->snr);
  const auto rho = to_linear(db);
  const auto ns_req = requested_intervals(lab, {0, 1});
  std::vector<std::size_t> pos;
  for (int n : ns_req) pos.push_back(require_interval(lab.part, n));
  const auto sim = simulate_lab(lab, rho, true, lab.cfg.trials(), lab.cfg.sim_seed());
  std::vector<IntervalProbs> p1(rho.size()), p2(rho.size()), p3(rho.size());
  parallel_for(rho.size(), lab.threads, [&](std::size_t k) {
    p1[k] = interval_probs_p1(lab.part, lab.sig.model, rho[k],
                              MvnConfig{lab.cfg.mvn_points(), derive_seed(lab.cfg.mvn_seed(), k)}, pos);
    p2[k] = interval_probs_p2(lab.part, lab.sig.model, rho[k]);
    p3[k] = interval_probs_p3(lab.part, lab.sig.model, rho[k]);
  });
  std::vector<ProbRow> rows;
  for (std::size_t k = 0; k < rho.size(); ++k) {
    const auto emp = empirical_interval_probs(sim.points[k], sim.trials);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      const std::size_t q = pos[i];
      rows.push_back(ProbRow{db[k], ns_req[i], emp[q], p1[k].p[q], p1[k].err[q], p2[k].p[q], p3[k].p[q]});
    }
  }
  return rows;
}

inline std::string prob_curves_csv(const std::vector<ProbRow>& rows) {
  std::string out = "rho_db,n,p_s,p_1,p_1_err,p_2,p_3\n";
  for (const auto& r : rows)
    out += fmt(r.rho_db) + "," + std::to_string(r.n) + "," + fmt(r.p_s) + "," + fmt(r.p_1) + "," + fmt(r.p_1_err) +
           "," + fmt(r.p_2) + "," + fmt(r.p_3) + "\n";
  return out;
}

struct IntervalStdRow {
  double rho_db = 0.0;
  int n = 0;
  long hits = 0;
  double p_s = 0.0;
  double sigma_s = 0.0, sigma_u = 0.0, sigma_1 = 0.0;  // s
};

inline std::vector<IntervalStdRow> interval_std_rows(const Lab& lab) {
  const double rdb = lab.cfg.interval_std && lab.cfg.interval_std->rho_db ? *lab.cfg.interval_std->rho_db : 10.0;
  const double rho = db_to_linear(rdb);
  const auto sim = simulate_lab(lab, {rho}, true, lab.cfg.trials(), lab.cfg.sim_seed());
  const auto& pt = sim.points.front();
  const auto mu = interval_moments(lab.part, lab.sig.model, rho, MomentScheme::uniform);
  const auto m1 = interval_moments(lab.part, lab.sig.model, rho,
                                   lab.mode == PartitionMode::oscillating ? MomentScheme::peak_gaussian
                                                                          : MomentScheme::monotone_bernoulli);
  std::vector<int> all;
  for (std::size_t k = 0; k < lab.part.size(); ++k) all.push_back(lab.part.index_of(k));
  std::vector<IntervalStdRow> rows;
  for (int n : requested_intervals(lab, all)) {
    const std::size_t k = require_interval(lab.part, n);
    rows.push_back(IntervalStdRow{rdb, n, pt.hits[k], static_cast<double>(pt.hits[k]) / sim.trials,
                                  pt.interval_std[k], std::sqrt(mu.var[k]), std::sqrt(m1.var[k])});
  }
  return rows;
}

inline std::string interval_std_csv(const std::vector<IntervalStdRow>& rows) {
  std::string out = "rho_db,n,hits,p_s,sigma_s_ps,sigma_u_ps,sigma_1_ps\n";
  for (const auto& r : rows)
    out += fmt(r.rho_db) + "," + std::to_string(r.n) + "," + std::to_string(r.hits) + "," + fmt(r.p_s) + "," +
           fmt(r.sigma_s / ps) + "," + fmt(r.sigma_u / ps) + "," + fmt(r.sigma_1 / ps) + "\n";
  return out;
}

// ---------------------------------------------------------------- runner

inline const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> v{"signal-info", "table1", "prob-curves", "interval-std", "curves", "thresholds"};
  return v;
}

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> trials;
};

inline ExperimentConfig apply_overrides(ExperimentConfig cfg, const RunOverrides& o) {
  if (o.seed || o.trials) {
    if (!cfg.sim) cfg.sim = ExperimentConfig::Sim{};
    if (o.seed) cfg.sim->seed = *o.seed;
    if (o.trials) cfg.sim->trials = *o.trials;
  }
  return cfg;
}

/// Produces {file name, contents} pairs for one subcommand.
inline std::vector<std::pair<std::string, std::string>> run_subcommand(const std::string& sub, const ExperimentConfig& cfg,
                                                                       int threads) {
  if (std::find(subcommands().begin(), subcommands().end(), sub) == subcommands().end())
    fail(ErrorKind::argument, "unknown subcommand '" + sub + "'");
  const Lab lab = make_lab(cfg, threads);
  if (sub == "signal-info") return {{"signal_info.json", signal_info_json(lab).dump(2) + "\n"}};
  if (sub == "table1") return {{"table1.csv", table1_csv(table1_rows(lab))}};
  if (sub == "prob-curves") return {{"prob_curves.csv", prob_curves_csv(prob_rows(lab))}};
  if (sub == "interval-std") return {{"interval_std.csv", interval_std_csv(interval_std_rows(lab))}};
  const auto cs = compute_curves(lab, requested_labels(lab));
  if (sub == "curves") return {{"curves.csv", curves_csv(cs)}};
  return {{"thresholds.json", thresholds_json(lab, cs).dump(2) + "\n"}};
}

inline json manifest_json(const std::string& sub, const ExperimentConfig& cfg, const std::vector<std::string>& files) {
  json m;
  m["tool"] = "mle-threshold-lab";
  m["version"] = tool_version;
  m["subcommand"] = sub;
  m["config_hash"] = config_hash(cfg);
  m["config"] = config_to_json(cfg);
  m["seeds"] = json{{"sim", cfg.sim_seed()}, {"mvn", cfg.mvn_seed()}};
  m["trials"] = cfg.trials();
  m["outputs"] = files;
  return m;
}

namespace detail {

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  if (!f) fail(ErrorKind::io, "cannot write '" + p.string() + "'");
  f << s;
  if (!f) fail(ErrorKind::io, "failed writing '" + p.string() + "'");
}

}  // namespace detail

inline json error_record(const std::string& sub, ErrorKind kind, const std::string& message) {
  return json{{"error", json{{"subcommand", sub}, {"kind", std::string(to_string(kind))}, {"message", message}}}};
}

/// Runs a subcommand into `out_dir`. Results are staged and only moved into
/// place on success; on failure the staging area is removed and error.json
/// describes what went wrong. Wall time goes to timing.json so that every
/// other file is reproducible byte for byte.
inline std::vector<std::string> run_to_directory(const std::string& sub, const ExperimentConfig& cfg,
                                                 const std::filesystem::path& out_dir, int threads) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) fail(ErrorKind::io, "cannot create output directory '" + out_dir.string() + "'");
  const fs::path staging = out_dir / (".staging-" + sub);
  fs::remove_all(staging, ec);
  try {
    fs::create_directories(staging);
    const auto files = run_subcommand(sub, cfg, threads);
    std::vector<std::string> names;
    for (const auto& [name, body] : files) {
      detail::write_file(staging / name, body);
      names.push_back(name);
    }
    detail::write_file(staging / "manifest.json", manifest_json(sub, cfg, names).dump(2) + "\n");
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    detail::write_file(staging / "timing.json", json{{"subcommand", sub}, {"wall_seconds", wall}}.dump(2) + "\n");
    names.push_back("manifest.json");
    names.push_back("timing.json");
    for (const auto& n : names) {
      fs::remove(out_dir / n, ec);
      fs::rename(staging / n, out_dir / n);
    }
    fs::remove_all(staging, ec);
    fs::remove(out_dir / "error.json", ec);
    return names;
  } catch (const Error& e) {
    fs::remove_all(staging, ec);
    detail::write_file(out_dir / "error.json", error_record(sub, e.kind(), e.what()).dump(2) + "\n");
    throw;
  } catch (const std::exception& e) {
    fs::remove_all(staging, ec);
    detail::write_file(out_dir / "error.json", error_record(sub, ErrorKind::numeric, e.what()).dump(2) + "\n");
    throw;
  }
}

}  // namespace mlelab
