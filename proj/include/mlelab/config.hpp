#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"

namespace mlelab {

using json = nlohmann::json;

/// Experiment description as read from a .cfg (JSON) file. Every optional
/// field stays empty when absent so a parsed config serializes back to the
/// same document.
struct ExperimentConfig {
  struct Pulse {
    double tw_ns = 0.0;
    std::optional<double> fc_ghz;
    std::optional<double> es;
    std::optional<int> oversample;
  };
  struct Domain {
    double theta1_ns = 0.0;
    double theta2_ns = 0.0;
    double theta0_ns = 0.0;
  };
  struct Snr {
    double min_db = 0.0;
    double max_db = 0.0;
    double step_db = 1.0;
  };
  struct PartitionCfg {
    std::string mode = "non_oscillating";
    std::optional<int> n_intervals;
  };
  struct Sim {
    std::optional<int> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::uint64_t> grid_points;
    std::optional<bool> refine;
  };
  struct Mvn {
    std::optional<int> n_points;
    std::optional<std::uint64_t> seed;
  };
  struct Outputs {
    std::optional<std::vector<std::string>> curves;
    std::optional<std::vector<int>> intervals;
  };
  struct Table1 {
    std::optional<std::vector<double>> fc_ghz;
    std::optional<std::vector<double>> rho_db;
  };
  struct ProbCurves {
    std::optional<Snr> snr;
  };
  struct IntervalStd {
    std::optional<double> rho_db;
  };

  std::optional<std::string> name;
  Pulse pulse;
  Domain domain;
  Snr snr;
  std::optional<PartitionCfg> partition;
  std::optional<Sim> sim;
  std::optional<Mvn> mvn;
  std::optional<Outputs> outputs;
  std::optional<Table1> table1;
  std::optional<ProbCurves> prob_curves;
  std::optional<IntervalStd> interval_std;

  // Effective values with defaults applied.
  double fc_ghz() const { return pulse.fc_ghz.value_or(0.0); }
  double es() const { return pulse.es.value_or(1.0); }
  int oversample() const { return pulse.oversample.value_or(32); }
  std::string partition_mode() const { return partition ? partition->mode : (fc_ghz() > 0.0 ? "oscillating" : "non_oscillating"); }
  std::optional<int> n_intervals() const { return partition ? partition->n_intervals : std::nullopt; }
  int trials() const { return sim && sim->trials ? *sim->trials : 10000; }
  std::uint64_t sim_seed() const { return sim && sim->seed ? *sim->seed : 1; }
  std::uint64_t grid_points() const { return sim && sim->grid_points ? *sim->grid_points : 0; }
  bool refine() const { return sim && sim->refine ? *sim->refine : true; }
  int mvn_points() const { return mvn && mvn->n_points ? *mvn->n_points : 3000; }
  std::uint64_t mvn_seed() const { return mvn && mvn->seed ? *mvn->seed : 5; }
};

namespace detail {

inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) fail(ErrorKind::argument, "config: '" + where + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (!allowed.count(k)) fail(ErrorKind::argument, "config: unknown key '" + k + "' in '" + where + "'");
  }
}

inline double get_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) fail(ErrorKind::argument, "config: missing '" + where + "." + key + "'");
  const auto& v = j.at(key);
  if (!v.is_number()) fail(ErrorKind::argument, "config: '" + where + "." + key + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ErrorKind::argument, "config: '" + where + "." + key + "' must be finite");
  return x;
}

inline std::optional<double> opt_number(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  return get_number(j, key, where);
}

inline std::optional<std::int64_t> opt_int(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) fail(ErrorKind::argument, "config: '" + where + "." + key + "' must be an integer");
  return v.get<std::int64_t>();
}

inline std::optional<std::uint64_t> opt_uint(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) return std::nullopt;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
    fail(ErrorKind::argument, "config: '" + where + "." + key + "' must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

inline std::optional<int> opt_small_int(const json& j, const std::string& key, const std::string& where) {
  const auto v = opt_int(j, key, where);
  if (!v) return std::nullopt;
  if (*v < -1000000000 || *v > 1000000000) fail(ErrorKind::argument, "config: '" + where + "." + key + "' out of range");
  return static_cast<int>(*v);
}

inline ExperimentConfig::Snr parse_snr(const json& j, const std::string& where) {
  check_keys(j, {"min_db", "max_db", "step_db"}, where);
  ExperimentConfig::Snr s;
  s.min_db = get_number(j, "min_db", where);
  s.max_db = get_number(j, "max_db", where);
  s.step_db = get_number(j, "step_db", where);
  return s;
}

inline json snr_to_json(const ExperimentConfig::Snr& s) {
  return json{{"min_db", s.min_db}, {"max_db", s.max_db}, {"step_db", s.step_db}};
}

template <class T>
std::vector<T> number_list(const json& j, const std::string& where) {
  if (!j.is_array()) fail(ErrorKind::argument, "config: '" + where + "' must be an array");
  std::vector<T> out;
  for (const auto& v : j) {
    if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) fail(ErrorKind::argument, "config: '" + where + "' must hold integers");
    } else {
      if (!v.is_number()) fail(ErrorKind::argument, "config: '" + where + "' must hold numbers");
    }
    out.push_back(v.get<T>());
  }
  return out;
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j) {
  using namespace detail;
  check_keys(j, {"name", "pulse", "domain", "snr", "partition", "sim", "mvn", "outputs", "table1", "prob_curves",
                 "interval_std"},
             "config");
  ExperimentConfig c;
  if (j.contains("name")) {
    if (!j["name"].is_string()) fail(ErrorKind::argument, "config: 'name' must be a string");
    c.name = j["name"].get<std::string>();
  }
  if (!j.contains("pulse")) fail(ErrorKind::argument, "config: missing 'pulse'");
  const auto& p = j["pulse"];
  check_keys(p, {"tw_ns", "fc_ghz", "es", "oversample"}, "pulse");
  c.pulse.tw_ns = get_number(p, "tw_ns", "pulse");
  c.pulse.fc_ghz = opt_number(p, "fc_ghz", "pulse");
  c.pulse.es = opt_number(p, "es", "pulse");
  c.pulse.oversample = opt_small_int(p, "oversample", "pulse");

  if (!j.contains("domain")) fail(ErrorKind::argument, "config: missing 'domain'");
  const auto& d = j["domain"];
  check_keys(d, {"theta1_ns", "theta2_ns", "theta0_ns"}, "domain");
  c.domain.theta1_ns = get_number(d, "theta1_ns", "domain");
  c.domain.theta2_ns = get_number(d, "theta2_ns", "domain");
  c.domain.theta0_ns = get_number(d, "theta0_ns", "domain");

  if (!j.contains("snr")) fail(ErrorKind::argument, "config: missing 'snr'");
  c.snr = parse_snr(j["snr"], "snr");

  if (j.contains("partition")) {
    const auto& q = j["partition"];
    check_keys(q, {"mode", "n_intervals"}, "partition");
    ExperimentConfig::PartitionCfg pc;
    if (!q.contains("mode") || !q["mode"].is_string()) fail(ErrorKind::argument, "config: 'partition.mode' must be a string");
    pc.mode = q["mode"].get<std::string>();
    if (pc.mode != "oscillating" && pc.mode != "non_oscillating")
      fail(ErrorKind::argument, "config: 'partition.mode' must be oscillating or non_oscillating");
    pc.n_intervals = opt_small_int(q, "n_intervals", "partition");
    c.partition = pc;
  }
  if (j.contains("sim")) {
    const auto& s = j["sim"];
    check_keys(s, {"trials", "seed", "grid_points", "refine"}, "sim");
    ExperimentConfig::Sim sc;
    sc.trials = opt_small_int(s, "trials", "sim");
    sc.seed = opt_uint(s, "seed", "sim");
    sc.grid_points = opt_uint(s, "grid_points", "sim");
    if (s.contains("refine")) {
      if (!s["refine"].is_boolean()) fail(ErrorKind::argument, "config: 'sim.refine' must be a boolean");
      sc.refine = s["refine"].get<bool>();
    }
    c.sim = sc;
  }
  if (j.contains("mvn")) {
    const auto& m = j["mvn"];
    check_keys(m, {"n_points", "seed"}, "mvn");
    ExperimentConfig::Mvn mc;
    mc.n_points = opt_small_int(m, "n_points", "mvn");
    mc.seed = opt_uint(m, "seed", "mvn");
    c.mvn = mc;
  }
  if (j.contains("outputs")) {
    const auto& o = j["outputs"];
    check_keys(o, {"curves", "intervals"}, "outputs");
    ExperimentConfig::Outputs oc;
    if (o.contains("curves")) {
      if (!o["curves"].is_array()) fail(ErrorKind::argument, "config: 'outputs.curves' must be an array");
      std::vector<std::string> labels;
      for (const auto& v : o["curves"]) {
        if (!v.is_string()) fail(ErrorKind::argument, "config: 'outputs.curves' must hold strings");
        labels.push_back(v.get<std::string>());
      }
      oc.curves = labels;
    }
    if (o.contains("intervals")) oc.intervals = number_list<int>(o["intervals"], "outputs.intervals");
    c.outputs = oc;
  }
  if (j.contains("table1")) {
    const auto& t = j["table1"];
    check_keys(t, {"fc_ghz", "rho_db"}, "table1");
    ExperimentConfig::Table1 tc;
    if (t.contains("fc_ghz")) tc.fc_ghz = number_list<double>(t["fc_ghz"], "table1.fc_ghz");
    if (t.contains("rho_db")) tc.rho_db = number_list<double>(t["rho_db"], "table1.rho_db");
    c.table1 = tc;
  }
  if (j.contains("prob_curves")) {
    const auto& t = j["prob_curves"];
    check_keys(t, {"snr"}, "prob_curves");
    ExperimentConfig::ProbCurves pc;
    if (t.contains("snr")) pc.snr = parse_snr(t["snr"], "prob_curves.snr");
    c.prob_curves = pc;
  }
  if (j.contains("interval_std")) {
    const auto& t = j["interval_std"];
    check_keys(t, {"rho_db"}, "interval_std");
    ExperimentConfig::IntervalStd ic;
    ic.rho_db = opt_number(t, "rho_db", "interval_std");
    c.interval_std = ic;
  }
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.name) j["name"] = *c.name;
  json p{{"tw_ns", c.pulse.tw_ns}};
  if (c.pulse.fc_ghz) p["fc_ghz"] = *c.pulse.fc_ghz;
  if (c.pulse.es) p["es"] = *c.pulse.es;
  if (c.pulse.oversample) p["oversample"] = *c.pulse.oversample;
  j["pulse"] = p;
  j["domain"] = json{{"theta1_ns", c.domain.theta1_ns}, {"theta2_ns", c.domain.theta2_ns}, {"theta0_ns", c.domain.theta0_ns}};
  j["snr"] = detail::snr_to_json(c.snr);
  if (c.partition) {
    json q{{"mode", c.partition->mode}};
    if (c.partition->n_intervals) q["n_intervals"] = *c.partition->n_intervals;
    j["partition"] = q;
  }
  if (c.sim) {
    json s = json::object();
    if (c.sim->trials) s["trials"] = *c.sim->trials;
    if (c.sim->seed) s["seed"] = *c.sim->seed;
    if (c.sim->grid_points) s["grid_points"] = *c.sim->grid_points;
    if (c.sim->refine) s["refine"] = *c.sim->refine;
    j["sim"] = s;
  }
  if (c.mvn) {
    json m = json::object();
    if (c.mvn->n_points) m["n_points"] = *c.mvn->n_points;
    if (c.mvn->seed) m["seed"] = *c.mvn->seed;
    j["mvn"] = m;
  }
  if (c.outputs) {
    json o = json::object();
    if (c.outputs->curves) o["curves"] = *c.outputs->curves;
    if (c.outputs->intervals) o["intervals"] = *c.outputs->intervals;
    j["outputs"] = o;
  }
  if (c.table1) {
    json t = json::object();
    if (c.table1->fc_ghz) t["fc_ghz"] = *c.table1->fc_ghz;
    if (c.table1->rho_db) t["rho_db"] = *c.table1->rho_db;
    j["table1"] = t;
  }
  if (c.prob_curves) {
    json t = json::object();
    if (c.prob_curves->snr) t["snr"] = detail::snr_to_json(*c.prob_curves->snr);
    j["prob_curves"] = t;
  }
  if (c.interval_std) {
    json t = json::object();
    if (c.interval_std->rho_db) t["rho_db"] = *c.interval_std->rho_db;
    j["interval_std"] = t;
  }
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    fail(ErrorKind::argument, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(j);
}

/// SNR grid in dB; values are rounded to 1e-9 dB so that accumulated step
/// error never shows up in output files.
inline std::vector<double> snr_grid_db(const ExperimentConfig::Snr& s) {
  if (!(s.step_db > 0.0)) fail(ErrorKind::argument, "SNR step must be > 0");
  if (s.max_db < s.min_db) fail(ErrorKind::argument, "empty SNR grid");
  const auto n = static_cast<std::size_t>(std::floor((s.max_db - s.min_db) / s.step_db + 1e-9)) + 1;
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = std::round((s.min_db + s.step_db * static_cast<double>(k)) * 1e9) / 1e9;
  return out;
}

/// 64-bit FNV-1a of the canonical (sorted-key) serialization.
inline std::string config_hash(const ExperimentConfig& c) {
  const std::string s = config_to_json(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string("fnv1a64:") + buf;
}

}  // namespace mlelab
