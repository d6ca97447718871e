#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tsa/grid.hpp"

namespace tsa {

// One studied contingency: a line outage following a three-phase fault at
// one of its endpoints. FAA machine and load sets may be given explicitly or
// left to the sensitivity analysis ("auto").
struct ContingencyConfig {
  int bus_a = 0, bus_b = 0;
  std::optional<int> fault_bus;  // default: lower-numbered endpoint
  double t_fault = 1.0;
  double t_clear = 1.25;
  bool faa_machines_auto = true;
  std::vector<int> faa_machine_buses;
  bool faa_loads_auto = false;
  std::vector<int> faa_load_buses;

  std::string name() const { return "line_" + std::to_string(bus_a) + "-" + std::to_string(bus_b); }
};

struct ExperimentConfig {
  std::string case_path;
  std::vector<ContingencyConfig> contingencies;

  // scenario set sizes and multiplier ranges
  long long count_same = 0, count_aux = 0, count_test = 0, count_baseline = 0;
  long long count_sensitivity = 500;
  double same_lo = 0.6, same_hi = 1.4;
  double aux_lo = 0.4, aux_hi = 1.6;

  // disjoint Sobol offsets per set; the master seed shifts all of them by
  // seed * seed_stride so different seeds see disjoint samples
  std::uint64_t skip_same = 1, skip_test = 1 << 18, skip_baseline = 1 << 19, skip_aux = 3 << 18,
                skip_sensitivity = 1 << 20;
  std::uint64_t seed_stride = 1 << 21;

  // time-domain simulation
  double t_end = 5.0, dt = 0.005, threshold_deg = 180.0;
  std::vector<std::pair<std::string, long long>> dump_scenarios;  // (set, scenario id)

  // learner and cost grid
  int learner_rounds = 50, learner_depth = 3;
  std::vector<double> grid_c_fn, grid_c_fp;
  double slack_pp = 0.2;

  double faa_threshold = 0.35;

  std::uint64_t seed = 1;
  unsigned workers = 8;
  std::string out_dir = "out";

  std::uint64_t skip_for(const std::string& set) const {
    const std::uint64_t shift = seed * seed_stride;
    if (set == "same") return skip_same + shift;
    if (set == "test") return skip_test + shift;
    if (set == "baseline") return skip_baseline + shift;
    if (set == "aux") return skip_aux + shift;
    if (set == "sensitivity") return skip_sensitivity + shift;
    fail(ErrorKind::BadArgument, "unknown scenario set '" + set + "'");
  }
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& v, const std::string& ctx) {
  std::vector<int> out;
  for (const auto& tok : split(v, ',')) {
    if (tok.empty()) continue;
    out.push_back(static_cast<int>(parse_int(tok, ctx)));
  }
  return out;
}

inline std::vector<double> parse_double_list(const std::string& v, const std::string& ctx) {
  std::vector<double> out;
  for (const auto& tok : split(v, ',')) {
    if (tok.empty()) continue;
    out.push_back(parse_double(tok, ctx));
  }
  return out;
}

[[noreturn]] inline void config_fail(const std::string& msg) { fail(ErrorKind::ConfigError, msg); }

}  // namespace detail

// Reference syntax: '#' comments, `[section]` headers, `key = value` lines.
// Sections: top level (before any header), [contingency] (repeatable),
// [scenario], [transient], [learner], [grid], [faa]. See
// docs/config_schema.md for every key.
inline ExperimentConfig parse_experiment_config(const std::string& path) {
  const std::string content = read_file(path);
  ExperimentConfig cfg;
  cfg.grid_c_fn = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  cfg.grid_c_fp = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  std::istringstream in(content);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (t[0] == '[') {
      if (t != "[contingency]" && t != "[scenario]" && t != "[transient]" && t != "[learner]" && t != "[grid]" &&
          t != "[faa]")
        detail::config_fail("unknown section " + t + " at " + ctx);
      section = t;
      if (t == "[contingency]") cfg.contingencies.emplace_back();
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) detail::config_fail("expected key = value at " + ctx);
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));

    if (section.empty()) {
      if (key == "case") cfg.case_path = val;
      else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "workers") cfg.workers = static_cast<unsigned>(parse_int(val, ctx));
      else if (key == "out") cfg.out_dir = val;
      else detail::config_fail("unknown key '" + key + "' at " + ctx);
    } else if (section == "[contingency]") {
      auto& c = cfg.contingencies.back();
      if (key == "line") {
        const auto parts = split(val, '-');
        if (parts.size() != 2) detail::config_fail("line must be 'a-b' at " + ctx);
        c.bus_a = static_cast<int>(parse_int(parts[0], ctx));
        c.bus_b = static_cast<int>(parse_int(parts[1], ctx));
      } else if (key == "fault_bus") c.fault_bus = static_cast<int>(parse_int(val, ctx));
      else if (key == "t_fault") c.t_fault = parse_double(val, ctx);
      else if (key == "t_clear") c.t_clear = parse_double(val, ctx);
      else if (key == "faa_machines") {
        c.faa_machines_auto = val == "auto";
        if (!c.faa_machines_auto) c.faa_machine_buses = detail::parse_int_list(val, ctx);
      } else if (key == "faa_loads") {
        c.faa_loads_auto = val == "auto";
        if (!c.faa_loads_auto) c.faa_load_buses = detail::parse_int_list(val, ctx);
      } else detail::config_fail("unknown contingency key '" + key + "' at " + ctx);
    } else if (section == "[scenario]") {
      if (key == "count_same") cfg.count_same = parse_int(val, ctx);
      else if (key == "count_aux") cfg.count_aux = parse_int(val, ctx);
      else if (key == "count_test") cfg.count_test = parse_int(val, ctx);
      else if (key == "count_baseline") cfg.count_baseline = parse_int(val, ctx);
      else if (key == "count_sensitivity") cfg.count_sensitivity = parse_int(val, ctx);
      else if (key == "range_same") {
        const auto r = detail::parse_double_list(val, ctx);
        if (r.size() != 2) detail::config_fail("range_same needs lo,hi at " + ctx);
        cfg.same_lo = r[0];
        cfg.same_hi = r[1];
      } else if (key == "range_aux") {
        const auto r = detail::parse_double_list(val, ctx);
        if (r.size() != 2) detail::config_fail("range_aux needs lo,hi at " + ctx);
        cfg.aux_lo = r[0];
        cfg.aux_hi = r[1];
      } else if (key == "skip_same") cfg.skip_same = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "skip_aux") cfg.skip_aux = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "skip_test") cfg.skip_test = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "skip_baseline") cfg.skip_baseline = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "skip_sensitivity") cfg.skip_sensitivity = static_cast<std::uint64_t>(parse_int(val, ctx));
      else if (key == "seed_stride") cfg.seed_stride = static_cast<std::uint64_t>(parse_int(val, ctx));
      else detail::config_fail("unknown scenario key '" + key + "' at " + ctx);
    } else if (section == "[transient]") {
      if (key == "t_end") cfg.t_end = parse_double(val, ctx);
      else if (key == "dt") cfg.dt = parse_double(val, ctx);
      else if (key == "threshold_deg") cfg.threshold_deg = parse_double(val, ctx);
      else if (key == "dump_scenarios") {
        for (const auto& tok : split(val, ';')) {
          if (tok.empty()) continue;
          const auto parts = split(tok, ':');
          if (parts.size() != 2) detail::config_fail("dump_scenarios entries are set:id at " + ctx);
          cfg.dump_scenarios.emplace_back(parts[0], parse_int(parts[1], ctx));
        }
      } else detail::config_fail("unknown transient key '" + key + "' at " + ctx);
    } else if (section == "[learner]") {
      if (key == "rounds") cfg.learner_rounds = static_cast<int>(parse_int(val, ctx));
      else if (key == "depth") cfg.learner_depth = static_cast<int>(parse_int(val, ctx));
      else detail::config_fail("unknown learner key '" + key + "' at " + ctx);
    } else if (section == "[grid]") {
      if (key == "c_fn") cfg.grid_c_fn = detail::parse_double_list(val, ctx);
      else if (key == "c_fp") cfg.grid_c_fp = detail::parse_double_list(val, ctx);
      else if (key == "slack_pp") cfg.slack_pp = parse_double(val, ctx);
      else detail::config_fail("unknown grid key '" + key + "' at " + ctx);
    } else if (section == "[faa]") {
      if (key == "threshold") cfg.faa_threshold = parse_double(val, ctx);
      else detail::config_fail("unknown faa key '" + key + "' at " + ctx);
    }
  }
  return cfg;
}

// Structural validation against the case; rejects bad references before any
// compute is spent.
inline void validate_config(const ExperimentConfig& cfg, const GridCase& gc) {
  if (cfg.contingencies.empty()) detail::config_fail("no [contingency] section");
  if (cfg.count_same < 0 || cfg.count_aux < 0 || cfg.count_test < 0 || cfg.count_baseline < 0 ||
      cfg.count_sensitivity < 0)
    detail::config_fail("scenario counts must be >= 0");
  if (!(cfg.same_lo > 0 && cfg.same_hi > cfg.same_lo)) detail::config_fail("range_same needs 0 < lo < hi");
  if (!(cfg.aux_lo > 0 && cfg.aux_hi > cfg.aux_lo)) detail::config_fail("range_aux needs 0 < lo < hi");
  if (cfg.learner_rounds < 1 || cfg.learner_depth < 1) detail::config_fail("learner needs rounds >= 1, depth >= 1");
  if (cfg.grid_c_fn.empty() || cfg.grid_c_fp.empty()) detail::config_fail("empty cost grid");
  for (double v : cfg.grid_c_fn)
    if (!(v > 0)) detail::config_fail("c_fn values must be positive");
  for (double v : cfg.grid_c_fp)
    if (!(v > 0)) detail::config_fail("c_fp values must be positive");
  if (!(cfg.slack_pp >= 0)) detail::config_fail("slack_pp must be >= 0");
  if (!(cfg.dt > 0) || !(cfg.t_end > 0)) detail::config_fail("dt and t_end must be positive");
  if (cfg.workers < 1) detail::config_fail("workers must be >= 1");

  for (const auto& c : cfg.contingencies) {
    try {
      gc.find_branch(c.bus_a, c.bus_b);
    } catch (const Error& e) {
      detail::config_fail(std::string("contingency ") + c.name() + ": " + e.what());
    }
    if (c.fault_bus && *c.fault_bus != c.bus_a && *c.fault_bus != c.bus_b)
      detail::config_fail("contingency " + c.name() + ": fault bus " + std::to_string(*c.fault_bus) +
                          " is not an endpoint");
    if (!(c.t_clear > c.t_fault)) detail::config_fail("contingency " + c.name() + ": t_clear must exceed t_fault");
    if (c.t_fault >= cfg.t_end) detail::config_fail("contingency " + c.name() + ": t_fault beyond t_end");
    for (int b : c.faa_machine_buses)
      if (gc.generators_at(b).empty())
        detail::config_fail("contingency " + c.name() + ": no generator at bus " + std::to_string(b));
    for (int b : c.faa_load_buses)
      if (!gc.has_bus(b) || !gc.is_load_bus(b))
        detail::config_fail("contingency " + c.name() + ": bus " + std::to_string(b) + " is not a load bus");
    if (!c.faa_loads_auto && c.faa_load_buses.empty())
      detail::config_fail("contingency " + c.name() + ": faa_loads must be 'auto' or a bus list");
  }
}

// Canonical serialization of everything that affects results. Worker count
// and output location are deliberately excluded: reruns with different
// parallelism or target directory must reproduce identical artifacts.
inline std::string canonical_config(const ExperimentConfig& cfg) {
  std::string s;
  s += "case=" + cfg.case_path + "\n";
  s += "seed=" + std::to_string(cfg.seed) + "\n";
  for (const auto& c : cfg.contingencies) {
    s += "contingency " + c.name();
    s += " fault_bus=" + (c.fault_bus ? std::to_string(*c.fault_bus) : std::string("auto"));
    s += " t_fault=" + fmt_double(c.t_fault) + " t_clear=" + fmt_double(c.t_clear);
    s += " machines=";
    if (c.faa_machines_auto) s += "auto";
    else
      for (int b : c.faa_machine_buses) s += std::to_string(b) + ",";
    s += " loads=";
    if (c.faa_loads_auto) s += "auto";
    else
      for (int b : c.faa_load_buses) s += std::to_string(b) + ",";
    s += "\n";
  }
  s += "counts=" + std::to_string(cfg.count_same) + "," + std::to_string(cfg.count_aux) + "," +
       std::to_string(cfg.count_test) + "," + std::to_string(cfg.count_baseline) + "," +
       std::to_string(cfg.count_sensitivity) + "\n";
  s += "ranges=" + fmt_double(cfg.same_lo) + "," + fmt_double(cfg.same_hi) + "," + fmt_double(cfg.aux_lo) + "," +
       fmt_double(cfg.aux_hi) + "\n";
  s += "skips=" + std::to_string(cfg.skip_same) + "," + std::to_string(cfg.skip_aux) + "," +
       std::to_string(cfg.skip_test) + "," + std::to_string(cfg.skip_baseline) + "," +
       std::to_string(cfg.skip_sensitivity) + "," + std::to_string(cfg.seed_stride) + "\n";
  s += "transient=" + fmt_double(cfg.t_end) + "," + fmt_double(cfg.dt) + "," + fmt_double(cfg.threshold_deg) + "\n";
  s += "learner=" + std::to_string(cfg.learner_rounds) + "," + std::to_string(cfg.learner_depth) + "\n";
  s += "grid_c_fn=";
  for (double v : cfg.grid_c_fn) s += fmt_double(v) + ",";
  s += "\ngrid_c_fp=";
  for (double v : cfg.grid_c_fp) s += fmt_double(v) + ",";
  s += "\nslack_pp=" + fmt_double(cfg.slack_pp) + "\n";
  s += "faa_threshold=" + fmt_double(cfg.faa_threshold) + "\n";
  for (const auto& [set, id] : cfg.dump_scenarios) s += "dump=" + set + ":" + std::to_string(id) + "\n";
  return s;
}

inline std::uint64_t config_hash(const ExperimentConfig& cfg, std::uint64_t case_checksum) {
  return fnv1a64(canonical_config(cfg), case_checksum ^ 0xcbf29ce484222325ull);
}

}  // namespace tsa
