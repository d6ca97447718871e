#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "tsa/grid.hpp"

namespace testutil {

inline std::string source_path(const std::string& rel) { return std::string(TSA_SOURCE_DIR) + "/" + rel; }

inline std::string case39_path() { return source_path("data/ieee39.case"); }

// Writes a case text to a unique temp file and returns its path.
inline std::string write_temp(const std::string& content, const std::string& tag = "case") {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() / "tsa_tests";
  std::filesystem::create_directories(dir);
  const auto path = dir / (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".txt");
  std::ofstream out(path);
  out << content;
  return path.string();
}

// Two-bus fixture: slack feeding a PQ load over x = 0.1 (r = 0).
inline std::string two_bus_case_text(double p_load_mw = 100.0, double q_load_mvar = 0.0) {
  std::string s;
  s += "[bus]\n";
  s += "id, kind, p_load, q_load, gs, bs, v_setpoint\n";
  s += "1, slack, 0, 0, 0, 0, 1.0\n";
  s += "2, pq, " + tsa::fmt_double(p_load_mw) + ", " + tsa::fmt_double(q_load_mvar) + ", 0, 0, 1.0\n";
  s += "[branch]\n";
  s += "from_bus, to_bus, r, x, b_total, tap, status\n";
  s += "1, 2, 0, 0.1, 0, 1.0, in\n";
  s += "[gen]\n";
  s += "bus, p_min, p_max, q_min, q_max, cost_a, cost_b, cost_c, inertia_h, xd_prime, damping_d\n";
  s += "1, 0, 1000, -1000, 1000, 0.01, 10, 0, 5.0, 0.1, 0\n";
  s += "[area]\n";
  s += "bus, area\n";
  s += "1, 1\n";
  s += "2, 1\n";
  return s;
}

inline tsa::GridCase two_bus_case(double p_load_mw = 100.0, double q_load_mvar = 0.0) {
  return tsa::parse_case(write_temp(two_bus_case_text(p_load_mw, q_load_mvar)));
}

// Single machine against a stiff equivalent: the classic double-circuit
// setup. Machine at bus 2 exports p_load_mw to the load behind the stiff
// source at bus 1. A fault at bus 2 on one circuit, cleared by tripping it,
// leaves the other circuit in service.
inline tsa::GridCase smib_case(double machine_p_max = 200.0) {
  std::string s;
  s += "[bus]\n";
  s += "id, kind, p_load, q_load, gs, bs, v_setpoint\n";
  s += "1, slack, 100, 0, 0, 0, 1.0\n";
  s += "2, pv, 0, 0, 0, 0, 1.0\n";
  s += "[branch]\n";
  s += "from_bus, to_bus, r, x, b_total, tap, status\n";
  s += "1, 2, 0, 0.5, 0, 1.0, in\n";
  s += "1, 2, 0, 0.5, 0, 1.0, in\n";
  s += "[gen]\n";
  s += "bus, p_min, p_max, q_min, q_max, cost_a, cost_b, cost_c, inertia_h, xd_prime, damping_d\n";
  s += "1, 0, 10000, -10000, 10000, 0.1, 50, 0, 50000, 0.0001, 0\n";
  s += "2, 0, " + tsa::fmt_double(machine_p_max) + ", -1000, 1000, 0.001, 1, 0, 3.5, 0.3, 0\n";
  s += "[area]\n";
  s += "bus, area\n";
  s += "1, 1\n";
  s += "2, 2\n";
  return tsa::parse_case(write_temp(s, "smib"));
}

}  // namespace testutil
