#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "tsa/dispatch.hpp"
#include "tsa/sobol.hpp"

namespace tsa {

struct ScenarioSpec {
  std::vector<int> varying_buses;  // subset of load buses, ascending
  double lo = 0.6, hi = 1.4;       // multiplier range for the varying buses
  int count = 0;
  std::uint64_t skip = 1;          // initial Sobol points to discard
};

// One multiplier map per scenario over every load bus: Sobol component u of
// varying bus -> lo + u (hi - lo), all other load buses fixed at 1.0.
inline std::vector<std::map<int, double>> generate_load_scenarios(const ScenarioSpec& spec, const GridCase& gc) {
  if (!(spec.lo > 0) || !(spec.hi > spec.lo)) fail(ErrorKind::BadArgument, "need 0 < lo < hi");
  if (spec.count < 0) fail(ErrorKind::BadArgument, "negative scenario count");
  const auto loads = gc.load_buses();
  const std::set<int> load_set(loads.begin(), loads.end());
  std::vector<int> varying = spec.varying_buses;
  std::sort(varying.begin(), varying.end());
  for (int b : varying)
    if (!load_set.count(b)) fail(ErrorKind::NotALoadBus, "varying bus " + std::to_string(b));

  std::vector<std::map<int, double>> out;
  if (spec.count == 0) return out;
  SobolGenerator gen(static_cast<int>(varying.size()), spec.skip);
  const auto points = gen.block(static_cast<std::size_t>(spec.count));
  out.reserve(spec.count);
  for (const auto& u : points) {
    std::map<int, double> mult;
    for (int b : loads) mult[b] = 1.0;
    for (std::size_t d = 0; d < varying.size(); ++d) mult[varying[d]] = spec.lo + u[d] * (spec.hi - spec.lo);
    out.push_back(std::move(mult));
  }
  return out;
}

struct SensitivityReport {
  std::vector<int> load_buses;                  // row labels
  std::vector<int> gen_buses;                   // column labels, generator order
  std::vector<std::pair<int, int>> branch_ends; // column labels, branch order
  Eigen::MatrixXd corr_gen;                     // load x generator Pearson correlation
  Eigen::MatrixXd corr_flow;                    // load x branch (from-end P)
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> degenerate_gen, degenerate_flow;
  int sample_count = 0;
};

namespace detail {

// Pearson correlation of two columns; zero-variance columns are reported as
// 0 with the degenerate flag set.
inline std::pair<double, bool> pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double n = static_cast<double>(a.size());
  const double ma = a.mean(), mb = b.mean();
  const Eigen::VectorXd da = a.array() - ma, db = b.array() - mb;
  const double va = da.squaredNorm(), vb = db.squaredNorm();
  if (va <= 1e-18 * n || vb <= 1e-18 * n) return {0.0, true};
  double c = da.dot(db) / std::sqrt(va * vb);
  return {std::clamp(c, -1.0, 1.0), false};
}

}  // namespace detail

// Correlates scaled load values against generator outputs and from-end line
// flows across a sample of operating points.
inline SensitivityReport compute_sensitivity(const std::vector<OperatingPoint>& ops) {
  if (ops.size() < 3) fail(ErrorKind::TooFewSamples, "sensitivity needs at least 3 operating points");
  const GridCase& gc = ops.front().scaled_case;
  SensitivityReport rep;
  rep.sample_count = static_cast<int>(ops.size());
  // nominal load buses come from any scaled case: scaling cannot zero a load
  rep.load_buses = gc.load_buses();
  for (const auto& g : gc.generators) rep.gen_buses.push_back(g.bus);
  for (const auto& br : gc.branches) rep.branch_ends.emplace_back(br.from_bus, br.to_bus);

  const int nl = static_cast<int>(rep.load_buses.size());
  const int ng = static_cast<int>(rep.gen_buses.size());
  const int nb = static_cast<int>(rep.branch_ends.size());
  const int ns = rep.sample_count;

  Eigen::MatrixXd loads(ns, nl), gens(ns, ng), flows(ns, nb);
  for (int s = 0; s < ns; ++s) {
    const auto& op = ops[s];
    for (int l = 0; l < nl; ++l) loads(s, l) = op.scaled_case.bus(rep.load_buses[l]).p_load;
    for (int g = 0; g < ng; ++g) gens(s, g) = op.solution.gen_p[g];
    for (int b = 0; b < nb; ++b) flows(s, b) = op.solution.flow_p_from[b];
  }

  rep.corr_gen.resize(nl, ng);
  rep.degenerate_gen.resize(nl, ng);
  for (int l = 0; l < nl; ++l)
    for (int g = 0; g < ng; ++g) {
      auto [c, d] = detail::pearson(loads.col(l), gens.col(g));
      rep.corr_gen(l, g) = c;
      rep.degenerate_gen(l, g) = d;
    }
  rep.corr_flow.resize(nl, nb);
  rep.degenerate_flow.resize(nl, nb);
  for (int l = 0; l < nl; ++l)
    for (int b = 0; b < nb; ++b) {
      auto [c, d] = detail::pearson(loads.col(l), flows.col(b));
      rep.corr_flow(l, b) = c;
      rep.degenerate_flow(l, b) = d;
    }
  return rep;
}

struct FaaSelection {
  std::vector<int> buses;  // sorted
  bool empty_warning = false;
};

// Union of the loads that move the fault-area generators and the loads that
// move the fault-area line flows, at the given |correlation| cutoff.
inline FaaSelection select_faa_loads(const SensitivityReport& report, double threshold,
                                     const std::vector<int>& faa_machine_cols,
                                     const std::vector<int>& faa_branch_cols) {
  std::set<int> chosen;
  for (std::size_t l = 0; l < report.load_buses.size(); ++l) {
    double best_gen = 0, best_flow = 0;
    for (int g : faa_machine_cols) best_gen = std::max(best_gen, std::abs(report.corr_gen(l, g)));
    for (int b : faa_branch_cols) best_flow = std::max(best_flow, std::abs(report.corr_flow(l, b)));
    if (best_gen >= threshold || best_flow >= threshold) chosen.insert(report.load_buses[l]);
  }
  FaaSelection sel;
  sel.buses.assign(chosen.begin(), chosen.end());
  sel.empty_warning = sel.buses.empty();
  return sel;
}

// Fault-area column sets for a contingency: machines and intra-area branches
// of the area containing the fault bus.
struct FaaArea {
  int area = 0;
  std::vector<int> machine_cols;  // generator indices
  std::vector<int> branch_cols;   // branch indices
  std::vector<int> machine_buses;
};

inline FaaArea faa_area_for(const GridCase& gc, int fault_bus) {
  FaaArea out;
  auto it = gc.area_of_bus.find(fault_bus);
  if (it == gc.area_of_bus.end()) fail(ErrorKind::UnknownBus, "no area for bus " + std::to_string(fault_bus));
  out.area = it->second;
  for (std::size_t g = 0; g < gc.generators.size(); ++g)
    if (gc.area_of_bus.at(gc.generators[g].bus) == out.area) {
      out.machine_cols.push_back(static_cast<int>(g));
      out.machine_buses.push_back(gc.generators[g].bus);
    }
  for (std::size_t b = 0; b < gc.branches.size(); ++b) {
    const auto& br = gc.branches[b];
    if (gc.area_of_bus.at(br.from_bus) == out.area && gc.area_of_bus.at(br.to_bus) == out.area)
      out.branch_cols.push_back(static_cast<int>(b));
  }
  return out;
}

}  // namespace tsa
