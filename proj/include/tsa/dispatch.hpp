#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tsa/powerflow.hpp"

namespace tsa {

struct DispatchResult {
  std::vector<double> p_set;  // MW per generator
  double lambda = 0;          // $/MWh system incremental cost
  double total_cost = 0;      // $/h
};

// Equal-incremental-cost dispatch of quadratic costs with limit clamping,
// solved by bisection on lambda. Units with cost_a = 0 are filled in merit
// order at the marginal price.
inline DispatchResult economic_dispatch(const GridCase& gc, double demand_mw) {
  const int ng = static_cast<int>(gc.generators.size());
  if (ng == 0) fail(ErrorKind::InfeasibleDemand, "case has no generators");
  double sum_min = 0, sum_max = 0;
  for (const auto& g : gc.generators) {
    sum_min += g.p_min;
    sum_max += g.p_max;
  }
  if (demand_mw < sum_min - 1e-9 || demand_mw > sum_max + 1e-9)
    fail(ErrorKind::InfeasibleDemand, "demand " + fmt_double(demand_mw) + " MW outside [" +
                                          fmt_double(sum_min) + ", " + fmt_double(sum_max) + "]");

  auto output_at = [&](const GeneratorRecord& g, double lambda) {
    double p;
    if (g.cost_a > 0) {
      p = (lambda - g.cost_b) / (2.0 * g.cost_a);
    } else {
      p = lambda > g.cost_b ? g.p_max : g.p_min;  // flat marginal cost
    }
    return std::min(std::max(p, g.p_min), g.p_max);
  };
  auto total_at = [&](double lambda) {
    double s = 0;
    for (const auto& g : gc.generators) s += output_at(g, lambda);
    return s;
  };

  double lo = gc.generators[0].cost_b, hi = gc.generators[0].cost_b;
  for (const auto& g : gc.generators) {
    lo = std::min(lo, std::min(g.cost_b, 2 * g.cost_a * g.p_min + g.cost_b));
    hi = std::max(hi, std::max(g.cost_b, 2 * g.cost_a * g.p_max + g.cost_b));
  }
  lo -= 1.0;
  hi += 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * (1.0 + std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (total_at(mid) < demand_mw ? lo : hi) = mid;
  }
  const double lambda = 0.5 * (lo + hi);

  DispatchResult res;
  res.lambda = lambda;
  res.p_set.resize(ng);
  double assigned = 0;
  std::vector<int> marginal_flat;
  for (int g = 0; g < ng; ++g) {
    const auto& gen = gc.generators[g];
    if (gen.cost_a == 0 && std::abs(gen.cost_b - lambda) <= 1e-7 * (1.0 + std::abs(lambda))) {
      res.p_set[g] = gen.p_min;  // marginal flat units fill the residual below
      marginal_flat.push_back(g);
    } else {
      res.p_set[g] = output_at(gen, lambda);
    }
    assigned += res.p_set[g];
  }
  double residual = demand_mw - assigned;
  for (int g : marginal_flat) {
    if (residual <= 0) break;
    const double room = gc.generators[g].p_max - gc.generators[g].p_min;
    const double add = std::min(residual, room);
    res.p_set[g] += add;
    residual -= add;
  }
  // rounding slack from the bisection lands on interior units only, so
  // clamped units stay exactly at their bounds
  if (std::abs(residual) > 0) {
    for (int g = 0; g < ng && std::abs(residual) > 1e-12; ++g) {
      const auto& gen = gc.generators[g];
      if (res.p_set[g] < gen.p_min + 1e-6 || res.p_set[g] > gen.p_max - 1e-6) continue;
      const double adj = std::min(std::max(res.p_set[g] + residual, gen.p_min + 1e-6), gen.p_max - 1e-6);
      residual -= adj - res.p_set[g];
      res.p_set[g] = adj;
    }
  }

  res.total_cost = 0;
  for (int g = 0; g < ng; ++g) {
    const auto& gen = gc.generators[g];
    res.total_cost += gen.cost_a * res.p_set[g] * res.p_set[g] + gen.cost_b * res.p_set[g] + gen.cost_c;
  }
  return res;
}

enum class ScenarioStatus { Ok, DispatchInfeasible, PowerFlowDiverged, SlackLimit };

inline const char* to_string(ScenarioStatus s) {
  switch (s) {
    case ScenarioStatus::Ok: return "ok";
    case ScenarioStatus::DispatchInfeasible: return "dispatch_infeasible";
    case ScenarioStatus::PowerFlowDiverged: return "powerflow_diverged";
    case ScenarioStatus::SlackLimit: return "slack_limit";
  }
  return "?";
}

struct OperatingPoint {
  GridCase scaled_case;
  DispatchResult dispatch;
  PowerFlowSolution solution;
  long long scenario_id = -1;
  std::map<int, double> load_scale;
};

// A scenario either yields a converged operating point or a tagged failure;
// nothing is dropped silently.
struct ScenarioOutcome {
  ScenarioStatus status = ScenarioStatus::Ok;
  std::optional<OperatingPoint> op;
  std::string note;
  bool ok() const { return status == ScenarioStatus::Ok; }
};

// Dispatch/power-flow fixed point: dispatch for demand plus the current loss
// estimate, solve the AC power flow, refresh the estimate, and stop once the
// slack deviates from its dispatched value by less than half a megawatt.
inline ScenarioOutcome solve_operating_point(const GridCase& base_case, const std::map<int, double>& load_scale,
                                             long long scenario_id = -1, double pf_tolerance = 1e-8,
                                             int pf_max_iter = 20, double slack_tol_mw = 0.5, int max_rounds = 5) {
  ScenarioOutcome out;
  GridCase scaled;
  try {
    scaled = scale_loads(base_case, load_scale);
  } catch (const Error& e) {
    out.status = ScenarioStatus::DispatchInfeasible;
    out.note = e.what();
    return out;
  }

  const double total_load = scaled.total_p_load();
  int slack_gen = -1;
  {
    const int slack_bus_id = scaled.buses[scaled.slack_bus_index()].id;
    const auto gens = scaled.generators_at(slack_bus_id);
    slack_gen = gens.empty() ? -1 : gens.front();
  }

  double loss_est = 0;
  DispatchResult disp;
  PowerFlowSolution sol;
  for (int round = 0; round < max_rounds; ++round) {
    try {
      disp = economic_dispatch(scaled, total_load + loss_est);
    } catch (const Error& e) {
      out.status = ScenarioStatus::DispatchInfeasible;
      out.note = e.what();
      return out;
    }
    try {
      sol = solve_power_flow(scaled, disp.p_set, pf_tolerance, pf_max_iter);
    } catch (const Error& e) {
      out.status = ScenarioStatus::PowerFlowDiverged;
      out.note = e.what();
      return out;
    }
    if (!sol.converged) {
      out.status = ScenarioStatus::PowerFlowDiverged;
      out.note = "mismatch " + fmt_double(sol.max_mismatch) + " pu after " + std::to_string(sol.iterations) +
                 " iterations";
      return out;
    }
    const double slack_dev = slack_gen >= 0 ? std::abs(sol.gen_p[slack_gen] - disp.p_set[slack_gen]) : 0.0;
    loss_est = sol.losses_p;
    if (slack_dev < slack_tol_mw) break;
  }

  if (slack_gen >= 0) {
    const auto& g = scaled.generators[slack_gen];
    if (sol.gen_p[slack_gen] < g.p_min - 1e-6 || sol.gen_p[slack_gen] > g.p_max + 1e-6) {
      out.status = ScenarioStatus::SlackLimit;
      out.note = "slack output " + fmt_double(sol.gen_p[slack_gen]) + " MW outside [" + fmt_double(g.p_min) +
                 ", " + fmt_double(g.p_max) + "]";
      return out;
    }
  }

  out.op = OperatingPoint{std::move(scaled), std::move(disp), std::move(sol), scenario_id, load_scale};
  return out;
}

}  // namespace tsa
