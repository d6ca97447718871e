#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <vector>

#include "tsa/dispatch.hpp"

namespace tsa {

inline constexpr double kOmegaSync = 2.0 * std::numbers::pi * 60.0;  // rad/s
inline constexpr double kDefaultInstabilityThresholdDeg = 180.0;

// Schur complement of the eliminated block: keeps the listed node indices and
// folds the rest into equivalent couplings.
inline Eigen::MatrixXcd kron_reduce(const Eigen::MatrixXcd& y_full, const std::vector<int>& keep) {
  const int n = static_cast<int>(y_full.rows());
  std::vector<char> kept(n, 0);
  for (int k : keep) {
    if (k < 0 || k >= n) fail(ErrorKind::BadArgument, "keep index " + std::to_string(k) + " out of range");
    kept[k] = 1;
  }
  std::vector<int> elim;
  for (int i = 0; i < n; ++i)
    if (!kept[i]) elim.push_back(i);
  if (elim.empty()) {
    Eigen::MatrixXcd out(keep.size(), keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i)
      for (std::size_t j = 0; j < keep.size(); ++j) out(i, j) = y_full(keep[i], keep[j]);
    return out;
  }

  const int nk = static_cast<int>(keep.size());
  const int ne = static_cast<int>(elim.size());
  Eigen::MatrixXcd ykk(nk, nk), yke(nk, ne), yek(ne, nk), yee(ne, ne);
  for (int i = 0; i < nk; ++i)
    for (int j = 0; j < nk; ++j) ykk(i, j) = y_full(keep[i], keep[j]);
  for (int i = 0; i < nk; ++i)
    for (int j = 0; j < ne; ++j) yke(i, j) = y_full(keep[i], elim[j]);
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < nk; ++j) yek(i, j) = y_full(elim[i], keep[j]);
  for (int i = 0; i < ne; ++i)
    for (int j = 0; j < ne; ++j) yee(i, j) = y_full(elim[i], elim[j]);

  Eigen::FullPivLU<Eigen::MatrixXcd> lu(yee);
  if (!lu.isInvertible()) fail(ErrorKind::SingularBlock, "eliminated block of order " + std::to_string(ne));
  return ykk - yke * lu.solve(yek);
}

inline Eigen::MatrixXcd kron_reduce(const AdmittanceMatrix& y_full, const std::vector<int>& keep) {
  return kron_reduce(Eigen::MatrixXcd(y_full.entries), keep);
}

// Classical machine model: constant EMF behind transient reactance, loads as
// constant admittances, network reduced to the machine internal nodes for
// each of the three phases (pre-fault, fault-on, post-clearing).
struct DynamicModel {
  std::vector<double> e_mag;      // pu internal EMF
  std::vector<double> delta0;     // rad
  std::vector<double> p_mech;     // pu
  std::vector<double> inertia_m;  // 2H / omega_sync
  std::vector<double> inertia_h;  // s
  std::vector<double> damping_d;  // pu torque / pu speed deviation
  std::vector<int> machine_bus;   // terminal bus id per machine
  Eigen::MatrixXcd y_pre, y_fault, y_post;

  int machine_count() const { return static_cast<int>(e_mag.size()); }

  // electrical power at each internal node for rotor angles delta
  Eigen::VectorXd electrical_power(const Eigen::MatrixXcd& y, const Eigen::VectorXd& delta) const {
    const int m = machine_count();
    Eigen::VectorXcd e(m);
    for (int i = 0; i < m; ++i) e[i] = std::polar(e_mag[i], delta[i]);
    const Eigen::VectorXcd current = y * e;
    Eigen::VectorXd p(m);
    for (int i = 0; i < m; ++i) p[i] = (e[i] * std::conj(current[i])).real();
    return p;
  }
};

struct ContingencySpec {
  int branch_index = -1;  // canonical index of the faulted line
  int fault_bus = 0;      // endpoint where the three-phase fault is applied
  double t_fault = 1.0;   // s
  double t_clear = 1.25;  // s
  std::vector<int> faa_load_buses;  // bus ids whose loads vary in the auxiliary set
  std::vector<int> faa_machines;    // machine indices labelled by the auxiliary rule
};

// Builds a contingency for a branch given by canonical index; the fault
// defaults to the lower-numbered endpoint.
inline ContingencySpec make_contingency_for_branch(const GridCase& gc, int branch_index,
                                                   std::optional<int> fault_bus = std::nullopt,
                                                   double t_fault = 1.0, double t_clear = 1.25) {
  if (branch_index < 0 || branch_index >= static_cast<int>(gc.branches.size()))
    fail(ErrorKind::BadArgument, "branch index " + std::to_string(branch_index) + " out of range");
  ContingencySpec spec;
  spec.branch_index = branch_index;
  const auto& br = gc.branches[branch_index];
  spec.fault_bus = fault_bus.value_or(std::min(br.from_bus, br.to_bus));
  if (spec.fault_bus != br.from_bus && spec.fault_bus != br.to_bus)
    fail(ErrorKind::BadArgument, "fault bus " + std::to_string(spec.fault_bus) + " is not an endpoint of line " +
                                     std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus));
  if (!(t_clear > t_fault)) fail(ErrorKind::BadArgument, "t_clear must exceed t_fault");
  spec.t_fault = t_fault;
  spec.t_clear = t_clear;
  return spec;
}

// Resolves "line a-b" against the case (unique match required).
inline ContingencySpec make_contingency(const GridCase& gc, int bus_a, int bus_b,
                                        std::optional<int> fault_bus = std::nullopt, double t_fault = 1.0,
                                        double t_clear = 1.25) {
  return make_contingency_for_branch(gc, gc.find_branch(bus_a, bus_b), fault_bus, t_fault, t_clear);
}

namespace detail {

// network matrix with loads folded in as constant shunt admittances at the
// solved pre-fault voltages
inline Eigen::MatrixXcd network_with_loads(const GridCase& gc, const PowerFlowSolution& sol,
                                           std::optional<int> exclude) {
  Eigen::MatrixXcd y = Eigen::MatrixXcd(build_admittance(gc, exclude).entries);
  const int n = static_cast<int>(gc.buses.size());
  for (int i = 0; i < n; ++i) {
    const auto& b = gc.buses[i];
    if (b.p_load == 0.0 && b.q_load == 0.0) continue;
    const double v2 = sol.v_mag[i] * sol.v_mag[i];
    y(i, i) += Complex(b.p_load, -b.q_load) / gc.mva_base / v2;
  }
  return y;
}

inline Eigen::MatrixXcd augment_with_machines(const GridCase& gc, const Eigen::MatrixXcd& y_net) {
  const int n = static_cast<int>(y_net.rows());
  const int m = static_cast<int>(gc.generators.size());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n + m, n + m);
  y.topLeftCorner(n, n) = y_net;
  for (int g = 0; g < m; ++g) {
    const int b = gc.bus_index(gc.generators[g].bus);
    const Complex ym = 1.0 / Complex(0.0, gc.generators[g].xd_prime);
    y(b, b) += ym;
    y(n + g, n + g) += ym;
    y(b, n + g) -= ym;
    y(n + g, b) -= ym;
  }
  return y;
}

inline Eigen::MatrixXcd drop_node(const Eigen::MatrixXcd& y, int node) {
  const int n = static_cast<int>(y.rows());
  Eigen::MatrixXcd out(n - 1, n - 1);
  for (int i = 0, ii = 0; i < n; ++i) {
    if (i == node) continue;
    for (int j = 0, jj = 0; j < n; ++j) {
      if (j == node) continue;
      out(ii, jj) = y(i, j);
      ++jj;
    }
    ++ii;
  }
  return out;
}

}  // namespace detail

// Builds the reduced three-phase model from a converged operating point.
// Initialization is E' = V + j xd' I from the terminal conditions, and the
// mechanical power is pinned to the pre-fault electrical power so the model
// starts at an exact equilibrium.
inline DynamicModel init_dynamics(const OperatingPoint& op, const ContingencySpec& contingency) {
  const GridCase& gc = op.scaled_case;
  const PowerFlowSolution& sol = op.solution;
  if (!sol.converged) fail(ErrorKind::NonConvergence, "operating point power flow did not converge");

  const int n = static_cast<int>(gc.buses.size());
  const int m = static_cast<int>(gc.generators.size());

  DynamicModel model;
  model.e_mag.resize(m);
  model.delta0.resize(m);
  model.inertia_m.resize(m);
  model.inertia_h.resize(m);
  model.damping_d.resize(m);
  model.machine_bus.resize(m);
  for (int g = 0; g < m; ++g) {
    const auto& gen = gc.generators[g];
    const int b = gc.bus_index(gen.bus);
    const Complex v = std::polar(sol.v_mag[b], sol.v_ang[b]);
    const Complex s = Complex(sol.gen_p[g], sol.gen_q[g]) / gc.mva_base;
    const Complex i = std::conj(s / v);
    const Complex e = v + Complex(0.0, gen.xd_prime) * i;
    model.e_mag[g] = std::abs(e);
    model.delta0[g] = std::arg(e);
    model.inertia_h[g] = gen.inertia_h;
    model.inertia_m[g] = 2.0 * gen.inertia_h / kOmegaSync;
    model.damping_d[g] = gen.damping_d;
    model.machine_bus[g] = gen.bus;
  }

  std::vector<int> machine_nodes(m);
  for (int g = 0; g < m; ++g) machine_nodes[g] = n + g;

  const Eigen::MatrixXcd y_net = detail::network_with_loads(gc, sol, std::nullopt);
  model.y_pre = kron_reduce(detail::augment_with_machines(gc, y_net), machine_nodes);

  // bolted fault: the faulted node is held at zero volts, i.e. removed
  const int fault_node = gc.bus_index(contingency.fault_bus);
  {
    Eigen::MatrixXcd y_f = detail::drop_node(detail::augment_with_machines(gc, y_net), fault_node);
    std::vector<int> keep(m);
    for (int g = 0; g < m; ++g) keep[g] = n + g - 1;  // machine nodes shift down by one
    model.y_fault = kron_reduce(y_f, keep);
  }

  const Eigen::MatrixXcd y_net_post = detail::network_with_loads(gc, sol, contingency.branch_index);
  model.y_post = kron_reduce(detail::augment_with_machines(gc, y_net_post), machine_nodes);

  Eigen::VectorXd d0 = Eigen::Map<const Eigen::VectorXd>(model.delta0.data(), m);
  const Eigen::VectorXd pe0 = model.electrical_power(model.y_pre, d0);
  model.p_mech.assign(pe0.data(), pe0.data() + m);
  return model;
}

enum class StabilityLabel { Stable, Unstable };

inline const char* to_string(StabilityLabel l) { return l == StabilityLabel::Stable ? "stable" : "unstable"; }

struct SimulationResult {
  std::vector<double> t;             // s
  Eigen::MatrixXd delta;             // rad, steps x machines
  Eigen::MatrixXd omega_dev;         // pu speed deviation, steps x machines
  StabilityLabel label = StabilityLabel::Stable;
  double max_coi_dev_deg = 0;        // over the labelling subset
  std::optional<double> first_violation_t;
  std::string diagnostic;            // non-empty if the state blew up
};

struct LabelOutcome {
  StabilityLabel label;
  double max_coi_dev_deg;
  std::optional<double> first_violation_t;
};

// Center-of-inertia labelling: unstable iff any machine of the subset
// deviates from the inertia-weighted mean angle (over ALL machines) by at
// least the threshold at any step. The boundary case counts as unstable.
inline LabelOutcome label_stability(const Eigen::MatrixXd& delta, const std::vector<double>& inertia_h,
                                    const std::vector<int>& machine_subset, const std::vector<double>& t,
                                    double threshold_deg = kDefaultInstabilityThresholdDeg) {
  if (machine_subset.empty()) fail(ErrorKind::EmptySubset, "labelling needs at least one machine");
  const int steps = static_cast<int>(delta.rows());
  const int m = static_cast<int>(delta.cols());
  double h_total = 0;
  for (double h : inertia_h) h_total += h;
  const double threshold_rad = threshold_deg * std::numbers::pi / 180.0;

  LabelOutcome out{StabilityLabel::Stable, 0.0, std::nullopt};
  for (int k = 0; k < steps; ++k) {
    double coi = 0;
    for (int i = 0; i < m; ++i) coi += inertia_h[i] * delta(k, i);
    coi /= h_total;
    for (int i : machine_subset) {
      const double dev = std::abs(delta(k, i) - coi);
      out.max_coi_dev_deg = std::max(out.max_coi_dev_deg, dev * 180.0 / std::numbers::pi);
      if (dev >= threshold_rad && !out.first_violation_t) {
        out.label = StabilityLabel::Unstable;
        out.first_violation_t = t[k];
      }
    }
  }
  return out;
}

// Fixed-step RK4 on the swing equations with phase switching exactly at the
// fault and clearing instants (both snapped to grid points). A state blow-up
// is reported as unstable with a diagnostic rather than an exception.
inline SimulationResult simulate_contingency(const DynamicModel& model, const ContingencySpec& contingency,
                                             double t_end = 5.0, double dt = 0.005,
                                             const std::vector<int>& label_subset = {},
                                             double threshold_deg = kDefaultInstabilityThresholdDeg) {
  const int m = model.machine_count();
  if (m == 0) fail(ErrorKind::BadArgument, "model has no machines");
  if (!(dt > 0) || !(t_end > 0)) fail(ErrorKind::BadArgument, "t_end and dt must be positive");

  const long long n_steps = static_cast<long long>(std::llround(t_end / dt));
  const long long k_fault = static_cast<long long>(std::llround(contingency.t_fault / dt));
  const long long k_clear = static_cast<long long>(std::llround(contingency.t_clear / dt));

  SimulationResult res;
  res.t.resize(n_steps + 1);
  res.delta.resize(n_steps + 1, m);
  res.omega_dev.resize(n_steps + 1, m);

  Eigen::VectorXd delta = Eigen::Map<const Eigen::VectorXd>(model.delta0.data(), m);
  Eigen::VectorXd omega = Eigen::VectorXd::Zero(m);
  res.t[0] = 0;
  res.delta.row(0) = delta.transpose();
  res.omega_dev.row(0) = omega.transpose();

  const Eigen::VectorXd pm = Eigen::Map<const Eigen::VectorXd>(model.p_mech.data(), m);
  Eigen::VectorXd inv_2h(m), damp(m);
  for (int i = 0; i < m; ++i) {
    inv_2h[i] = 1.0 / (2.0 * model.inertia_h[i]);
    damp[i] = model.damping_d[i];
  }

  auto deriv = [&](const Eigen::MatrixXcd& y, const Eigen::VectorXd& d, const Eigen::VectorXd& w,
                   Eigen::VectorXd& dd, Eigen::VectorXd& dw) {
    const Eigen::VectorXd pe = model.electrical_power(y, d);
    dd = kOmegaSync * w;
    dw = (pm - pe - damp.cwiseProduct(w)).cwiseProduct(inv_2h);
  };

  Eigen::VectorXd k1d(m), k1w(m), k2d(m), k2w(m), k3d(m), k3w(m), k4d(m), k4w(m);
  long long truncated_at = -1;
  for (long long k = 0; k < n_steps; ++k) {
    const Eigen::MatrixXcd& y = (k < k_fault) ? model.y_pre : (k < k_clear ? model.y_fault : model.y_post);
    deriv(y, delta, omega, k1d, k1w);
    deriv(y, delta + 0.5 * dt * k1d, omega + 0.5 * dt * k1w, k2d, k2w);
    deriv(y, delta + 0.5 * dt * k2d, omega + 0.5 * dt * k2w, k3d, k3w);
    deriv(y, delta + dt * k3d, omega + dt * k3w, k4d, k4w);
    delta += dt / 6.0 * (k1d + 2 * k2d + 2 * k3d + k4d);
    omega += dt / 6.0 * (k1w + 2 * k2w + 2 * k3w + k4w);
    if (!delta.allFinite() || !omega.allFinite()) {
      truncated_at = k;
      break;
    }
    res.t[k + 1] = (k + 1) * dt;
    res.delta.row(k + 1) = delta.transpose();
    res.omega_dev.row(k + 1) = omega.transpose();
  }

  if (truncated_at >= 0) {
    res.t.resize(truncated_at + 1);
    res.delta.conservativeResize(truncated_at + 1, m);
    res.omega_dev.conservativeResize(truncated_at + 1, m);
    res.diagnostic = "state non-finite at t=" + fmt_double((truncated_at + 1) * dt);
  }

  std::vector<int> subset = label_subset;
  if (subset.empty()) {
    subset.resize(m);
    for (int i = 0; i < m; ++i) subset[i] = i;
  }
  const LabelOutcome lo = label_stability(res.delta, model.inertia_h, subset, res.t, threshold_deg);
  res.label = lo.label;
  res.max_coi_dev_deg = lo.max_coi_dev_deg;
  res.first_violation_t = lo.first_violation_t;
  if (truncated_at >= 0) {
    res.label = StabilityLabel::Unstable;
    if (!res.first_violation_t) res.first_violation_t = (truncated_at + 1) * dt;
  }
  return res;
}

}  // namespace tsa
