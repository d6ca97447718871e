#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "tsa/grid.hpp"

namespace tsa {

struct PowerFlowSolution {
  Eigen::VectorXd v_mag;  // pu, bus order
  Eigen::VectorXd v_ang;  // rad
  std::vector<double> gen_p;  // MW per generator
  std::vector<double> gen_q;  // MVAr per generator
  std::vector<double> flow_p_from, flow_q_from, flow_p_to, flow_q_to;  // MW / MVAr per branch
  double losses_p = 0;  // MW
  int iterations = 0;
  bool converged = false;
  double max_mismatch = 0;  // pu, at exit
};

struct BranchFlow {
  double p_from, q_from, p_to, q_to;  // MW / MVAr
};

// Pi-model flows at both ends of one branch, from a bus voltage profile.
inline BranchFlow branch_flow(const GridCase& gc, const Eigen::VectorXd& v_mag, const Eigen::VectorXd& v_ang,
                              int branch_index) {
  const BranchRecord& br = gc.branches.at(branch_index);
  BranchFlow out{0, 0, 0, 0};
  if (!br.in_service) return out;
  const int f = gc.bus_index(br.from_bus);
  const int t = gc.bus_index(br.to_bus);
  const Complex vf = std::polar(v_mag[f], v_ang[f]);
  const Complex vt = std::polar(v_mag[t], v_ang[t]);
  const Complex y = 1.0 / Complex(br.r, br.x);
  const Complex ysh(0.0, br.b_total / 2.0);
  const double tau = br.tap;
  const Complex i_f = (y + ysh) / (tau * tau) * vf - y / tau * vt;
  const Complex i_t = -y / tau * vf + (y + ysh) * vt;
  const Complex sf = vf * std::conj(i_f) * gc.mva_base;
  const Complex st = vt * std::conj(i_t) * gc.mva_base;
  return {sf.real(), sf.imag(), st.real(), st.imag()};
}

namespace detail {

inline Eigen::VectorXcd bus_injections(const AdmittanceMatrix& Y, const Eigen::VectorXcd& V) {
  return V.array() * (Y.entries * V).conjugate().array();
}

}  // namespace detail

// Full Newton-Raphson in polar coordinates with PV->PQ switching on reactive
// limit violation. Dispatch fixes every generator's active output; the slack
// generator absorbs losses. Throws only on structural problems (singular
// Jacobian); plain failure to converge is reported through the flags.
inline PowerFlowSolution solve_power_flow(const GridCase& gc, const std::vector<double>& dispatch_mw,
                                          double tolerance = 1e-8, int max_iter = 20,
                                          const std::optional<std::pair<Eigen::VectorXd, Eigen::VectorXd>>& warm_start =
                                              std::nullopt) {
  const int n = static_cast<int>(gc.buses.size());
  const int ng = static_cast<int>(gc.generators.size());
  if (static_cast<int>(dispatch_mw.size()) != ng)
    fail(ErrorKind::DimensionMismatch, "dispatch vector has " + std::to_string(dispatch_mw.size()) +
                                           " entries for " + std::to_string(ng) + " generators");

  const AdmittanceMatrix Y = build_admittance(gc);
  const int slack = gc.slack_bus_index();

  // scheduled injections, pu
  Eigen::VectorXd p_sched = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd q_sched = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd q_min_bus = Eigen::VectorXd::Zero(n), q_max_bus = Eigen::VectorXd::Zero(n);
  std::vector<char> has_gen(n, 0);
  for (int g = 0; g < ng; ++g) {
    const int b = gc.bus_index(gc.generators[g].bus);
    p_sched[b] += dispatch_mw[g] / gc.mva_base;
    q_min_bus[b] += gc.generators[g].q_min / gc.mva_base;
    q_max_bus[b] += gc.generators[g].q_max / gc.mva_base;
    has_gen[b] = 1;
  }
  for (int i = 0; i < n; ++i) {
    p_sched[i] -= gc.buses[i].p_load / gc.mva_base;
    q_sched[i] -= gc.buses[i].q_load / gc.mva_base;
  }

  enum class Mode { Slack, Pv, Pq, PqAtQmax, PqAtQmin };
  std::vector<Mode> mode(n);
  for (int i = 0; i < n; ++i) {
    switch (gc.buses[i].kind) {
      case BusKind::Slack: mode[i] = Mode::Slack; break;
      case BusKind::Pv: mode[i] = Mode::Pv; break;
      case BusKind::Pq: mode[i] = Mode::Pq; break;
    }
  }

  Eigen::VectorXd vm = Eigen::VectorXd::Ones(n);
  Eigen::VectorXd va = Eigen::VectorXd::Zero(n);
  if (warm_start) {
    vm = warm_start->first;
    va = warm_start->second;
  }
  for (int i = 0; i < n; ++i)
    if (mode[i] == Mode::Slack || mode[i] == Mode::Pv) vm[i] = gc.buses[i].v_setpoint;

  PowerFlowSolution sol;
  sol.iterations = 0;
  sol.converged = false;

  auto effective_q_sched = [&](int i) {
    if (mode[i] == Mode::PqAtQmax) return q_sched[i] + q_max_bus[i];
    if (mode[i] == Mode::PqAtQmin) return q_sched[i] + q_min_bus[i];
    return q_sched[i];  // natural PQ: no generator reactive support
  };

  Eigen::VectorXcd V(n);
  auto rebuild_V = [&] {
    for (int i = 0; i < n; ++i) V[i] = std::polar(vm[i], va[i]);
  };

  // Reactive limit scan. Checking from a far-from-solved state would pin
  // buses at limits they do not actually hit, so the scan only runs once the
  // mismatch is already small; each bus gets a bounded number of mode flips
  // to rule out limit-cycling.
  std::vector<int> flips(n, 0);
  auto scan_q_limits = [&](const Eigen::VectorXcd& S) {
    bool switched = false;
    for (int i = 0; i < n; ++i) {
      if (!has_gen[i] || i == slack || gc.buses[i].kind != BusKind::Pv || flips[i] >= 4) continue;
      const double q_gen_needed = S[i].imag() - q_sched[i];
      if (mode[i] == Mode::Pv) {
        if (q_gen_needed > q_max_bus[i] + 1e-9) {
          mode[i] = Mode::PqAtQmax;
          switched = true;
          ++flips[i];
        } else if (q_gen_needed < q_min_bus[i] - 1e-9) {
          mode[i] = Mode::PqAtQmin;
          switched = true;
          ++flips[i];
        }
      } else if (mode[i] == Mode::PqAtQmax && vm[i] > gc.buses[i].v_setpoint + 1e-9) {
        mode[i] = Mode::Pv;
        vm[i] = gc.buses[i].v_setpoint;
        switched = true;
        ++flips[i];
      } else if (mode[i] == Mode::PqAtQmin && vm[i] < gc.buses[i].v_setpoint - 1e-9) {
        mode[i] = Mode::Pv;
        vm[i] = gc.buses[i].v_setpoint;
        switched = true;
        ++flips[i];
      }
    }
    return switched;
  };
  constexpr double kQScanGate = 1e-3;  // pu mismatch below which limits are trusted

  double last_worst = std::numeric_limits<double>::infinity();
  for (int iter = 0; iter <= max_iter; ++iter) {
    rebuild_V();
    Eigen::VectorXcd S2 = detail::bus_injections(Y, V);

    if (last_worst < kQScanGate && scan_q_limits(S2)) {
      rebuild_V();
      S2 = detail::bus_injections(Y, V);
      last_worst = std::numeric_limits<double>::infinity();  // sets changed; do not converge this pass
    }

    std::vector<int> ang_idx, mag_idx;  // unknown sets
    for (int i = 0; i < n; ++i) {
      if (mode[i] == Mode::Slack) continue;
      ang_idx.push_back(i);
      if (mode[i] != Mode::Pv) mag_idx.push_back(i);
    }
    const int na = static_cast<int>(ang_idx.size());
    const int nm = static_cast<int>(mag_idx.size());

    Eigen::VectorXd mism(na + nm);
    for (int k = 0; k < na; ++k) mism[k] = p_sched[ang_idx[k]] - S2[ang_idx[k]].real();
    for (int k = 0; k < nm; ++k) mism[na + k] = effective_q_sched(mag_idx[k]) - S2[mag_idx[k]].imag();

    const double worst = mism.size() ? mism.cwiseAbs().maxCoeff() : 0.0;
    sol.max_mismatch = worst;
    if (worst < tolerance) {
      // converged with the current mode set; accept only if no PV bus wants
      // to leave its limits
      if (!scan_q_limits(S2)) {
        sol.converged = true;
        break;
      }
      last_worst = std::numeric_limits<double>::infinity();
      continue;
    }
    last_worst = worst;
    if (iter == max_iter) break;

    // polar Jacobian: dP/dth, dP/dV, dQ/dth, dQ/dV
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(na + nm, na + nm);
    std::vector<int> ang_pos(n, -1), mag_pos(n, -1);
    for (int k = 0; k < na; ++k) ang_pos[ang_idx[k]] = k;
    for (int k = 0; k < nm; ++k) mag_pos[mag_idx[k]] = k;

    for (int col = 0; col < Y.entries.outerSize(); ++col) {
      for (Eigen::SparseMatrix<Complex>::InnerIterator it(Y.entries, col); it; ++it) {
        const int i = static_cast<int>(it.row());
        const int j = static_cast<int>(it.col());
        const double g = it.value().real(), b = it.value().imag();
        const double vi = vm[i], vj = vm[j];
        const double th = va[i] - va[j];
        const double ct = std::cos(th), st = std::sin(th);
        if (i == j) {
          const double pi = S2[i].real(), qi = S2[i].imag();
          if (ang_pos[i] >= 0) {
            J(ang_pos[i], ang_pos[i]) += -qi - b * vi * vi;                  // dPi/dthi
            if (mag_pos[i] >= 0) J(ang_pos[i], na + mag_pos[i]) += pi / vi + g * vi;  // dPi/dVi
          }
          if (mag_pos[i] >= 0) {
            J(na + mag_pos[i], ang_pos[i]) += pi - g * vi * vi;              // dQi/dthi
            J(na + mag_pos[i], na + mag_pos[i]) += qi / vi - b * vi;         // dQi/dVi
          }
        } else {
          const double dp_dthj = vi * vj * (g * st - b * ct);
          const double dp_dvj = vi * (g * ct + b * st);
          const double dq_dthj = -vi * vj * (g * ct + b * st);
          const double dq_dvj = vi * (g * st - b * ct);
          if (ang_pos[i] >= 0) {
            if (ang_pos[j] >= 0) J(ang_pos[i], ang_pos[j]) += dp_dthj;
            if (mag_pos[j] >= 0) J(ang_pos[i], na + mag_pos[j]) += dp_dvj;
          }
          if (mag_pos[i] >= 0) {
            if (ang_pos[j] >= 0) J(na + mag_pos[i], ang_pos[j]) += dq_dthj;
            if (mag_pos[j] >= 0) J(na + mag_pos[i], na + mag_pos[j]) += dq_dvj;
          }
        }
      }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(J);
    Eigen::VectorXd dx = lu.solve(mism);
    if (!dx.allFinite() || (J * dx - mism).norm() > 1e-6 * (1.0 + mism.norm()))
      fail(ErrorKind::SingularJacobian, "at iteration " + std::to_string(iter));

    for (int k = 0; k < na; ++k) va[ang_idx[k]] += dx[k];
    for (int k = 0; k < nm; ++k) vm[mag_idx[k]] += dx[na + k];
    ++sol.iterations;
  }

  rebuild_V();
  const Eigen::VectorXcd S = detail::bus_injections(Y, V);
  sol.v_mag = vm;
  sol.v_ang = va;

  sol.gen_p.assign(ng, 0.0);
  sol.gen_q.assign(ng, 0.0);
  for (int i = 0; i < n; ++i) {
    if (!has_gen[i]) continue;
    const auto gens = gc.generators_at(gc.buses[i].id);
    const double q_gen = (S[i].imag() - q_sched[i]) * gc.mva_base;
    const double p_gen = (S[i].real() - p_sched[i]) * gc.mva_base;  // nonzero only at slack
    for (std::size_t k = 0; k < gens.size(); ++k) {
      sol.gen_q[gens[k]] = q_gen / static_cast<double>(gens.size());
      sol.gen_p[gens[k]] = dispatch_mw[gens[k]] + p_gen / static_cast<double>(gens.size());
    }
  }

  const int nb = static_cast<int>(gc.branches.size());
  sol.flow_p_from.assign(nb, 0.0);
  sol.flow_q_from.assign(nb, 0.0);
  sol.flow_p_to.assign(nb, 0.0);
  sol.flow_q_to.assign(nb, 0.0);
  double loss = 0;
  for (int i = 0; i < nb; ++i) {
    const BranchFlow bf = branch_flow(gc, vm, va, i);
    sol.flow_p_from[i] = bf.p_from;
    sol.flow_q_from[i] = bf.q_from;
    sol.flow_p_to[i] = bf.p_to;
    sol.flow_q_to[i] = bf.q_to;
    loss += bf.p_from + bf.p_to;
  }
  // shunt consumption counts toward system losses
  for (int i = 0; i < n; ++i) loss += gc.buses[i].gs * vm[i] * vm[i];
  sol.losses_p = loss;
  return sol;
}

// Re-evaluates the complex power mismatch of a solved case, independent of
// the solver loop. Returns the max abs mismatch in pu over the constrained
// equations (P at non-slack, Q at PQ buses without reactive support).
inline double recheck_mismatch(const GridCase& gc, const std::vector<double>& dispatch_mw,
                               const PowerFlowSolution& sol) {
  const int n = static_cast<int>(gc.buses.size());
  const AdmittanceMatrix Y = build_admittance(gc);
  Eigen::VectorXcd V(n);
  for (int i = 0; i < n; ++i) V[i] = std::polar(sol.v_mag[i], sol.v_ang[i]);
  const Eigen::VectorXcd S = detail::bus_injections(Y, V);
  double worst = 0;
  for (int i = 0; i < n; ++i) {
    if (gc.buses[i].kind == BusKind::Slack) continue;
    double p_net = 0;
    const auto gens = gc.generators_at(gc.buses[i].id);
    for (int g : gens) p_net += dispatch_mw[g];
    p_net = (p_net - gc.buses[i].p_load) / gc.mva_base;
    worst = std::max(worst, std::abs(p_net - S[i].real()));
    if (gens.empty()) {
      const double q_net = -gc.buses[i].q_load / gc.mva_base;
      worst = std::max(worst, std::abs(q_net - S[i].imag()));
    } else {
      // generator buses: reactive output must lie within aggregate limits
      double q_gen = 0, q_min = 0, q_max = 0;
      for (int g : gens) {
        q_gen += sol.gen_q[g];
        q_min += gc.generators[g].q_min;
        q_max += gc.generators[g].q_max;
      }
      const double viol = std::max(q_min - q_gen, q_gen - q_max) / gc.mva_base;
      if (gc.buses[i].kind == BusKind::Pv) worst = std::max(worst, std::max(0.0, viol));
    }
  }
  return worst;
}

}  // namespace tsa
