#include <catch_amalgamated.hpp>
#include <random>

#include "helpers.hpp"
#include "tsa/transient.hpp"

using namespace tsa;

namespace {

// Equal-area criterion for one machine against a stiff partner, evaluated by
// numeric quadrature on the model's own reduced matrices. Independent of the
// RK4 integrator.
struct EacOracle {
  double critical_clearing_time;  // seconds after fault application
  double delta_crit, delta_max;
};

EacOracle equal_area_cct(const DynamicModel& model, int machine, int stiff) {
  const double e1 = model.e_mag[machine], e0 = model.e_mag[stiff];
  const double p_pre = e1 * e0 * model.y_pre(machine, stiff).imag();
  const double p_f = e1 * e0 * model.y_fault(machine, stiff).imag();
  const double p_post = e1 * e0 * model.y_post(machine, stiff).imag();
  const double pm = model.p_mech[machine];
  const double d0 = model.delta0[machine] - model.delta0[stiff];
  REQUIRE(p_pre > 0);
  REQUIRE(p_post > pm);  // post-fault equilibrium must exist
  // relative inertia of the pair
  const double m1 = model.inertia_m[machine], m0 = model.inertia_m[stiff];
  const double m_eq = m1 * m0 / (m1 + m0);

  const double d_max = std::numbers::pi - std::asin(pm / p_post);
  auto area_gap = [&](double dc) {
    const double acc = pm * (dc - d0) + p_f * (std::cos(dc) - std::cos(d0));
    const double dec = p_post * (std::cos(dc) - std::cos(d_max)) - pm * (d_max - dc);
    return acc - dec;
  };
  double lo = d0, hi = d_max;
  REQUIRE(area_gap(lo) < 0);
  REQUIRE(area_gap(hi) > 0);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (area_gap(mid) < 0 ? lo : hi) = mid;
  }
  const double dc = 0.5 * (lo + hi);

  // time to swing from d0 to dc under the fault-on dynamics, via
  // delta = d0 + u^2 to tame the square-root singularity at the start
  auto speed = [&](double d) {
    const double kin = (2.0 / m_eq) * (pm * (d - d0) + p_f * (std::cos(d) - std::cos(d0)));
    return std::sqrt(std::max(kin, 0.0));
  };
  auto integrand = [&](double u) {
    if (u <= 0) return 2.0 / std::sqrt((2.0 / m_eq) * (pm - p_f * std::sin(d0)));
    return 2.0 * u / speed(d0 + u * u);
  };
  const double U = std::sqrt(dc - d0);
  const int n = 4000;  // Simpson
  const double h = U / n;
  double sum = integrand(0) + integrand(U);
  for (int k = 1; k < n; ++k) sum += integrand(k * h) * (k % 2 ? 4.0 : 2.0);
  return {sum * h / 3.0, dc, d_max};
}

// energy function of an undamped lossless reduced model
double system_energy(const DynamicModel& model, const Eigen::MatrixXcd& y, const Eigen::VectorXd& delta,
                     const Eigen::VectorXd& omega) {
  const int m = model.machine_count();
  double e = 0;
  for (int i = 0; i < m; ++i) e += kOmegaSync * model.inertia_h[i] * omega[i] * omega[i];
  for (int i = 0; i < m; ++i) e -= model.p_mech[i] * delta[i];
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j)
      e -= model.e_mag[i] * model.e_mag[j] * y(i, j).imag() * std::cos(delta[i] - delta[j]);
  return e;
}

OperatingPoint base_case_op() {
  const GridCase gc = parse_case(testutil::case39_path());
  std::map<int, double> ones;
  for (int b : gc.load_buses()) ones[b] = 1.0;
  ScenarioOutcome out = solve_operating_point(gc, ones);
  REQUIRE(out.ok());
  return *out.op;
}

}  // namespace

TEST_CASE("kron reduction") {
  SECTION("keeping every node is the identity") {
    Eigen::MatrixXcd y(3, 3);
    y << Complex(1, -3), Complex(0, 1), Complex(0, 2), Complex(0, 1), Complex(2, -4), Complex(0, 1), Complex(0, 2),
        Complex(0, 1), Complex(1, -5);
    const Eigen::MatrixXcd r = kron_reduce(y, {0, 1, 2});
    CHECK((r - y).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("star collapses to the y/3 triangle") {
    const Complex yb(0.7, -2.0);
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(4, 4);
    for (int leg = 0; leg < 3; ++leg) {
      y(leg, leg) += yb;
      y(3, 3) += yb;
      y(leg, 3) -= yb;
      y(3, leg) -= yb;
    }
    const Eigen::MatrixXcd r = kron_reduce(y, {0, 1, 2});
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        const Complex want = i == j ? yb - yb / 3.0 : -yb / 3.0;
        CHECK(std::abs(r(i, j) - want) < 1e-12);
      }
  }

  SECTION("reduced solve equals the full solve at kept nodes") {
    std::mt19937 rng(20240811);
    std::uniform_real_distribution<double> unif(0.2, 2.0);
    for (int trial = 0; trial < 25; ++trial) {
      const int n = 6;
      Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
      for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
          if (unif(rng) < 0.7) continue;  // sparse-ish
          const Complex yb(unif(rng) * 0.1, -unif(rng));
          y(i, j) -= yb;
          y(j, i) -= yb;
          y(i, i) += yb;
          y(j, j) += yb;
        }
      for (int i = 0; i < n; ++i) y(i, i) += Complex(unif(rng) * 0.05, unif(rng) * 0.1);
      const std::vector<int> keep{0, 2, 5};
      const Eigen::MatrixXcd yr = kron_reduce(y, keep);

      Eigen::VectorXcd i_full = Eigen::VectorXcd::Zero(n);
      for (std::size_t k = 0; k < keep.size(); ++k) i_full[keep[k]] = Complex(unif(rng), unif(rng));
      const Eigen::VectorXcd v_full = Eigen::FullPivLU<Eigen::MatrixXcd>(y).solve(i_full);
      Eigen::VectorXcd i_keep(keep.size());
      for (std::size_t k = 0; k < keep.size(); ++k) i_keep[k] = i_full[keep[k]];
      const Eigen::VectorXcd v_red = Eigen::FullPivLU<Eigen::MatrixXcd>(yr).solve(i_keep);
      for (std::size_t k = 0; k < keep.size(); ++k) CHECK(std::abs(v_red[k] - v_full[keep[k]]) < 1e-10);
    }
  }

  SECTION("singular eliminated block is a named error") {
    Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(3, 3);
    y(0, 0) = Complex(1, -1);  // node 1 and 2 isolated: eliminated block singular
    CHECK_THROWS_MATCHES(kron_reduce(y, {0}), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
      return e.kind() == ErrorKind::SingularBlock;
    }));
  }
}

TEST_CASE("dynamic model initialization") {
  SECTION("internal EMF from hand complex arithmetic") {
    // machine carrying S = 0.8 + j0.2 at V = 1<0 behind xd' = 0.3:
    // E = 1 + j0.3 (0.8 - j0.2) = 1.06 + j0.24
    std::string text = testutil::two_bus_case_text();
    const std::string old = "0.01, 10, 0, 5.0, 0.1, 0";
    text.replace(text.find(old), old.size(), "0.01, 10, 0, 5.0, 0.3, 0");
    OperatingPoint op;
    op.scaled_case = parse_case(testutil::write_temp(text, "xdp"));
    op.solution.converged = true;
    op.solution.v_mag = Eigen::VectorXd::Ones(2);
    op.solution.v_ang = Eigen::VectorXd::Zero(2);
    op.solution.gen_p = {80.0};
    op.solution.gen_q = {20.0};
    const DynamicModel model = init_dynamics(op, make_contingency(op.scaled_case, 1, 2, 2));
    CHECK(model.e_mag[0] == Catch::Approx(1.086830253535482).margin(1e-12));
    CHECK(model.delta0[0] == Catch::Approx(0.22266094063636493).margin(1e-12));
  }

  SECTION("zero-output machines sit at their terminal phasor") {
    const GridCase gc = testutil::smib_case();
    OperatingPoint op;
    op.scaled_case = gc;
    op.solution.converged = true;
    op.solution.v_mag = Eigen::VectorXd::Ones(2) * 1.02;
    op.solution.v_ang = Eigen::VectorXd::Constant(2, 0.3);
    op.solution.gen_p = {0.0, 0.0};
    op.solution.gen_q = {0.0, 0.0};
    const DynamicModel model = init_dynamics(op, make_contingency_for_branch(gc, 0, 2));
    for (int g = 0; g < 2; ++g) {
      CHECK(model.e_mag[g] == Catch::Approx(1.02).margin(1e-12));
      CHECK(model.delta0[g] == Catch::Approx(0.3).margin(1e-12));
    }
  }

  SECTION("every machine starts at equilibrium") {
    const OperatingPoint op = base_case_op();
    const ContingencySpec spec = make_contingency(op.scaled_case, 21, 22);
    const DynamicModel model = init_dynamics(op, spec);
    Eigen::VectorXd d0 = Eigen::Map<const Eigen::VectorXd>(model.delta0.data(), model.machine_count());
    const Eigen::VectorXd pe = model.electrical_power(model.y_pre, d0);
    for (int g = 0; g < model.machine_count(); ++g)
      CHECK(std::abs(model.p_mech[g] - pe[g]) < 1e-6);
  }

  SECTION("a non-converged operating point is rejected") {
    OperatingPoint op;
    op.scaled_case = testutil::two_bus_case();
    op.solution.converged = false;
    CHECK_THROWS_AS(init_dynamics(op, make_contingency(op.scaled_case, 1, 2)), Error);
  }
}

TEST_CASE("no-fault simulation preserves the equilibrium") {
  const OperatingPoint op = base_case_op();
  ContingencySpec spec = make_contingency(op.scaled_case, 21, 22, std::nullopt, 10.0, 10.1);
  const DynamicModel model = init_dynamics(op, spec);
  const SimulationResult res = simulate_contingency(model, spec, 5.0, 0.005);
  CHECK(res.label == StabilityLabel::Stable);

  // drift of every machine's COI deviation stays below 0.001 rad
  const int m = model.machine_count();
  double h_total = 0;
  for (double h : model.inertia_h) h_total += h;
  auto dev = [&](int step, int i) {
    double coi = 0;
    for (int k = 0; k < m; ++k) coi += model.inertia_h[k] * res.delta(step, k);
    return res.delta(step, i) - coi / h_total;
  };
  double drift = 0;
  for (int s = 0; s < res.delta.rows(); ++s)
    for (int i = 0; i < m; ++i) drift = std::max(drift, std::abs(dev(s, i) - dev(0, i)));
  CHECK(drift < 1e-3);
}

TEST_CASE("pre-fault phase is quiescent") {
  const OperatingPoint op = base_case_op();
  ContingencySpec spec = make_contingency(op.scaled_case, 21, 22, std::nullopt, 1.0, 1.25);
  const DynamicModel model = init_dynamics(op, spec);
  const SimulationResult res = simulate_contingency(model, spec, 2.0, 0.005);
  double worst = 0;
  for (std::size_t s = 0; s < res.t.size(); ++s) {
    if (res.t[s] >= 1.0) break;
    worst = std::max(worst, res.omega_dev.row(s).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("SMIB critical clearing time matches the equal-area oracle") {
  const GridCase gc = testutil::smib_case(100.0);
  std::map<int, double> none;  // no load buses in this fixture
  const ScenarioOutcome out = solve_operating_point(gc, none);
  REQUIRE(out.ok());
  ContingencySpec spec = make_contingency_for_branch(gc, 0, 2, 0.5, 0.6);
  const DynamicModel model = init_dynamics(*out.op, spec);
  const int machine = 1, stiff = 0;  // generator order by bus id
  REQUIRE(model.machine_bus[machine] == 2);

  const EacOracle oracle = equal_area_cct(model, machine, stiff);
  REQUIRE(oracle.critical_clearing_time > 0.05);
  REQUIRE(oracle.critical_clearing_time < 1.0);

  const double dt = 0.005;
  int last_stable = -1, first_unstable = -1;
  for (int k = 1; k * dt < 1.0; ++k) {
    spec.t_clear = spec.t_fault + k * dt;
    const SimulationResult res = simulate_contingency(model, spec, 10.0, dt, {machine});
    if (res.label == StabilityLabel::Stable) {
      CHECK(first_unstable < 0);  // label is monotone in clearing time
      last_stable = k;
    } else if (first_unstable < 0) {
      first_unstable = k;
    }
  }
  REQUIRE(last_stable > 0);
  REQUIRE(first_unstable == last_stable + 1);
  const double cct_sim = last_stable * dt;
  CHECK(std::abs(cct_sim - oracle.critical_clearing_time) <= dt + 1e-9);
}

TEST_CASE("undamped lossless energy drift shows fourth-order convergence") {
  const GridCase gc = testutil::smib_case(100.0);
  std::map<int, double> none;
  const ScenarioOutcome out = solve_operating_point(gc, none);
  REQUIRE(out.ok());
  ContingencySpec spec = make_contingency_for_branch(gc, 0, 2, 0.1, 0.1 + 0.15);
  const DynamicModel model = init_dynamics(*out.op, spec);

  auto post_drift = [&](double dt) {
    const SimulationResult res = simulate_contingency(model, spec, 5.0, dt);
    REQUIRE(res.label == StabilityLabel::Stable);
    double e0 = 0, worst = 0;
    bool first = true;
    for (std::size_t s = 0; s < res.t.size(); ++s) {
      if (res.t[s] < spec.t_clear - 1e-12) continue;
      const double e = system_energy(model, model.y_post, res.delta.row(s).transpose(),
                                     res.omega_dev.row(s).transpose());
      if (first) {
        e0 = e;
        first = false;
      }
      worst = std::max(worst, std::abs(e - e0));
    }
    return worst;
  };

  const double drift_coarse = post_drift(0.005);
  CHECK(drift_coarse < 1e-4);
  const double drift_fine = post_drift(0.005 / 4.0);
  REQUIRE(drift_fine > 0);
  const double ratio = drift_coarse / drift_fine;
  CHECK(ratio > 100.0);
  CHECK(ratio < 600.0);
}

TEST_CASE("stability labelling rules") {
  const std::vector<double> inertia{1.0, 1.0};
  const std::vector<double> t{0.0, 1.0};

  SECTION("constant angles are stable") {
    Eigen::MatrixXd d(2, 2);
    d << 0.3, 0.5, 0.3, 0.5;
    const LabelOutcome out = label_stability(d, inertia, {0, 1}, t);
    CHECK(out.label == StabilityLabel::Stable);
    CHECK_FALSE(out.first_violation_t.has_value());
  }

  SECTION("a 181 degree excursion is unstable") {
    Eigen::MatrixXd d(2, 2);
    d << 0.0, 0.0, 181.0 * std::numbers::pi / 180.0 * 2.0, 0.0;  // dev from COI = half the spread
    const LabelOutcome out = label_stability(d, inertia, {0, 1}, t);
    CHECK(out.label == StabilityLabel::Unstable);
    CHECK(out.first_violation_t == 1.0);
  }

  SECTION("exactly 180 degrees goes to the unsafe side") {
    Eigen::MatrixXd d(1, 2);
    d << 0.0, 2.0 * std::numbers::pi;  // each machine 180 degrees from COI
    const LabelOutcome out = label_stability(d, inertia, {0}, std::vector<double>{0.0});
    CHECK(out.label == StabilityLabel::Unstable);
    CHECK(out.max_coi_dev_deg == Catch::Approx(180.0).margin(1e-9));
  }

  SECTION("subset restriction ignores outside machines") {
    Eigen::MatrixXd d(1, 2);
    d << 0.0, 2.0 * std::numbers::pi;
    // machine 0 deviates by 180 from COI as well; restricting to a subset
    // still sees its own deviation, so craft unequal inertias instead
    const std::vector<double> h{9.0, 1.0};
    const LabelOutcome heavy = label_stability(d, h, {0}, std::vector<double>{0.0});
    CHECK(heavy.label == StabilityLabel::Stable);  // heavy machine barely moves from COI
    const LabelOutcome light = label_stability(d, h, {1}, std::vector<double>{0.0});
    CHECK(light.label == StabilityLabel::Unstable);
  }

  SECTION("empty subset is a named error") {
    Eigen::MatrixXd d(1, 2);
    d << 0.0, 0.0;
    CHECK_THROWS_MATCHES(label_stability(d, inertia, {}, std::vector<double>{0.0}), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::EmptySubset;
                         }));
  }
}

TEST_CASE("blow-up is reported, not thrown") {
  // a model pushed far out of equilibrium with absurd mechanical power
  const GridCase gc = testutil::smib_case(100.0);
  std::map<int, double> none;
  const ScenarioOutcome out = solve_operating_point(gc, none);
  REQUIRE(out.ok());
  ContingencySpec spec = make_contingency_for_branch(gc, 0, 2, 0.1, 0.2);
  DynamicModel model = init_dynamics(*out.op, spec);
  model.p_mech[1] = 1e12;  // force a numeric explosion
  const SimulationResult res = simulate_contingency(model, spec, 5.0, 0.005);
  CHECK(res.label == StabilityLabel::Unstable);
}
