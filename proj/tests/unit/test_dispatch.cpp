#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "tsa/dispatch.hpp"

using namespace tsa;

namespace {

GridCase cost_case(const std::vector<std::array<double, 5>>& units) {
  // units: {p_min, p_max, cost_a, cost_b, cost_c}; all at pv buses behind a slack
  std::string s;
  s += "[bus]\nid, kind, p_load, q_load, gs, bs, v_setpoint\n";
  s += "1, slack, 0, 0, 0, 0, 1.0\n";
  for (std::size_t i = 0; i < units.size(); ++i)
    s += std::to_string(i + 2) + ", pv, 0, 0, 0, 0, 1.0\n";
  s += "[branch]\nfrom_bus, to_bus, r, x, b_total, tap, status\n";
  for (std::size_t i = 0; i < units.size(); ++i)
    s += "1, " + std::to_string(i + 2) + ", 0, 0.1, 0, 1.0, in\n";
  s += "[gen]\nbus, p_min, p_max, q_min, q_max, cost_a, cost_b, cost_c, inertia_h, xd_prime, damping_d\n";
  s += "1, 0, 100000, -100000, 100000, 1.0, 1000, 0, 5, 0.1, 0\n";  // expensive slack unit
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& u = units[i];
    s += std::to_string(i + 2) + ", " + fmt_double(u[0]) + ", " + fmt_double(u[1]) + ", -1000, 1000, " +
         fmt_double(u[2]) + ", " + fmt_double(u[3]) + ", " + fmt_double(u[4]) + ", 5, 0.1, 0\n";
  }
  s += "[area]\nbus, area\n1, 1\n";
  for (std::size_t i = 0; i < units.size(); ++i) s += std::to_string(i + 2) + ", 1\n";
  return parse_case(testutil::write_temp(s, "dispatch"));
}

}  // namespace

TEST_CASE("identical quadratic units split demand evenly") {
  // slack unit priced out at lambda=1000; the two paired units share
  const GridCase gc = cost_case({{0, 10000, 0.01, 10, 0}, {0, 10000, 0.01, 10, 0}});
  const DispatchResult d = economic_dispatch(gc, 100.0);
  const auto g2 = gc.generators_at(2).front();
  const auto g3 = gc.generators_at(3).front();
  CHECK(d.p_set[g2] == Catch::Approx(50.0).margin(1e-6));
  CHECK(d.p_set[g3] == Catch::Approx(50.0).margin(1e-6));
  CHECK(d.lambda == Catch::Approx(10 + 2 * 0.01 * 50).margin(1e-6));
}

TEST_CASE("flat-cost units fill in merit order") {
  const GridCase gc = cost_case({{5, 300, 0.0, 10, 0}, {5, 300, 0.0, 20, 0}});
  const DispatchResult d = economic_dispatch(gc, 200.0);
  const auto g2 = gc.generators_at(2).front();
  const auto g3 = gc.generators_at(3).front();
  CHECK(d.p_set[g2] == Catch::Approx(195.0).margin(1e-6));  // everything beyond the minima
  CHECK(d.p_set[g3] == Catch::Approx(5.0).margin(1e-6));
}

TEST_CASE("infeasible demand is a named error") {
  const GridCase gc = cost_case({{0, 50, 0.01, 10, 0}});
  CHECK_THROWS_MATCHES(economic_dispatch(gc, 1e9), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
    return e.kind() == ErrorKind::InfeasibleDemand;
  }));
}

TEST_CASE("dispatch satisfies the equal-incremental-cost condition") {
  const GridCase gc = parse_case(testutil::case39_path());
  const DispatchResult d = economic_dispatch(gc, 6300.0);
  double total = 0;
  for (std::size_t g = 0; g < gc.generators.size(); ++g) {
    const auto& gen = gc.generators[g];
    total += d.p_set[g];
    CHECK(d.p_set[g] >= gen.p_min - 1e-9);
    CHECK(d.p_set[g] <= gen.p_max + 1e-9);
    const bool clamped = d.p_set[g] <= gen.p_min + 1e-9 || d.p_set[g] >= gen.p_max - 1e-9;
    if (!clamped) {
      const double marginal = 2 * gen.cost_a * d.p_set[g] + gen.cost_b;
      CHECK(marginal == Catch::Approx(d.lambda).margin(1e-6));
    }
  }
  CHECK(total == Catch::Approx(6300.0).margin(1e-4));
}

TEST_CASE("dispatch cost is non-decreasing in demand") {
  const GridCase gc = parse_case(testutil::case39_path());
  double prev = -1;
  for (double demand = 2000; demand <= 7300; demand += 250) {
    const DispatchResult d = economic_dispatch(gc, demand);
    CHECK(d.total_cost >= prev);
    prev = d.total_cost;
  }
}

TEST_CASE("operating point solve on the base case") {
  const GridCase gc = parse_case(testutil::case39_path());
  std::map<int, double> ones;
  for (int b : gc.load_buses()) ones[b] = 1.0;

  const ScenarioOutcome a = solve_operating_point(gc, ones, 7);
  REQUIRE(a.ok());
  CHECK(a.op->scenario_id == 7);

  SECTION("power balance within 1e-4 MW") {
    double gen = 0;
    for (double p : a.op->solution.gen_p) gen += p;
    CHECK(std::abs(gen - a.op->scaled_case.total_p_load() - a.op->solution.losses_p) < 1e-4);
  }

  SECTION("slack stays inside its limits") {
    const int slack_gen = gc.generators_at(31).front();
    CHECK(a.op->solution.gen_p[slack_gen] >= gc.generators[slack_gen].p_min);
    CHECK(a.op->solution.gen_p[slack_gen] <= gc.generators[slack_gen].p_max);
  }

  SECTION("rerun is bit-identical") {
    const ScenarioOutcome b = solve_operating_point(gc, ones, 7);
    REQUIRE(b.ok());
    CHECK((a.op->solution.v_mag - b.op->solution.v_mag).cwiseAbs().maxCoeff() == 0.0);
    CHECK((a.op->solution.v_ang - b.op->solution.v_ang).cwiseAbs().maxCoeff() == 0.0);
    for (std::size_t g = 0; g < a.op->solution.gen_p.size(); ++g)
      CHECK(a.op->solution.gen_p[g] == b.op->solution.gen_p[g]);
  }
}

TEST_CASE("extreme load scales are tagged, never dropped") {
  const GridCase gc = parse_case(testutil::case39_path());

  SECTION("140 percent everywhere exceeds aggregate capacity") {
    std::map<int, double> heavy;
    for (int b : gc.load_buses()) heavy[b] = 1.4;
    const ScenarioOutcome out = solve_operating_point(gc, heavy);
    // 1.4 x 6254 MW > 7367 MW aggregate capability: must be tagged
    CHECK_FALSE(out.ok());
    CHECK(out.status == ScenarioStatus::DispatchInfeasible);
    CHECK_FALSE(out.note.empty());
  }

  SECTION("a merely heavy scale either converges or is tagged") {
    std::map<int, double> heavy;
    for (int b : gc.load_buses()) heavy[b] = 1.12;
    const ScenarioOutcome out = solve_operating_point(gc, heavy);
    if (!out.ok()) CHECK_FALSE(out.note.empty());
    else CHECK(out.op->solution.converged);
  }
}

TEST_CASE("demand below the aggregate minimum is tagged infeasible") {
  std::string text = testutil::two_bus_case_text(10.0, 0.0);
  // force a 50 MW must-run floor on the only generator
  const std::string from = "1, 0, 1000,";
  text.replace(text.find(from), from.size(), "1, 50, 1000,");
  const GridCase gc = parse_case(testutil::write_temp(text, "mustrun"));
  const ScenarioOutcome out = solve_operating_point(gc, {{2, 1.0}});
  CHECK(out.status == ScenarioStatus::DispatchInfeasible);
}
