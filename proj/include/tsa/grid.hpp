#pragma once

#include <Eigen/SparseCore>
#include <algorithm>
#include <complex>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "tsa/common.hpp"

namespace tsa {

using Complex = std::complex<double>;

enum class BusKind { Slack, Pv, Pq };

inline const char* to_string(BusKind k) {
  switch (k) {
    case BusKind::Slack: return "slack";
    case BusKind::Pv: return "pv";
    case BusKind::Pq: return "pq";
  }
  return "?";
}

struct BusRecord {
  int id = 0;
  BusKind kind = BusKind::Pq;
  double p_load = 0;     // MW
  double q_load = 0;     // MVAr
  double gs = 0;         // MW consumed at 1 pu
  double bs = 0;         // MVAr injected at 1 pu
  double v_setpoint = 1; // pu, meaningful for pv/slack only
};

struct BranchRecord {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0;        // pu
  double x = 0;        // pu
  double b_total = 0;  // pu total line charging
  double tap = 1.0;    // off-nominal ratio at the from side, 1.0 = none
  bool in_service = true;
};

struct GeneratorRecord {
  int bus = 0;
  double p_min = 0, p_max = 0;  // MW
  double q_min = 0, q_max = 0;  // MVAr
  double cost_a = 0;            // $/MW^2 h
  double cost_b = 0;            // $/MWh
  double cost_c = 0;            // $/h
  double inertia_h = 0;         // s on system base
  double xd_prime = 0;          // pu transient reactance
  double damping_d = 0;         // pu torque per pu speed deviation
};

// Static network description. Collections are held in canonical order (buses
// and generators by ascending bus id, branches by endpoint/impedance key) so
// every downstream artifact is independent of row order in the case file.
struct GridCase {
  double mva_base = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;
  std::vector<GeneratorRecord> generators;
  std::map<int, int> area_of_bus;

  int bus_index(int id) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), id,
                               [](const BusRecord& b, int v) { return b.id < v; });
    if (it == buses.end() || it->id != id) fail(ErrorKind::UnknownBus, "bus " + std::to_string(id));
    return static_cast<int>(it - buses.begin());
  }

  bool has_bus(int id) const {
    auto it = std::lower_bound(buses.begin(), buses.end(), id,
                               [](const BusRecord& b, int v) { return b.id < v; });
    return it != buses.end() && it->id == id;
  }

  const BusRecord& bus(int id) const { return buses[bus_index(id)]; }

  // load buses are those with nonzero active load (negative counts)
  bool is_load_bus(int id) const { return bus(id).p_load != 0.0; }

  std::vector<int> load_buses() const {
    std::vector<int> out;
    for (const auto& b : buses)
      if (b.p_load != 0.0) out.push_back(b.id);
    return out;
  }

  int slack_bus_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i)
      if (buses[i].kind == BusKind::Slack) return static_cast<int>(i);
    fail(ErrorKind::NoSlack, "case has no slack bus");
  }

  std::vector<int> generators_at(int bus_id) const {
    std::vector<int> idx;
    for (std::size_t g = 0; g < generators.size(); ++g)
      if (generators[g].bus == bus_id) idx.push_back(static_cast<int>(g));
    return idx;
  }

  int find_branch(int a, int b) const {
    int found = -1;
    for (std::size_t i = 0; i < branches.size(); ++i) {
      const auto& br = branches[i];
      if ((br.from_bus == a && br.to_bus == b) || (br.from_bus == b && br.to_bus == a)) {
        if (found >= 0) fail(ErrorKind::BadArgument, "ambiguous line " + std::to_string(a) + "-" + std::to_string(b));
        found = static_cast<int>(i);
      }
    }
    if (found < 0) fail(ErrorKind::UnknownBus, "no line " + std::to_string(a) + "-" + std::to_string(b));
    return found;
  }

  double total_p_load() const {
    double s = 0;
    for (const auto& b : buses) s += b.p_load;
    return s;
  }
};

struct AdmittanceMatrix {
  int order = 0;
  Eigen::SparseMatrix<Complex> entries;
};

namespace detail {

inline void sort_canonical(GridCase& gc) {
  std::sort(gc.buses.begin(), gc.buses.end(),
            [](const BusRecord& a, const BusRecord& b) { return a.id < b.id; });
  std::sort(gc.generators.begin(), gc.generators.end(),
            [](const GeneratorRecord& a, const GeneratorRecord& b) {
              return std::tie(a.bus, a.p_max, a.cost_b) < std::tie(b.bus, b.p_max, b.cost_b);
            });
  std::sort(gc.branches.begin(), gc.branches.end(),
            [](const BranchRecord& a, const BranchRecord& b) {
              return std::tie(a.from_bus, a.to_bus, a.r, a.x, a.b_total, a.tap) <
                     std::tie(b.from_bus, b.to_bus, b.r, b.x, b.b_total, b.tap);
            });
}

inline void validate_case(const GridCase& gc) {
  if (gc.buses.empty()) fail(ErrorKind::SchemaError, "case has no buses");
  for (std::size_t i = 1; i < gc.buses.size(); ++i)
    if (gc.buses[i].id == gc.buses[i - 1].id)
      fail(ErrorKind::DuplicateId, "bus " + std::to_string(gc.buses[i].id));
  int slack_count = 0;
  for (const auto& b : gc.buses) {
    if (b.kind == BusKind::Slack) ++slack_count;
    if (b.kind != BusKind::Pq && (b.v_setpoint < 0.9 || b.v_setpoint > 1.1))
      fail(ErrorKind::SchemaError,
           "bus " + std::to_string(b.id) + " v_setpoint " + fmt_double(b.v_setpoint) + " outside [0.9, 1.1]");
  }
  if (slack_count == 0) fail(ErrorKind::NoSlack, "case declares no slack bus");
  if (slack_count > 1) fail(ErrorKind::MultipleSlack, std::to_string(slack_count) + " slack buses declared");

  for (const auto& br : gc.branches) {
    if (br.x <= 0)
      fail(ErrorKind::ZeroOrNegativeReactance,
           "branch " + std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus));
    if (br.from_bus == br.to_bus)
      fail(ErrorKind::SchemaError, "branch with identical endpoints at bus " + std::to_string(br.from_bus));
    if (!gc.has_bus(br.from_bus)) fail(ErrorKind::UnknownBus, "branch endpoint " + std::to_string(br.from_bus));
    if (!gc.has_bus(br.to_bus)) fail(ErrorKind::UnknownBus, "branch endpoint " + std::to_string(br.to_bus));
    if (br.tap <= 0) fail(ErrorKind::SchemaError, "non-positive tap on branch " + std::to_string(br.from_bus) +
                                                      "-" + std::to_string(br.to_bus));
  }

  for (const auto& g : gc.generators) {
    if (!gc.has_bus(g.bus)) fail(ErrorKind::UnknownBus, "generator bus " + std::to_string(g.bus));
    if (g.p_min > g.p_max) fail(ErrorKind::SchemaError, "generator at bus " + std::to_string(g.bus) + " has p_min > p_max");
    if (g.q_min > g.q_max) fail(ErrorKind::SchemaError, "generator at bus " + std::to_string(g.bus) + " has q_min > q_max");
    if (g.inertia_h <= 0) fail(ErrorKind::SchemaError, "generator at bus " + std::to_string(g.bus) + " has non-positive inertia");
    if (g.xd_prime <= 0) fail(ErrorKind::SchemaError, "generator at bus " + std::to_string(g.bus) + " has non-positive xd_prime");
  }

  for (const auto& b : gc.buses) {
    if (b.kind != BusKind::Pq && gc.generators_at(b.id).empty())
      fail(ErrorKind::SchemaError, "bus " + std::to_string(b.id) + " is " + to_string(b.kind) + " but has no generator");
    if (!gc.area_of_bus.count(b.id))
      fail(ErrorKind::SchemaError, "bus " + std::to_string(b.id) + " missing from [area] section");
  }
  for (const auto& [bus_id, area] : gc.area_of_bus)
    if (!gc.has_bus(bus_id)) fail(ErrorKind::UnknownBus, "[area] entry for bus " + std::to_string(bus_id));

  // connectivity over in-service branches
  const int n = static_cast<int>(gc.buses.size());
  std::vector<std::vector<int>> adj(n);
  for (const auto& br : gc.branches) {
    if (!br.in_service) continue;
    int f = gc.bus_index(br.from_bus), t = gc.bus_index(br.to_bus);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int visited = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = 1;
        ++visited;
        stack.push_back(v);
      }
  }
  if (visited != n) fail(ErrorKind::DisconnectedGraph, std::to_string(n - visited) + " buses unreachable");
}

}  // namespace detail

// Case files are four plain-text sections ([bus], [branch], [gen], [area]),
// each a header line naming the fields followed by comma-separated rows.
// '#' starts a comment.
inline GridCase parse_case(const std::string& path) {
  const std::string content = read_file(path);

  static const char* kBusHeader = "id, kind, p_load, q_load, gs, bs, v_setpoint";
  static const char* kBranchHeader = "from_bus, to_bus, r, x, b_total, tap, status";
  static const char* kGenHeader =
      "bus, p_min, p_max, q_min, q_max, cost_a, cost_b, cost_c, inertia_h, xd_prime, damping_d";
  static const char* kAreaHeader = "bus, area";

  GridCase gc;
  std::istringstream in(content);
  std::string line;
  std::string section;
  bool header_seen = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (t[0] == '[') {
      if (t == "[bus]" || t == "[branch]" || t == "[gen]" || t == "[area]") {
        section = t;
        header_seen = false;
        continue;
      }
      fail(ErrorKind::SchemaError, "unknown section " + t + " at " + ctx);
    }
    if (section.empty()) fail(ErrorKind::SchemaError, "data before any section at " + ctx);
    if (!header_seen) {
      const char* want = section == "[bus]"      ? kBusHeader
                         : section == "[branch]" ? kBranchHeader
                         : section == "[gen]"    ? kGenHeader
                                                 : kAreaHeader;
      auto got = split(t, ',');
      auto expect = split(want, ',');
      if (got != expect) fail(ErrorKind::SchemaError, "bad " + section + " header at " + ctx);
      header_seen = true;
      continue;
    }
    auto f = split(t, ',');
    if (section == "[bus]") {
      if (f.size() != 7) fail(ErrorKind::SchemaError, "bus row needs 7 fields at " + ctx);
      BusRecord b;
      b.id = static_cast<int>(parse_int(f[0], ctx));
      if (f[1] == "slack") b.kind = BusKind::Slack;
      else if (f[1] == "pv") b.kind = BusKind::Pv;
      else if (f[1] == "pq") b.kind = BusKind::Pq;
      else fail(ErrorKind::SchemaError, "bad bus kind '" + f[1] + "' at " + ctx);
      b.p_load = parse_double(f[2], ctx);
      b.q_load = parse_double(f[3], ctx);
      b.gs = parse_double(f[4], ctx);
      b.bs = parse_double(f[5], ctx);
      b.v_setpoint = parse_double(f[6], ctx);
      gc.buses.push_back(b);
    } else if (section == "[branch]") {
      if (f.size() != 7) fail(ErrorKind::SchemaError, "branch row needs 7 fields at " + ctx);
      BranchRecord br;
      br.from_bus = static_cast<int>(parse_int(f[0], ctx));
      br.to_bus = static_cast<int>(parse_int(f[1], ctx));
      br.r = parse_double(f[2], ctx);
      br.x = parse_double(f[3], ctx);
      br.b_total = parse_double(f[4], ctx);
      br.tap = parse_double(f[5], ctx);
      if (f[6] == "in") br.in_service = true;
      else if (f[6] == "out") br.in_service = false;
      else fail(ErrorKind::SchemaError, "bad branch status '" + f[6] + "' at " + ctx);
      gc.branches.push_back(br);
    } else if (section == "[gen]") {
      if (f.size() != 11) fail(ErrorKind::SchemaError, "gen row needs 11 fields at " + ctx);
      GeneratorRecord g;
      g.bus = static_cast<int>(parse_int(f[0], ctx));
      g.p_min = parse_double(f[1], ctx);
      g.p_max = parse_double(f[2], ctx);
      g.q_min = parse_double(f[3], ctx);
      g.q_max = parse_double(f[4], ctx);
      g.cost_a = parse_double(f[5], ctx);
      g.cost_b = parse_double(f[6], ctx);
      g.cost_c = parse_double(f[7], ctx);
      g.inertia_h = parse_double(f[8], ctx);
      g.xd_prime = parse_double(f[9], ctx);
      g.damping_d = parse_double(f[10], ctx);
      gc.generators.push_back(g);
    } else {
      if (f.size() != 2) fail(ErrorKind::SchemaError, "area row needs 2 fields at " + ctx);
      int bus_id = static_cast<int>(parse_int(f[0], ctx));
      if (gc.area_of_bus.count(bus_id)) fail(ErrorKind::DuplicateId, "[area] bus " + std::to_string(bus_id));
      gc.area_of_bus[bus_id] = static_cast<int>(parse_int(f[1], ctx));
    }
  }

  detail::sort_canonical(gc);
  detail::validate_case(gc);
  return gc;
}

// Multiplies P and Q at the given buses by the same factor. Buses absent from
// the map keep their nominal load.
inline GridCase scale_loads(const GridCase& gc, const std::map<int, double>& scale) {
  GridCase out = gc;
  for (const auto& [bus_id, mult] : scale) {
    if (!gc.is_load_bus(bus_id)) fail(ErrorKind::NotALoadBus, "bus " + std::to_string(bus_id));
    if (!(mult > 0)) fail(ErrorKind::BadMultiplier, "bus " + std::to_string(bus_id) + " multiplier " + fmt_double(mult));
    BusRecord& b = out.buses[out.bus_index(bus_id)];
    b.p_load *= mult;
    b.q_load *= mult;
  }
  return out;
}

// Standard bus admittance assembly: series y = 1/(r+jx), half charging at
// each end, off-nominal tap on the from side. `exclude` drops one branch by
// canonical index, which models the tripped line.
inline AdmittanceMatrix build_admittance(const GridCase& gc, std::optional<int> exclude = std::nullopt) {
  const int n = static_cast<int>(gc.buses.size());
  std::vector<Eigen::Triplet<Complex>> trip;
  trip.reserve(gc.branches.size() * 4 + n);
  for (std::size_t i = 0; i < gc.branches.size(); ++i) {
    const auto& br = gc.branches[i];
    if (!br.in_service) continue;
    if (exclude && static_cast<int>(i) == *exclude) continue;
    const int f = gc.bus_index(br.from_bus);
    const int t = gc.bus_index(br.to_bus);
    const Complex y = 1.0 / Complex(br.r, br.x);
    const Complex ysh(0.0, br.b_total / 2.0);
    const double tau = br.tap;
    trip.emplace_back(f, f, (y + ysh) / (tau * tau));
    trip.emplace_back(t, t, y + ysh);
    trip.emplace_back(f, t, -y / tau);
    trip.emplace_back(t, f, -y / tau);
  }
  for (int i = 0; i < n; ++i) {
    const auto& b = gc.buses[i];
    if (b.gs != 0.0 || b.bs != 0.0) trip.emplace_back(i, i, Complex(b.gs, b.bs) / gc.mva_base);
  }
  AdmittanceMatrix Y;
  Y.order = n;
  Y.entries.resize(n, n);
  Y.entries.setFromTriplets(trip.begin(), trip.end());
  return Y;
}

}  // namespace tsa
