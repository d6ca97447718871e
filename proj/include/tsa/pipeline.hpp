#pragma once

#include <filesystem>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "tsa/config.hpp"
#include "tsa/dataset.hpp"
#include "tsa/eval.hpp"
#include "tsa/scenario.hpp"
#include "tsa/transient.hpp"

namespace tsa {

enum class Stage { Sensitivity, GenData, Label, Bundle, Grid, Report };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::Sensitivity: return "sensitivity";
    case Stage::GenData: return "gen-data";
    case Stage::Label: return "label";
    case Stage::Bundle: return "bundle";
    case Stage::Grid: return "grid";
    case Stage::Report: return "report";
  }
  return "?";
}

inline std::optional<Stage> stage_from_string(const std::string& s) {
  for (Stage st : {Stage::Sensitivity, Stage::GenData, Stage::Label, Stage::Bundle, Stage::Grid, Stage::Report})
    if (s == to_string(st)) return st;
  return std::nullopt;
}

class StageError : public std::runtime_error {
 public:
  StageError(Stage stage, const std::string& detail)
      : std::runtime_error(std::string("stage ") + to_string(stage) + " failed: " + detail), stage_(stage) {}
  Stage stage() const { return stage_; }

 private:
  Stage stage_;
};

struct ResolvedContingency {
  ContingencyConfig cfg;
  std::string name;
  ContingencySpec spec;                 // against the base case
  std::vector<int> faa_machine_idx;     // generator indices
  std::vector<int> faa_machine_buses;
  std::vector<int> faa_load_buses;      // filled after sensitivity when auto
};

// Everything the stages share: parsed case, resolved contingencies, hashes.
struct PipelineContext {
  ExperimentConfig cfg;
  GridCase base_case;
  FeatureSchema schema;
  std::uint64_t case_checksum = 0;
  std::uint64_t hash = 0;
  std::vector<ResolvedContingency> contingencies;

  std::string out() const { return cfg.out_dir; }
  std::string path(const std::string& rel) const { return cfg.out_dir + "/" + rel; }
};

namespace pipe {

inline PipelineContext make_context(const ExperimentConfig& cfg) {
  PipelineContext ctx;
  ctx.cfg = cfg;
  ctx.base_case = parse_case(cfg.case_path);
  validate_config(cfg, ctx.base_case);
  ctx.schema = FeatureSchema::for_case(ctx.base_case);
  ctx.case_checksum = fnv1a64(read_file(cfg.case_path));
  ctx.hash = config_hash(cfg, ctx.case_checksum);
  for (const auto& c : cfg.contingencies) {
    ResolvedContingency rc;
    rc.cfg = c;
    rc.name = c.name();
    rc.spec = make_contingency(ctx.base_case, c.bus_a, c.bus_b, c.fault_bus, c.t_fault, c.t_clear);
    if (c.faa_machines_auto) {
      const FaaArea area = faa_area_for(ctx.base_case, rc.spec.fault_bus);
      rc.faa_machine_idx = area.machine_cols;
      rc.faa_machine_buses = area.machine_buses;
    } else {
      for (int b : c.faa_machine_buses)
        for (int g : ctx.base_case.generators_at(b)) rc.faa_machine_idx.push_back(g);
      rc.faa_machine_buses = c.faa_machine_buses;
    }
    if (rc.faa_machine_idx.empty())
      detail::config_fail("contingency " + rc.name + " has no machines in its fault area");
    rc.spec.faa_machines = rc.faa_machine_idx;
    if (!c.faa_loads_auto) {
      rc.faa_load_buses = c.faa_load_buses;
      rc.spec.faa_load_buses = c.faa_load_buses;
    }
    ctx.contingencies.push_back(std::move(rc));
  }
  return ctx;
}

inline bool stage_done(const PipelineContext& ctx, Stage s) {
  const std::string marker = ctx.path(std::string(".stage_") + to_string(s) + ".done");
  if (!std::filesystem::exists(marker)) return false;
  return trim(read_file(marker)) == std::to_string(ctx.hash);
}

inline void mark_stage(const PipelineContext& ctx, Stage s) {
  write_file(ctx.path(std::string(".stage_") + to_string(s) + ".done"), std::to_string(ctx.hash) + "\n");
}

inline bool needs_sensitivity(const PipelineContext& ctx) {
  for (const auto& c : ctx.contingencies)
    if (c.cfg.faa_loads_auto) return true;
  return false;
}

// --- operating point persistence ---

struct OpsRecord {
  long long scenario_id = 0;
  ScenarioStatus status = ScenarioStatus::Ok;
  double lambda = 0, total_cost = 0, losses_p = 0;
  std::string note;
  std::map<int, double> multipliers;
  Eigen::VectorXd v_mag, v_ang;
  std::vector<double> gen_p, gen_q;
};

inline std::string ops_header(const GridCase& gc) {
  std::string h = "scenario_id,status,lambda,total_cost,losses_p,note";
  for (int b : gc.load_buses()) h += ",mult_" + std::to_string(b);
  for (const auto& b : gc.buses) h += ",vm_" + std::to_string(b.id);
  for (const auto& b : gc.buses) h += ",va_" + std::to_string(b.id);
  for (const auto& g : gc.generators) h += ",genp_" + std::to_string(g.bus);
  for (const auto& g : gc.generators) h += ",genq_" + std::to_string(g.bus);
  return h;
}

inline std::string sanitize_note(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n') c = ';';
  return s;
}

inline void append_ops_row(std::string& out, const GridCase& gc, const OpsRecord& r) {
  out += std::to_string(r.scenario_id);
  out += ',';
  out += to_string(r.status);
  out += ',' + fmt_double(r.lambda) + ',' + fmt_double(r.total_cost) + ',' + fmt_double(r.losses_p);
  out += ',' + sanitize_note(r.note);
  const bool ok = r.status == ScenarioStatus::Ok;
  for (int b : gc.load_buses()) out += ',' + fmt_double(r.multipliers.count(b) ? r.multipliers.at(b) : 1.0);
  const int n = static_cast<int>(gc.buses.size());
  const int ng = static_cast<int>(gc.generators.size());
  for (int i = 0; i < n; ++i) out += ',' + fmt_double(ok ? r.v_mag[i] : 0.0);
  for (int i = 0; i < n; ++i) out += ',' + fmt_double(ok ? r.v_ang[i] : 0.0);
  for (int g = 0; g < ng; ++g) out += ',' + fmt_double(ok ? r.gen_p[g] : 0.0);
  for (int g = 0; g < ng; ++g) out += ',' + fmt_double(ok ? r.gen_q[g] : 0.0);
  out += '\n';
}

inline std::vector<OpsRecord> read_ops(const std::string& path, const GridCase& gc) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::SchemaError, path + " is empty");
  if (trim(line) != ops_header(gc)) fail(ErrorKind::SchemaError, path + " header does not match the case");
  const auto loads = gc.load_buses();
  const int n = static_cast<int>(gc.buses.size());
  const int ng = static_cast<int>(gc.generators.size());
  std::vector<OpsRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (static_cast<int>(f.size()) != 6 + static_cast<int>(loads.size()) + 2 * n + 2 * ng)
      fail(ErrorKind::SchemaError, "truncated ops row at " + ctx);
    OpsRecord r;
    std::size_t k = 0;
    r.scenario_id = parse_int(f[k++], ctx);
    const std::string st = f[k++];
    if (st == "ok") r.status = ScenarioStatus::Ok;
    else if (st == "dispatch_infeasible") r.status = ScenarioStatus::DispatchInfeasible;
    else if (st == "powerflow_diverged") r.status = ScenarioStatus::PowerFlowDiverged;
    else if (st == "slack_limit") r.status = ScenarioStatus::SlackLimit;
    else fail(ErrorKind::SchemaError, "bad status '" + st + "' at " + ctx);
    r.lambda = parse_double(f[k++], ctx);
    r.total_cost = parse_double(f[k++], ctx);
    r.losses_p = parse_double(f[k++], ctx);
    r.note = f[k++];
    for (int b : loads) r.multipliers[b] = parse_double(f[k++], ctx);
    r.v_mag.resize(n);
    r.v_ang.resize(n);
    for (int i = 0; i < n; ++i) r.v_mag[i] = parse_double(f[k++], ctx);
    for (int i = 0; i < n; ++i) r.v_ang[i] = parse_double(f[k++], ctx);
    r.gen_p.resize(ng);
    r.gen_q.resize(ng);
    for (int g = 0; g < ng; ++g) r.gen_p[g] = parse_double(f[k++], ctx);
    for (int g = 0; g < ng; ++g) r.gen_q[g] = parse_double(f[k++], ctx);
    out.push_back(std::move(r));
  }
  return out;
}

// Rebuilds an operating point from a persisted record. Branch flows are
// recomputed from the stored voltages, which round-trip bit-exactly.
inline OperatingPoint rebuild_op(const GridCase& base, const OpsRecord& r) {
  if (r.status != ScenarioStatus::Ok) fail(ErrorKind::BadArgument, "cannot rebuild a failed scenario");
  OperatingPoint op;
  op.scaled_case = scale_loads(base, r.multipliers);
  op.scenario_id = r.scenario_id;
  op.load_scale = r.multipliers;
  op.dispatch.lambda = r.lambda;
  op.dispatch.total_cost = r.total_cost;
  op.dispatch.p_set = r.gen_p;  // solved outputs; the slack already absorbed losses
  PowerFlowSolution& sol = op.solution;
  sol.converged = true;
  sol.v_mag = r.v_mag;
  sol.v_ang = r.v_ang;
  sol.gen_p = r.gen_p;
  sol.gen_q = r.gen_q;
  sol.losses_p = r.losses_p;
  const int nb = static_cast<int>(base.branches.size());
  sol.flow_p_from.resize(nb);
  sol.flow_q_from.resize(nb);
  sol.flow_p_to.resize(nb);
  sol.flow_q_to.resize(nb);
  for (int i = 0; i < nb; ++i) {
    const BranchFlow bf = branch_flow(op.scaled_case, sol.v_mag, sol.v_ang, i);
    sol.flow_p_from[i] = bf.p_from;
    sol.flow_q_from[i] = bf.q_from;
    sol.flow_p_to[i] = bf.p_to;
    sol.flow_q_to[i] = bf.q_to;
  }
  return op;
}

inline std::vector<OpsRecord> solve_scenario_block(const PipelineContext& ctx,
                                                   const std::vector<std::map<int, double>>& scenarios) {
  std::vector<OpsRecord> records(scenarios.size());
  parallel_for(scenarios.size(), ctx.cfg.workers, [&](std::size_t i) {
    const ScenarioOutcome outcome = solve_operating_point(ctx.base_case, scenarios[i], static_cast<long long>(i + 1));
    OpsRecord& r = records[i];
    r.scenario_id = static_cast<long long>(i + 1);
    r.status = outcome.status;
    r.note = outcome.note;
    r.multipliers = scenarios[i];
    if (outcome.ok()) {
      const OperatingPoint& op = *outcome.op;
      r.lambda = op.dispatch.lambda;
      r.total_cost = op.dispatch.total_cost;
      r.losses_p = op.solution.losses_p;
      r.v_mag = op.solution.v_mag;
      r.v_ang = op.solution.v_ang;
      r.gen_p = op.solution.gen_p;
      r.gen_q = op.solution.gen_q;
    }
  });
  return records;
}

inline void write_ops(const PipelineContext& ctx, const std::string& rel, const std::vector<OpsRecord>& records) {
  std::string out = ops_header(ctx.base_case) + "\n";
  for (const auto& r : records) append_ops_row(out, ctx.base_case, r);
  write_file(ctx.path(rel), out);
}

// --- stage: sensitivity ---

inline void run_sensitivity_stage(PipelineContext& ctx) {
  namespace fs = std::filesystem;
  fs::create_directories(ctx.path("sensitivity"));

  ScenarioSpec spec;
  spec.varying_buses = ctx.base_case.load_buses();
  spec.lo = ctx.cfg.same_lo;
  spec.hi = ctx.cfg.same_hi;
  spec.count = static_cast<int>(ctx.cfg.count_sensitivity);
  spec.skip = ctx.cfg.skip_for("sensitivity");
  const auto scenarios = generate_load_scenarios(spec, ctx.base_case);
  const auto records = solve_scenario_block(ctx, scenarios);

  std::vector<OperatingPoint> ops;
  for (const auto& r : records)
    if (r.status == ScenarioStatus::Ok) ops.push_back(rebuild_op(ctx.base_case, r));
  if (ops.size() < 3) throw StageError(Stage::Sensitivity, "fewer than 3 feasible sensitivity scenarios");
  const SensitivityReport rep = compute_sensitivity(ops);

  std::string gen_csv = "load_bus";
  for (int b : rep.gen_buses) gen_csv += ",gen_" + std::to_string(b);
  gen_csv += '\n';
  for (std::size_t l = 0; l < rep.load_buses.size(); ++l) {
    gen_csv += std::to_string(rep.load_buses[l]);
    for (int g = 0; g < rep.corr_gen.cols(); ++g) gen_csv += ',' + fmt_double(rep.corr_gen(l, g));
    gen_csv += '\n';
  }
  write_file(ctx.path("sensitivity/corr_gen.csv"), gen_csv);

  std::string flow_csv = "load_bus";
  for (const auto& [f, t] : rep.branch_ends) flow_csv += ",flow_" + std::to_string(f) + "_" + std::to_string(t);
  flow_csv += '\n';
  for (std::size_t l = 0; l < rep.load_buses.size(); ++l) {
    flow_csv += std::to_string(rep.load_buses[l]);
    for (int b = 0; b < rep.corr_flow.cols(); ++b) flow_csv += ',' + fmt_double(rep.corr_flow(l, b));
    flow_csv += '\n';
  }
  write_file(ctx.path("sensitivity/corr_flow.csv"), flow_csv);
  write_file(ctx.path("sensitivity/sample_count"), std::to_string(rep.sample_count) + "\n");

  for (auto& rc : ctx.contingencies) {
    const FaaArea area = faa_area_for(ctx.base_case, rc.spec.fault_bus);
    const FaaSelection sel = select_faa_loads(rep, ctx.cfg.faa_threshold, area.machine_cols, area.branch_cols);
    std::string csv = "bus\n";
    for (int b : sel.buses) csv += std::to_string(b) + "\n";
    write_file(ctx.path("sensitivity/selection_" + rc.name + ".csv"), csv);
    if (rc.cfg.faa_loads_auto) {
      if (sel.empty_warning)
        throw StageError(Stage::Sensitivity, "empty FAA load selection for " + rc.name +
                                                 " at threshold " + fmt_double(ctx.cfg.faa_threshold));
      rc.faa_load_buses = sel.buses;
      rc.spec.faa_load_buses = sel.buses;
    }
  }
}

// Auto FAA loads must be available to later stages even when the sensitivity
// stage is checkpoint-skipped; they are reloaded from its artifacts.
inline void reload_faa_selection(PipelineContext& ctx) {
  for (auto& rc : ctx.contingencies) {
    if (!rc.cfg.faa_loads_auto) continue;
    const std::string p = ctx.path("sensitivity/selection_" + rc.name + ".csv");
    std::vector<int> buses;
    const auto lines = split(read_file(p), '\n');
    for (std::size_t i = 1; i < lines.size(); ++i)
      if (!trim(lines[i]).empty()) buses.push_back(static_cast<int>(parse_int(trim(lines[i]), p)));
    if (buses.empty()) throw StageError(Stage::Sensitivity, "empty FAA selection in " + p);
    rc.faa_load_buses = buses;
    rc.spec.faa_load_buses = buses;
  }
}

// --- stage: gen-data ---

inline void run_gendata_stage(PipelineContext& ctx) {
  namespace fs = std::filesystem;
  fs::create_directories(ctx.path("ops"));

  std::string summary = "set,count,ok,dispatch_infeasible,powerflow_diverged,slack_limit\n";
  auto run_set = [&](const std::string& set_name, const ScenarioSpec& spec, const std::string& file) {
    const auto scenarios = generate_load_scenarios(spec, ctx.base_case);
    const auto records = solve_scenario_block(ctx, scenarios);
    write_ops(ctx, "ops/" + file, records);
    long long ok = 0, di = 0, pf = 0, sl = 0;
    for (const auto& r : records) {
      switch (r.status) {
        case ScenarioStatus::Ok: ++ok; break;
        case ScenarioStatus::DispatchInfeasible: ++di; break;
        case ScenarioStatus::PowerFlowDiverged: ++pf; break;
        case ScenarioStatus::SlackLimit: ++sl; break;
      }
    }
    summary += set_name + ',' + std::to_string(records.size()) + ',' + std::to_string(ok) + ',' +
               std::to_string(di) + ',' + std::to_string(pf) + ',' + std::to_string(sl) + '\n';
  };

  const auto all_loads = ctx.base_case.load_buses();
  ScenarioSpec same{all_loads, ctx.cfg.same_lo, ctx.cfg.same_hi, static_cast<int>(ctx.cfg.count_same),
                    ctx.cfg.skip_for("same")};
  run_set("same", same, "same.csv");
  ScenarioSpec test{all_loads, ctx.cfg.same_lo, ctx.cfg.same_hi, static_cast<int>(ctx.cfg.count_test),
                    ctx.cfg.skip_for("test")};
  run_set("test", test, "test.csv");
  ScenarioSpec baseline{all_loads, ctx.cfg.same_lo, ctx.cfg.same_hi, static_cast<int>(ctx.cfg.count_baseline),
                        ctx.cfg.skip_for("baseline")};
  run_set("baseline", baseline, "baseline.csv");

  for (const auto& rc : ctx.contingencies) {
    if (rc.faa_load_buses.empty())
      throw StageError(Stage::GenData, "contingency " + rc.name + " has no FAA loads resolved");
    ScenarioSpec aux{rc.faa_load_buses, ctx.cfg.aux_lo, ctx.cfg.aux_hi, static_cast<int>(ctx.cfg.count_aux),
                     ctx.cfg.skip_for("aux")};
    run_set("aux_" + rc.name, aux, "aux_" + rc.name + ".csv");
  }
  write_file(ctx.path("ops/summary.csv"), summary);
}

// --- stage: label ---

struct LabelRecord {
  long long scenario_id = 0;
  ScenarioStatus status = ScenarioStatus::Ok;
  int label = -1;  // -1 for unlabelled (failed scenario)
  double max_coi_dev_deg = 0;
  double first_violation_t = -1;
  bool faa_violation = false, nonfaa_violation = false;
  std::string diagnostic;
};

inline std::string labels_header() {
  return "scenario_id,status,label,max_coi_dev_deg,first_violation_t,faa_violation,nonfaa_violation,diagnostic";
}

inline void append_label_row(std::string& out, const LabelRecord& r) {
  out += std::to_string(r.scenario_id);
  out += ',';
  out += to_string(r.status);
  out += ',';
  out += r.label < 0 ? "" : (r.label ? "stable" : "unstable");
  out += ',' + fmt_double(r.max_coi_dev_deg) + ',' + fmt_double(r.first_violation_t);
  out += r.faa_violation ? ",1" : ",0";
  out += r.nonfaa_violation ? ",1" : ",0";
  out += ',' + sanitize_note(r.diagnostic) + '\n';
}

inline std::vector<LabelRecord> read_labels(const std::string& path) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line) || trim(line) != labels_header())
    fail(ErrorKind::SchemaError, path + " label header mismatch");
  std::vector<LabelRecord> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (f.size() != 8) fail(ErrorKind::SchemaError, "bad label row at " + ctx);
    LabelRecord r;
    r.scenario_id = parse_int(f[0], ctx);
    r.status = f[1] == "ok"                    ? ScenarioStatus::Ok
               : f[1] == "dispatch_infeasible" ? ScenarioStatus::DispatchInfeasible
               : f[1] == "powerflow_diverged"  ? ScenarioStatus::PowerFlowDiverged
                                               : ScenarioStatus::SlackLimit;
    r.label = f[2] == "stable" ? 1 : f[2] == "unstable" ? 0 : -1;
    r.max_coi_dev_deg = parse_double(f[3], ctx);
    r.first_violation_t = parse_double(f[4], ctx);
    r.faa_violation = f[5] == "1";
    r.nonfaa_violation = f[6] == "1";
    r.diagnostic = f[7];
    out.push_back(std::move(r));
  }
  return out;
}

// per-machine max |delta_i - delta_COI| over the trajectory, degrees
inline Eigen::VectorXd per_machine_max_dev(const Eigen::MatrixXd& delta, const std::vector<double>& inertia_h) {
  const int m = static_cast<int>(delta.cols());
  double h_total = 0;
  for (double h : inertia_h) h_total += h;
  Eigen::VectorXd best = Eigen::VectorXd::Zero(m);
  for (int k = 0; k < delta.rows(); ++k) {
    double coi = 0;
    for (int i = 0; i < m; ++i) coi += inertia_h[i] * delta(k, i);
    coi /= h_total;
    for (int i = 0; i < m; ++i) best[i] = std::max(best[i], std::abs(delta(k, i) - coi));
  }
  return best * (180.0 / std::numbers::pi);
}

inline void run_label_stage(PipelineContext& ctx) {
  namespace fs = std::filesystem;
  for (const auto& rc : ctx.contingencies) {
    fs::create_directories(ctx.path("labels/" + rc.name));
    std::set<long long> dump_same, dump_aux, dump_test, dump_baseline;
    for (const auto& [set, id] : ctx.cfg.dump_scenarios) {
      if (set == "same") dump_same.insert(id);
      else if (set == "aux") dump_aux.insert(id);
      else if (set == "test") dump_test.insert(id);
      else if (set == "baseline") dump_baseline.insert(id);
    }

    auto label_set = [&](const std::string& ops_file, const std::string& label_file, bool aux_subset,
                         const std::set<long long>& dumps) {
      const auto records = read_ops(ctx.path("ops/" + ops_file), ctx.base_case);
      std::vector<LabelRecord> labels(records.size());
      std::vector<std::string> dumps_out(records.size());
      const std::vector<int> subset = aux_subset ? rc.faa_machine_idx : std::vector<int>{};
      const std::set<int> faa_set(rc.faa_machine_idx.begin(), rc.faa_machine_idx.end());

      parallel_for(records.size(), ctx.cfg.workers, [&](std::size_t i) {
        LabelRecord& lr = labels[i];
        lr.scenario_id = records[i].scenario_id;
        lr.status = records[i].status;
        if (records[i].status != ScenarioStatus::Ok) return;
        const OperatingPoint op = rebuild_op(ctx.base_case, records[i]);
        const DynamicModel model = init_dynamics(op, rc.spec);
        const SimulationResult sim =
            simulate_contingency(model, rc.spec, ctx.cfg.t_end, ctx.cfg.dt, subset, ctx.cfg.threshold_deg);
        lr.label = sim.label == StabilityLabel::Stable ? 1 : 0;
        lr.max_coi_dev_deg = sim.max_coi_dev_deg;
        lr.first_violation_t = sim.first_violation_t.value_or(-1.0);
        lr.diagnostic = sim.diagnostic;
        const Eigen::VectorXd dev = per_machine_max_dev(sim.delta, model.inertia_h);
        for (int g = 0; g < dev.size(); ++g) {
          if (dev[g] < ctx.cfg.threshold_deg) continue;
          (faa_set.count(g) ? lr.faa_violation : lr.nonfaa_violation) = true;
        }
        if (dumps.count(lr.scenario_id)) {
          std::string traj = "t";
          for (int b : model.machine_bus) traj += ",delta_" + std::to_string(b);
          traj += '\n';
          for (std::size_t k = 0; k < sim.t.size(); ++k) {
            traj += fmt_double(sim.t[k]);
            for (int g = 0; g < sim.delta.cols(); ++g)
              traj += ',' + fmt_double(sim.delta(k, g) * 180.0 / std::numbers::pi);
            traj += '\n';
          }
          dumps_out[i] = std::move(traj);
        }
      });

      std::string out = labels_header() + "\n";
      for (const auto& lr : labels) append_label_row(out, lr);
      write_file(ctx.path("labels/" + rc.name + "/" + label_file), out);
      for (std::size_t i = 0; i < records.size(); ++i)
        if (!dumps_out[i].empty())
          write_file(ctx.path("labels/" + rc.name + "/traj_" + label_file.substr(0, label_file.size() - 4) + "_" +
                              std::to_string(records[i].scenario_id) + ".csv"),
                     dumps_out[i]);
    };

    label_set("same.csv", "same.csv", false, dump_same);
    label_set("aux_" + rc.name + ".csv", "aux.csv", true, dump_aux);
    label_set("test.csv", "test.csv", false, dump_test);
    label_set("baseline.csv", "baseline.csv", false, dump_baseline);
  }
}

// --- stage: bundle ---

inline std::vector<LabeledSample> join_samples(const PipelineContext& ctx, const std::string& ops_file,
                                               const std::string& labels_file, Origin origin) {
  const auto records = read_ops(ctx.path("ops/" + ops_file), ctx.base_case);
  const auto labels = read_labels(ctx.path(labels_file));
  if (records.size() != labels.size())
    fail(ErrorKind::SchemaError, ops_file + " and " + labels_file + " disagree on row count");
  std::vector<LabeledSample> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].status != ScenarioStatus::Ok || labels[i].label < 0) continue;
    if (records[i].scenario_id != labels[i].scenario_id)
      fail(ErrorKind::SchemaError, "scenario id mismatch between ops and labels");
    LabeledSample s;
    s.features = extract_features(rebuild_op(ctx.base_case, records[i]), ctx.schema);
    s.label = labels[i].label;
    s.origin = origin;
    s.scenario_id = records[i].scenario_id;
    out.push_back(std::move(s));
  }
  return out;
}

inline std::uint64_t split_seed_for(const PipelineContext& ctx, const std::string& name) {
  return fnv1a64(name + "/split") ^ ctx.cfg.seed;
}

inline void run_bundle_stage(PipelineContext& ctx) {
  for (const auto& rc : ctx.contingencies) {
    const std::string lbl = "labels/" + rc.name + "/";
    auto same = join_samples(ctx, "same.csv", lbl + "same.csv", Origin::SameDist);
    auto aux = join_samples(ctx, "aux_" + rc.name + ".csv", lbl + "aux.csv", Origin::Auxiliary);
    auto test = join_samples(ctx, "test.csv", lbl + "test.csv", Origin::Test);
    auto baseline = join_samples(ctx, "baseline.csv", lbl + "baseline.csv", Origin::TrainBaseline);
    try {
      DatasetBundle bundle = build_bundle(std::move(same), std::move(aux), std::move(test), std::move(baseline),
                                          split_seed_for(ctx, rc.name), ctx.schema, ctx.case_checksum);
      persist_bundle(bundle, ctx.path("dataset/" + rc.name));
    } catch (const Error& e) {
      throw StageError(Stage::Bundle, rc.name + ": " + e.what());
    }
  }
}

// --- stage: grid ---

inline std::string metrics_csv_fields(const Evaluation& ev) {
  const auto& m = ev.metrics;
  const auto& c = ev.confusion;
  return fmt_double(m.accuracy) + ',' + fmt_double(m.fp_rate_pct) + ',' + fmt_double(m.recall) + ',' +
         fmt_double(m.precision) + ',' + fmt_double(m.specificity) + ',' + std::to_string(c.tp) + ',' +
         std::to_string(c.fp) + ',' + std::to_string(c.tn) + ',' + std::to_string(c.fn) + ',' +
         (m.degenerate ? "1" : "0");
}

inline std::uint64_t train_seed_for(const PipelineContext& ctx, const std::string& name, TrainingArm arm) {
  return fnv1a64(name + "/train/" + to_string(arm)) ^ ctx.cfg.seed;
}

inline void run_grid_stage(PipelineContext& ctx) {
  namespace fs = std::filesystem;
  for (const auto& rc : ctx.contingencies) {
    const DatasetBundle bundle = load_bundle(ctx.path("dataset/" + rc.name), ctx.schema);
    fs::create_directories(ctx.path("report/" + rc.name));
    fs::create_directories(ctx.path("models/" + rc.name));
    const LearnerConfig learner{ctx.cfg.learner_rounds, ctx.cfg.learner_depth};

    for (TrainingArm arm : {TrainingArm::Augmented, TrainingArm::Baseline}) {
      TradeoffGrid grid;
      try {
        grid = run_grid_search(bundle, ctx.cfg.grid_c_fn, ctx.cfg.grid_c_fp, learner,
                               train_seed_for(ctx, rc.name, arm), arm, ctx.cfg.workers);
      } catch (const Error& e) {
        throw StageError(Stage::Grid, rc.name + "/" + to_string(arm) + ": " + e.what());
      }
      std::size_t chosen_idx;
      try {
        chosen_idx = select_compromise(grid, ctx.cfg.slack_pp);
      } catch (const Error& e) {
        throw StageError(Stage::Grid, rc.name + "/" + to_string(arm) + ": " + e.what());
      }
      GridCell& chosen = grid.cells[chosen_idx];
      chosen.test = evaluate(*chosen.model, bundle.test);

      std::string gcsv =
          "c_fn,c_fp,trained,val_accuracy,val_fp_rate_pct,val_recall,val_precision,val_specificity,val_tp,val_fp,"
          "val_tn,val_fn,val_degenerate,chosen,failure\n";
      for (std::size_t k = 0; k < grid.cells.size(); ++k) {
        const GridCell& c = grid.cells[k];
        gcsv += fmt_double(c.c_fn) + ',' + fmt_double(c.c_fp) + ',';
        gcsv += c.trained ? "1," : "0,";
        if (c.trained) {
          const auto& m = c.validation->metrics;
          const auto& cm = c.validation->confusion;
          gcsv += fmt_double(m.accuracy) + ',' + fmt_double(m.fp_rate_pct) + ',' + fmt_double(m.recall) + ',' +
                  fmt_double(m.precision) + ',' + fmt_double(m.specificity) + ',' + std::to_string(cm.tp) + ',' +
                  std::to_string(cm.fp) + ',' + std::to_string(cm.tn) + ',' + std::to_string(cm.fn) + ',' +
                  (m.degenerate ? "1" : "0");
        } else {
          gcsv += ",,,,,,,,,";
        }
        gcsv += k == chosen_idx ? ",1," : ",0,";
        gcsv += sanitize_note(c.failure) + '\n';
      }
      write_file(ctx.path("report/" + rc.name + "/grid_" + to_string(arm) + ".csv"), gcsv);

      std::string ch = "arm,c_fn,c_fp,partition,accuracy,fp_rate_pct,recall,precision,specificity,tp,fp,tn,fn,degenerate\n";
      ch += std::string(to_string(arm)) + ',' + fmt_double(chosen.c_fn) + ',' + fmt_double(chosen.c_fp) +
            ",validation," + metrics_csv_fields(*chosen.validation) + '\n';
      ch += std::string(to_string(arm)) + ',' + fmt_double(chosen.c_fn) + ',' + fmt_double(chosen.c_fp) + ",test," +
            metrics_csv_fields(*chosen.test) + '\n';
      write_file(ctx.path("report/" + rc.name + "/chosen_" + to_string(arm) + ".csv"), ch);

      std::string pred = "scenario_id,truth,prediction\n";
      for (std::size_t i = 0; i < bundle.test.size(); ++i) {
        pred += std::to_string(bundle.test[i].scenario_id);
        pred += bundle.test[i].label ? ",stable" : ",unstable";
        pred += chosen.test->predictions[i] ? ",stable\n" : ",unstable\n";
      }
      write_file(ctx.path("report/" + rc.name + "/predictions_" + to_string(arm) + ".csv"), pred);

      write_file(ctx.path("models/" + rc.name + "/" + to_string(arm) + ".model"), serialize_model(*chosen.model));
    }
  }
}

// --- stage: report ---

inline void run_report_stage(PipelineContext& ctx) {
  namespace fs = std::filesystem;
  for (const auto& rc : ctx.contingencies) {
    const std::string rep = "report/" + rc.name + "/";
    fs::create_directories(ctx.path(rep));

    // comparison table in the usual FP / Rec / Pre / Spe / Acc layout
    auto chosen_row = [&](TrainingArm arm) {
      const auto lines = split(read_file(ctx.path(rep + "chosen_" + to_string(arm) + ".csv")), '\n');
      for (const auto& l : lines) {
        const auto f = split(l, ',');
        if (f.size() >= 14 && f[3] == "test") return f;
      }
      fail(ErrorKind::SchemaError, "no test row in chosen_" + std::string(to_string(arm)) + ".csv");
    };
    const auto aug = chosen_row(TrainingArm::Augmented);
    const auto base = chosen_row(TrainingArm::Baseline);
    std::string cmp;
    cmp += "Contingency on line " + std::to_string(rc.cfg.bus_a) + "-" + std::to_string(rc.cfg.bus_b) + "\n";
    cmp += "Model       DataSet    FP       Rec.      Pre.      Spe.      Acc.      (c_fn, c_fp)\n";
    auto add_row = [&](const char* model, const char* dataset, const std::vector<std::string>& f) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "%-11s %-10s %6.2f%%  %7.2f%%  %7.2f%%  %7.2f%%  %7.2f%%  (%s, %s)\n", model,
                    dataset, parse_double(f[5], "row"), parse_double(f[6], "row") * 100.0,
                    parse_double(f[7], "row") * 100.0, parse_double(f[8], "row") * 100.0,
                    parse_double(f[4], "row") * 100.0, f[1].c_str(), f[2].c_str());
      cmp += buf;
    };
    add_row("TrAdaBoost", "Augmented", aug);
    add_row("AdaBoost", "Training", base);
    write_file(ctx.path(rep + "comparison.txt"), cmp);

    // FAA diagnostic: scenarios unstable only outside the fault area
    std::string diag = "set,labelled,unstable,outside_faa_only\n";
    long long outside_total = 0;
    for (const std::string set : {"same", "aux", "test", "baseline"}) {
      const auto labels = read_labels(ctx.path("labels/" + rc.name + "/" + set + ".csv"));
      long long labelled = 0, unstable = 0, outside = 0;
      for (const auto& l : labels) {
        if (l.label < 0) continue;
        ++labelled;
        if (l.nonfaa_violation && !l.faa_violation) ++outside;
        if (l.label == 0) ++unstable;
      }
      outside_total += outside;
      diag += set + ',' + std::to_string(labelled) + ',' + std::to_string(unstable) + ',' + std::to_string(outside) +
              '\n';
    }
    diag += "total,,," + std::to_string(outside_total) + '\n';
    write_file(ctx.path(rep + "faa_diagnostic.csv"), diag);

    // class balance and feasibility accounting per set
    std::string bal = "set,count,ok,stable,unstable,dispatch_infeasible,powerflow_diverged,slack_limit\n";
    for (const std::string set : {"same", "aux", "test", "baseline"}) {
      const auto labels = read_labels(ctx.path("labels/" + rc.name + "/" + set + ".csv"));
      long long ok = 0, stable = 0, unstable = 0, di = 0, pf = 0, sl = 0;
      for (const auto& l : labels) {
        switch (l.status) {
          case ScenarioStatus::Ok: ++ok; break;
          case ScenarioStatus::DispatchInfeasible: ++di; break;
          case ScenarioStatus::PowerFlowDiverged: ++pf; break;
          case ScenarioStatus::SlackLimit: ++sl; break;
        }
        if (l.label == 1) ++stable;
        if (l.label == 0) ++unstable;
      }
      bal += set + ',' + std::to_string(labels.size()) + ',' + std::to_string(ok) + ',' + std::to_string(stable) +
             ',' + std::to_string(unstable) + ',' + std::to_string(di) + ',' + std::to_string(pf) + ',' +
             std::to_string(sl) + '\n';
    }
    write_file(ctx.path(rep + "class_balance.csv"), bal);

    // resolved FAA sets for the record
    std::string faa = "kind,values\n";
    faa += "machine_buses,";
    for (int b : rc.faa_machine_buses) faa += std::to_string(b) + ";";
    faa += "\nload_buses,";
    for (int b : rc.faa_load_buses) faa += std::to_string(b) + ";";
    faa += "\n";
    write_file(ctx.path(rep + "faa.csv"), faa);
  }

  // top-level manifest: everything needed to reproduce
  std::string mf;
  mf += "tool_version = " + std::string(kToolVersion) + "\n";
  mf += "case_checksum = " + std::to_string(ctx.case_checksum) + "\n";
  mf += "config_hash = " + std::to_string(ctx.hash) + "\n";
  mf += "seed = " + std::to_string(ctx.cfg.seed) + "\n";
  for (const std::string set : {"same", "aux", "test", "baseline", "sensitivity"})
    mf += "skip_" + set + " = " + std::to_string(ctx.cfg.skip_for(set)) + "\n";
  for (const auto& rc : ctx.contingencies) {
    mf += "split_seed_" + rc.name + " = " + std::to_string(split_seed_for(ctx, rc.name)) + "\n";
    mf += "train_seed_" + rc.name + "_augmented = " +
          std::to_string(train_seed_for(ctx, rc.name, TrainingArm::Augmented)) + "\n";
    mf += "train_seed_" + rc.name + "_baseline = " +
          std::to_string(train_seed_for(ctx, rc.name, TrainingArm::Baseline)) + "\n";
  }
  mf += "--- resolved configuration ---\n";
  mf += canonical_config(ctx.cfg);
  write_file(ctx.path("manifest.txt"), mf);
}

}  // namespace pipe

// Runs the staged pipeline up to and including `until`. Completed stages
// (matching config hash) are skipped, so interrupted runs resume and
// unchanged reruns do no recomputation.
inline void run_pipeline(const ExperimentConfig& cfg, Stage until = Stage::Report, bool verbose = true) {
  PipelineContext ctx = pipe::make_context(cfg);
  std::filesystem::create_directories(ctx.out());

  const std::vector<Stage> order{Stage::Sensitivity, Stage::GenData, Stage::Label,
                                 Stage::Bundle,      Stage::Grid,    Stage::Report};
  for (Stage s : order) {
    const bool sensitivity_required = pipe::needs_sensitivity(ctx);
    if (s == Stage::Sensitivity && !sensitivity_required && until != Stage::Sensitivity) {
      continue;  // explicit FAA loads everywhere: nothing to analyse
    }
    if (pipe::stage_done(ctx, s)) {
      if (s == Stage::Sensitivity && sensitivity_required) pipe::reload_faa_selection(ctx);
      if (verbose) std::fprintf(stderr, "[tsa] stage %s: up to date\n", to_string(s));
    } else {
      if (verbose) std::fprintf(stderr, "[tsa] stage %s: running\n", to_string(s));
      try {
        switch (s) {
          case Stage::Sensitivity: pipe::run_sensitivity_stage(ctx); break;
          case Stage::GenData: pipe::run_gendata_stage(ctx); break;
          case Stage::Label: pipe::run_label_stage(ctx); break;
          case Stage::Bundle: pipe::run_bundle_stage(ctx); break;
          case Stage::Grid: pipe::run_grid_stage(ctx); break;
          case Stage::Report: pipe::run_report_stage(ctx); break;
        }
      } catch (const StageError&) {
        throw;
      } catch (const std::exception& e) {
        throw StageError(s, e.what());
      }
      pipe::mark_stage(ctx, s);
    }
    if (s == until) break;
  }
}

}  // namespace tsa
