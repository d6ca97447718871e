#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "tsa/dispatch.hpp"
#include "tsa/transient.hpp"

namespace tsa {

enum class Origin { SameDist, Auxiliary, Test, TrainBaseline };

inline const char* to_string(Origin o) {
  switch (o) {
    case Origin::SameDist: return "same_dist";
    case Origin::Auxiliary: return "auxiliary";
    case Origin::Test: return "test";
    case Origin::TrainBaseline: return "train_baseline";
  }
  return "?";
}

inline Origin origin_from_string(const std::string& s) {
  if (s == "same_dist") return Origin::SameDist;
  if (s == "auxiliary") return Origin::Auxiliary;
  if (s == "test") return Origin::Test;
  if (s == "train_baseline") return Origin::TrainBaseline;
  fail(ErrorKind::SchemaError, "unknown origin '" + s + "'");
}

// Fixed feature layout for one case: generator P then Q (MW/MVAr), bus
// voltage magnitude (pu) then angle (rad), branch from-end P flow (MW),
// scaled load P (MW). Each block ordered by ascending id.
struct FeatureSchema {
  std::vector<std::string> names;
  int n_gen = 0, n_bus = 0, n_branch = 0, n_load = 0;
  std::vector<int> load_bus_ids;

  static FeatureSchema for_case(const GridCase& gc) {
    FeatureSchema s;
    s.n_gen = static_cast<int>(gc.generators.size());
    s.n_bus = static_cast<int>(gc.buses.size());
    s.n_branch = static_cast<int>(gc.branches.size());
    s.load_bus_ids = gc.load_buses();
    s.n_load = static_cast<int>(s.load_bus_ids.size());
    for (const auto& g : gc.generators) s.names.push_back("gen_p_" + std::to_string(g.bus));
    for (const auto& g : gc.generators) s.names.push_back("gen_q_" + std::to_string(g.bus));
    for (const auto& b : gc.buses) s.names.push_back("vm_" + std::to_string(b.id));
    for (const auto& b : gc.buses) s.names.push_back("va_" + std::to_string(b.id));
    for (std::size_t i = 0; i < gc.branches.size(); ++i) {
      const auto& br = gc.branches[i];
      s.names.push_back("pflow_" + std::to_string(br.from_bus) + "_" + std::to_string(br.to_bus) + "_" +
                        std::to_string(i));
    }
    for (int b : s.load_bus_ids) s.names.push_back("load_p_" + std::to_string(b));
    return s;
  }

  int size() const { return 2 * n_gen + 2 * n_bus + n_branch + n_load; }
};

inline Eigen::VectorXd extract_features(const OperatingPoint& op, const FeatureSchema& schema) {
  if (!op.solution.converged) fail(ErrorKind::NonConvergence, "cannot featurize a diverged operating point");
  const GridCase& gc = op.scaled_case;
  Eigen::VectorXd f(schema.size());
  int k = 0;
  for (int g = 0; g < schema.n_gen; ++g) f[k++] = op.solution.gen_p[g];
  for (int g = 0; g < schema.n_gen; ++g) f[k++] = op.solution.gen_q[g];
  for (int b = 0; b < schema.n_bus; ++b) f[k++] = op.solution.v_mag[b];
  for (int b = 0; b < schema.n_bus; ++b) f[k++] = op.solution.v_ang[b];
  for (int br = 0; br < schema.n_branch; ++br) f[k++] = op.solution.flow_p_from[br];
  for (int lb : schema.load_bus_ids) f[k++] = gc.bus(lb).p_load;
  return f;
}

struct LabeledSample {
  Eigen::VectorXd features;
  int label = 0;  // 1 = stable, 0 = unstable
  Origin origin = Origin::SameDist;
  long long scenario_id = -1;
};

struct Standardization {
  Eigen::VectorXd mean, stdev;
  std::vector<bool> constant;  // zero-variance features pass through unscaled

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd out(x.size());
    for (int i = 0; i < x.size(); ++i) out[i] = constant[i] ? x[i] : (x[i] - mean[i]) / stdev[i];
    return out;
  }

  std::uint64_t checksum() const {
    std::string blob;
    for (int i = 0; i < mean.size(); ++i) {
      blob += fmt_double(mean[i]);
      blob += ',';
      blob += fmt_double(stdev[i]);
      blob += constant[i] ? "c;" : ";";
    }
    return fnv1a64(blob);
  }
};

struct DatasetBundle {
  std::vector<LabeledSample> augmented_train;  // same_dist + auxiliary origins, standardized
  std::vector<LabeledSample> validation;
  std::vector<LabeledSample> test;
  std::vector<LabeledSample> baseline_train;
  Standardization standardization;
  FeatureSchema schema;
  std::uint64_t case_checksum = 0;
  std::uint64_t split_seed = 0;
};

namespace detail {

inline Standardization fit_standardization(const std::vector<LabeledSample>& samples) {
  if (samples.empty()) fail(ErrorKind::EmptySampleSet, "cannot fit standardization on nothing");
  const int dim = static_cast<int>(samples.front().features.size());
  Standardization st;
  st.mean = Eigen::VectorXd::Zero(dim);
  st.stdev = Eigen::VectorXd::Ones(dim);
  st.constant.assign(dim, false);
  for (const auto& s : samples) st.mean += s.features;
  st.mean /= static_cast<double>(samples.size());
  Eigen::VectorXd var = Eigen::VectorXd::Zero(dim);
  for (const auto& s : samples) var += (s.features - st.mean).cwiseAbs2();
  var /= static_cast<double>(samples.size());
  for (int i = 0; i < dim; ++i) {
    if (var[i] < 1e-24) {
      st.constant[i] = true;
    } else {
      st.stdev[i] = std::sqrt(var[i]);
    }
  }
  return st;
}

}  // namespace detail

// Stratified 80/20 split of the same+auxiliary pool into augmented training
// and validation sets; standardization is fitted on the training portion
// only and then applied to every partition.
inline DatasetBundle build_bundle(std::vector<LabeledSample> same, std::vector<LabeledSample> aux,
                                  std::vector<LabeledSample> test, std::vector<LabeledSample> baseline,
                                  std::uint64_t split_seed, const FeatureSchema& schema,
                                  std::uint64_t case_checksum = 0, double validation_fraction = 0.2) {
  if (same.empty()) fail(ErrorKind::EmptySampleSet, "same-distribution set is empty");
  if (test.empty()) fail(ErrorKind::EmptySampleSet, "test set is empty");

  std::vector<LabeledSample> pool;
  pool.reserve(same.size() + aux.size());
  for (auto& s : same) pool.push_back(std::move(s));
  for (auto& s : aux) pool.push_back(std::move(s));
  std::sort(pool.begin(), pool.end(), [](const LabeledSample& a, const LabeledSample& b) {
    return std::tie(a.origin, a.scenario_id) < std::tie(b.origin, b.scenario_id);
  });

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < pool.size(); ++i) by_class[pool[i].label ? 1 : 0].push_back(i);
  for (int c = 0; c < 2; ++c)
    if (by_class[c].empty())
      fail(ErrorKind::EmptySampleSet, std::string("class '") + (c ? "stable" : "unstable") +
                                          "' absent from the training pool; cannot stratify");

  DatasetBundle bundle;
  bundle.schema = schema;
  bundle.case_checksum = case_checksum;
  bundle.split_seed = split_seed;

  std::mt19937_64 rng(split_seed);
  std::vector<char> to_validation(pool.size(), 0);
  for (int c = 0; c < 2; ++c) {
    auto& idx = by_class[c];
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_val = static_cast<std::size_t>(
        std::llround(validation_fraction * static_cast<double>(idx.size())));
    for (std::size_t k = 0; k < n_val && k < idx.size(); ++k) to_validation[idx[k]] = 1;
  }

  for (std::size_t i = 0; i < pool.size(); ++i)
    (to_validation[i] ? bundle.validation : bundle.augmented_train).push_back(std::move(pool[i]));

  bundle.standardization = detail::fit_standardization(bundle.augmented_train);
  auto standardize_all = [&](std::vector<LabeledSample>& v) {
    for (auto& s : v) s.features = bundle.standardization.apply(s.features);
  };
  standardize_all(bundle.augmented_train);
  standardize_all(bundle.validation);
  bundle.test = std::move(test);
  standardize_all(bundle.test);
  bundle.baseline_train = std::move(baseline);
  standardize_all(bundle.baseline_train);
  return bundle;
}

namespace detail {

inline std::string samples_to_csv(const std::vector<LabeledSample>& samples, const FeatureSchema& schema) {
  std::string out = "scenario_id,origin,label";
  for (const auto& n : schema.names) {
    out += ',';
    out += n;
  }
  out += '\n';
  for (const auto& s : samples) {
    if (s.features.size() != schema.size())
      fail(ErrorKind::DimensionMismatch, "sample has " + std::to_string(s.features.size()) + " features, schema " +
                                             std::to_string(schema.size()));
    out += std::to_string(s.scenario_id);
    out += ',';
    out += to_string(s.origin);
    out += ',';
    out += s.label ? "stable" : "unstable";
    for (int i = 0; i < s.features.size(); ++i) {
      out += ',';
      out += fmt_double(s.features[i]);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<LabeledSample> samples_from_csv(const std::string& path, const FeatureSchema& schema) {
  const std::string content = read_file(path);
  std::istringstream in(content);
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::SchemaError, path + " is empty");
  auto header = split(line, ',');
  if (static_cast<int>(header.size()) != 3 + schema.size())
    fail(ErrorKind::DimensionMismatch, path + " has " + std::to_string(header.size() - 3) +
                                           " feature columns, expected " + std::to_string(schema.size()));
  for (int i = 0; i < schema.size(); ++i)
    if (header[3 + i] != schema.names[i])
      fail(ErrorKind::SchemaError, path + " column '" + header[3 + i] + "' does not match schema '" +
                                       schema.names[i] + "'");
  std::vector<LabeledSample> out;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto f = split(line, ',');
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (static_cast<int>(f.size()) != 3 + schema.size()) fail(ErrorKind::SchemaError, "truncated row at " + ctx);
    LabeledSample s;
    s.scenario_id = parse_int(f[0], ctx);
    s.origin = origin_from_string(f[1]);
    if (f[2] == "stable") s.label = 1;
    else if (f[2] == "unstable") s.label = 0;
    else fail(ErrorKind::SchemaError, "bad label '" + f[2] + "' at " + ctx);
    s.features.resize(schema.size());
    for (int i = 0; i < schema.size(); ++i) s.features[i] = parse_double(f[3 + i], ctx);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace detail

// Dataset directory layout: one CSV per partition, the standardization
// statistics, and a manifest with counts, seeds and the case checksum.
inline void persist_bundle(const DatasetBundle& bundle, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_file(dir + "/augmented_train.csv", detail::samples_to_csv(bundle.augmented_train, bundle.schema));
  write_file(dir + "/validation.csv", detail::samples_to_csv(bundle.validation, bundle.schema));
  write_file(dir + "/test.csv", detail::samples_to_csv(bundle.test, bundle.schema));
  write_file(dir + "/baseline_train.csv", detail::samples_to_csv(bundle.baseline_train, bundle.schema));

  std::string st = "feature,mean,stdev,constant\n";
  for (int i = 0; i < bundle.schema.size(); ++i) {
    st += bundle.schema.names[i];
    st += ',';
    st += fmt_double(bundle.standardization.mean[i]);
    st += ',';
    st += fmt_double(bundle.standardization.stdev[i]);
    st += ',';
    st += bundle.standardization.constant[i] ? "1" : "0";
    st += '\n';
  }
  write_file(dir + "/standardization.csv", st);

  std::string mf;
  mf += "format_version = 1\n";
  mf += "tool_version = " + std::string(kToolVersion) + "\n";
  mf += "case_checksum = " + std::to_string(bundle.case_checksum) + "\n";
  mf += "split_seed = " + std::to_string(bundle.split_seed) + "\n";
  mf += "feature_count = " + std::to_string(bundle.schema.size()) + "\n";
  mf += "standardization_checksum = " + std::to_string(bundle.standardization.checksum()) + "\n";
  mf += "count_augmented_train = " + std::to_string(bundle.augmented_train.size()) + "\n";
  mf += "count_validation = " + std::to_string(bundle.validation.size()) + "\n";
  mf += "count_test = " + std::to_string(bundle.test.size()) + "\n";
  mf += "count_baseline_train = " + std::to_string(bundle.baseline_train.size()) + "\n";
  write_file(dir + "/manifest", mf);
}

inline DatasetBundle load_bundle(const std::string& dir, const FeatureSchema& schema) {
  DatasetBundle bundle;
  bundle.schema = schema;

  std::map<std::string, std::string> mf;
  for (const auto& line : split(read_file(dir + "/manifest"), '\n')) {
    if (trim(line).empty()) continue;
    auto kv = split(line, '=');
    if (kv.size() == 2) mf[trim(kv[0])] = trim(kv[1]);
  }
  if (!mf.count("feature_count")) fail(ErrorKind::SchemaError, dir + "/manifest lacks feature_count");
  if (parse_int(mf["feature_count"], "manifest") != schema.size())
    fail(ErrorKind::DimensionMismatch, "bundle was built for " + mf["feature_count"] + " features, case has " +
                                           std::to_string(schema.size()));
  bundle.case_checksum = static_cast<std::uint64_t>(parse_int(mf["case_checksum"], "manifest"));
  bundle.split_seed = static_cast<std::uint64_t>(parse_int(mf["split_seed"], "manifest"));

  bundle.augmented_train = detail::samples_from_csv(dir + "/augmented_train.csv", schema);
  bundle.validation = detail::samples_from_csv(dir + "/validation.csv", schema);
  bundle.test = detail::samples_from_csv(dir + "/test.csv", schema);
  bundle.baseline_train = detail::samples_from_csv(dir + "/baseline_train.csv", schema);

  const std::string st_path = dir + "/standardization.csv";
  const std::string content = read_file(st_path);
  std::istringstream in(content);
  std::string line;
  std::getline(in, line);
  if (trim(line) != "feature,mean,stdev,constant") fail(ErrorKind::SchemaError, st_path + " header mismatch");
  bundle.standardization.mean.resize(schema.size());
  bundle.standardization.stdev.resize(schema.size());
  bundle.standardization.constant.assign(schema.size(), false);
  int row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    if (row >= schema.size()) fail(ErrorKind::SchemaError, st_path + " has extra rows");
    auto f = split(line, ',');
    if (f.size() != 4 || f[0] != schema.names[row]) fail(ErrorKind::SchemaError, st_path + " row " + std::to_string(row));
    bundle.standardization.mean[row] = parse_double(f[1], st_path);
    bundle.standardization.stdev[row] = parse_double(f[2], st_path);
    bundle.standardization.constant[row] = f[3] == "1";
    ++row;
  }
  if (row != schema.size()) fail(ErrorKind::SchemaError, st_path + " is truncated");

  const auto stored = mf.find("standardization_checksum");
  if (stored != mf.end() &&
      static_cast<std::uint64_t>(parse_int(stored->second, "manifest")) != bundle.standardization.checksum())
    fail(ErrorKind::SchemaError, dir + ": standardization checksum mismatch");
  return bundle;
}

}  // namespace tsa
