#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tsa/dataset.hpp"

namespace tsa {

// Misclassification cost weights. c_fn is carried by stable-truth samples
// (a miss there is a safe misclassification), c_fp by unstable-truth samples
// (a miss there predicts stable for a truly unstable scenario).
struct CostParams {
  double c_fn = 1.0;
  double c_fp = 1.0;
};

struct TreeNode {
  int feature = -1;       // -1 marks a leaf
  double threshold = 0;   // goes left when x[feature] <= threshold
  int left = -1, right = -1;
  int leaf_class = 0;
};

struct BaseHypothesis {
  std::vector<TreeNode> nodes;  // root at 0

  template <typename Derived>
  int predict(const Eigen::MatrixBase<Derived>& x) const {
    int n = 0;
    while (nodes[n].feature >= 0) n = x(nodes[n].feature) <= nodes[n].threshold ? nodes[n].left : nodes[n].right;
    return nodes[n].leaf_class;
  }
};

// Greedy weighted-Gini tree trainer. Feature columns are pre-sorted once so
// that boosting rounds over the same sample set only pay for the scans.
class TreeTrainer {
 public:
  TreeTrainer(const Eigen::MatrixXd& x, std::vector<int> labels)
      : x_(x), y_(std::move(labels)), order_(static_cast<std::size_t>(x.cols())) {
    const int n = static_cast<int>(x_.rows());
    if (static_cast<int>(y_.size()) != n) fail(ErrorKind::DimensionMismatch, "labels vs feature rows");
    for (int f = 0; f < x_.cols(); ++f) {
      auto& ord = order_[f];
      ord.resize(n);
      std::iota(ord.begin(), ord.end(), 0);
      std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return x_(a, f) < x_(b, f); });
    }
  }

  int sample_count() const { return static_cast<int>(x_.rows()); }

  BaseHypothesis fit(std::span<const double> weights, int max_depth) const {
    const int n = sample_count();
    if (static_cast<int>(weights.size()) != n) fail(ErrorKind::DimensionMismatch, "weights vs samples");
    double total = 0;
    for (double w : weights) {
      if (w < 0 || !std::isfinite(w)) fail(ErrorKind::BadArgument, "negative or non-finite sample weight");
      total += w;
    }
    if (total <= 0) fail(ErrorKind::AllWeightsZero, "tree training needs positive total weight");

    BaseHypothesis tree;
    std::vector<char> member(n, 1);
    build(tree, weights, member, 0, max_depth);
    return tree;
  }

 private:
  struct Split {
    bool found = false;
    int feature = -1;
    double threshold = 0;
    double gain = 0;
  };

  static double gini(double w0, double w1) {
    const double t = w0 + w1;
    if (t <= 0) return 0;
    const double p0 = w0 / t;
    return 2.0 * p0 * (1.0 - p0);
  }

  // members: indicator over all samples for the node under construction
  Split best_split(std::span<const double> w, const std::vector<char>& member) const {
    double w0 = 0, w1 = 0;
    for (int i = 0; i < sample_count(); ++i)
      if (member[i]) (y_[i] ? w1 : w0) += w[i];
    const double w_total = w0 + w1;
    Split best;
    if (w_total <= 0 || w0 == 0 || w1 == 0) return best;
    const double parent = gini(w0, w1);

    for (int f = 0; f < x_.cols(); ++f) {
      double l0 = 0, l1 = 0;
      double prev_value = 0;
      bool have_prev = false;
      for (int idx : order_[f]) {
        if (!member[idx]) continue;
        const double v = x_(idx, f);
        if (have_prev && v > prev_value && (l0 + l1) > 0 && (l0 + l1) < w_total) {
          const double r0 = w0 - l0, r1 = w1 - l1;
          const double gain =
              parent - (l0 + l1) / w_total * gini(l0, l1) - (r0 + r1) / w_total * gini(r0, r1);
          if (gain > best.gain + 1e-15) {
            best.found = true;
            best.feature = f;
            best.threshold = 0.5 * (prev_value + v);  // midpoint of adjacent observed values
            best.gain = gain;
          }
        }
        (y_[idx] ? l1 : l0) += w[idx];
        prev_value = v;
        have_prev = true;
      }
    }
    return best;
  }

  int build(BaseHypothesis& tree, std::span<const double> w, const std::vector<char>& member, int depth,
            int max_depth) const {
    double w0 = 0, w1 = 0;
    for (int i = 0; i < sample_count(); ++i)
      if (member[i]) (y_[i] ? w1 : w0) += w[i];

    const int node_index = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back({});
    // majority leaf; exact tie resolves to unstable
    tree.nodes[node_index].leaf_class = w1 > w0 ? 1 : 0;
    if (depth >= max_depth || w0 == 0 || w1 == 0) return node_index;

    const Split s = best_split(w, member);
    if (!s.found) return node_index;

    std::vector<char> left_member(member.size(), 0), right_member(member.size(), 0);
    for (std::size_t i = 0; i < member.size(); ++i) {
      if (!member[i]) continue;
      (x_(static_cast<int>(i), s.feature) <= s.threshold ? left_member : right_member)[i] = 1;
    }
    tree.nodes[node_index].feature = s.feature;
    tree.nodes[node_index].threshold = s.threshold;
    const int l = build(tree, w, left_member, depth + 1, max_depth);
    const int r = build(tree, w, right_member, depth + 1, max_depth);
    tree.nodes[node_index].left = l;
    tree.nodes[node_index].right = r;
    return node_index;
  }

  const Eigen::MatrixXd& x_;
  std::vector<int> y_;
  std::vector<std::vector<int>> order_;
};

// Convenience wrapper for one-off training.
inline BaseHypothesis train_base(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                 std::span<const double> weights, int max_depth = 3) {
  TreeTrainer trainer(x, labels);
  return trainer.fit(weights, max_depth);
}

enum class BoostStop { Completed, ErrorFloorHit };

struct TrAdaBoostModel {
  std::vector<BaseHypothesis> rounds;
  std::vector<double> beta_t;       // one per retained round, each in (0,1)
  double beta_src = 1.0;            // source decay factor, 1.0 when no aux set
  int n_rounds_requested = 0;
  int committee_start = 1;          // 1-based round index, ceil(N/2) of retained rounds
  CostParams cost;
  int feature_count = 0;
  std::uint64_t standardization_checksum = 0;
  BoostStop stop = BoostStop::Completed;

  int committee_size() const { return static_cast<int>(rounds.size()) - (committee_start - 1); }
};

// Committee vote over the late rounds: stable iff
//   prod beta_t^{-h_t(x)} >= prod beta_t^{-1/2},
// evaluated in log space.
inline int predict(const TrAdaBoostModel& model, const Eigen::VectorXd& x) {
  if (model.feature_count && x.size() != model.feature_count)
    fail(ErrorKind::DimensionMismatch, "feature vector of length " + std::to_string(x.size()) + ", model expects " +
                                           std::to_string(model.feature_count));
  double lhs = 0, rhs = 0;
  for (std::size_t t = model.committee_start - 1; t < model.rounds.size(); ++t) {
    const double nlb = -std::log(model.beta_t[t]);
    lhs += nlb * model.rounds[t].predict(x);
    rhs += nlb * 0.5;
  }
  return lhs >= rhs ? 1 : 0;
}

namespace detail {

struct BoostProblem {
  Eigen::MatrixXd x;
  std::vector<int> y;
  std::vector<long long> scenario_ids;
  int n_aux = 0;  // first n_aux rows are auxiliary samples
};

// Samples enter boosting in a canonical order (aux block then target block,
// ascending scenario id) so that training never depends on caller ordering.
inline BoostProblem assemble(const std::vector<LabeledSample>& aux, const std::vector<LabeledSample>& same) {
  if (same.empty()) fail(ErrorKind::EmptySampleSet, "boosting needs target-distribution samples");
  std::vector<const LabeledSample*> aux_sorted, same_sorted;
  for (const auto& s : aux) aux_sorted.push_back(&s);
  for (const auto& s : same) same_sorted.push_back(&s);
  auto by_id = [](const LabeledSample* a, const LabeledSample* b) { return a->scenario_id < b->scenario_id; };
  std::stable_sort(aux_sorted.begin(), aux_sorted.end(), by_id);
  std::stable_sort(same_sorted.begin(), same_sorted.end(), by_id);

  BoostProblem p;
  p.n_aux = static_cast<int>(aux_sorted.size());
  const int n = p.n_aux + static_cast<int>(same_sorted.size());
  const int dim = static_cast<int>(same.front().features.size());
  p.x.resize(n, dim);
  p.y.resize(n);
  p.scenario_ids.resize(n);
  int r = 0;
  for (const auto* s : aux_sorted) {
    if (s->features.size() != dim) fail(ErrorKind::DimensionMismatch, "auxiliary sample feature length");
    p.x.row(r) = s->features.transpose();
    p.y[r] = s->label;
    p.scenario_ids[r] = s->scenario_id;
    ++r;
  }
  for (const auto* s : same_sorted) {
    if (s->features.size() != dim) fail(ErrorKind::DimensionMismatch, "sample feature length");
    p.x.row(r) = s->features.transpose();
    p.y[r] = s->label;
    p.scenario_ids[r] = s->scenario_id;
    ++r;
  }
  return p;
}

// Cost enters once, at initialization: target samples start at a weight
// proportional to their misclassification cost, normalized to unit mean.
inline std::vector<double> initial_weights(const BoostProblem& p, const CostParams& cost) {
  if (!(cost.c_fn > 0) || !(cost.c_fp > 0)) fail(ErrorKind::BadArgument, "cost weights must be positive");
  const int n = static_cast<int>(p.y.size());
  std::vector<double> w(n, 1.0);
  double sum = 0;
  for (int i = p.n_aux; i < n; ++i) {
    w[i] = p.y[i] == 0 ? cost.c_fp : cost.c_fn;
    sum += w[i];
  }
  const int n_same = n - p.n_aux;
  if (n_same > 0) {
    const double mean = sum / n_same;
    for (int i = p.n_aux; i < n; ++i) w[i] /= mean;
  }
  return w;
}

// strictly downward jitter: auxiliary weights must never increase
inline void perturb_weights(std::vector<double>& w, std::uint64_t seed, int round) {
  std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + static_cast<std::uint64_t>(round) + 1);
  std::uniform_real_distribution<double> jitter(0.0, 0.02);
  for (double& v : w) v *= 1.0 - jitter(rng);
}

}  // namespace detail

// Per-round internals, recordable for inspection and for the longhand
// fixture test.
struct BoostTraceRound {
  std::vector<double> normalized;   // distribution the base learner saw
  std::vector<int> predictions;
  double eps = 0;
  double beta = 0;
  std::vector<double> weights_after;
};

struct BoostTrace {
  std::vector<long long> sample_ids;  // canonical training order
  std::vector<double> initial_weights;
  std::vector<BoostTraceRound> rounds;
};

// Boosting for instance transfer: the base learner trains on the union of
// auxiliary and target samples, the round error is measured on the target
// samples only, misclassified target samples are boosted by 1/beta_t and
// misclassified auxiliary samples are decayed by the fixed factor beta_src.
// Rounds with error >= 1/2 are retried once on a perturbed distribution and
// otherwise terminate training early.
inline TrAdaBoostModel train_tradaboost(const std::vector<LabeledSample>& aux,
                                        const std::vector<LabeledSample>& same, int n_rounds, CostParams cost,
                                        std::uint64_t seed, int max_depth = 3,
                                        std::uint64_t standardization_checksum = 0, BoostTrace* trace = nullptr) {
  if (n_rounds < 1) fail(ErrorKind::BadArgument, "n_rounds must be >= 1");
  detail::BoostProblem p = detail::assemble(aux, same);
  const int n = static_cast<int>(p.y.size());

  TrAdaBoostModel model;
  model.cost = cost;
  model.n_rounds_requested = n_rounds;
  model.feature_count = static_cast<int>(p.x.cols());
  model.standardization_checksum = standardization_checksum;
  model.beta_src =
      p.n_aux > 0 ? 1.0 / (1.0 + std::sqrt(2.0 * std::log(static_cast<double>(p.n_aux)) / n_rounds)) : 1.0;

  TreeTrainer trainer(p.x, p.y);
  std::vector<double> w = detail::initial_weights(p, cost);
  std::vector<double> norm(n);
  std::vector<int> pred(n);
  if (trace) {
    trace->sample_ids = p.scenario_ids;
    trace->initial_weights = w;
    trace->rounds.clear();
  }

  for (int t = 0; t < n_rounds; ++t) {
    BaseHypothesis h;
    double eps = 0;
    bool accepted = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      double total = std::accumulate(w.begin(), w.end(), 0.0);
      if (!(total > 0)) fail(ErrorKind::AllWeightsZero, "boosting weights vanished");
      for (int i = 0; i < n; ++i) norm[i] = w[i] / total;

      h = trainer.fit(norm, max_depth);
      for (int i = 0; i < n; ++i) pred[i] = h.predict(p.x.row(i));

      double err = 0, mass = 0;
      for (int i = p.n_aux; i < n; ++i) {
        mass += norm[i];
        if (pred[i] != p.y[i]) err += norm[i];
      }
      eps = mass > 0 ? err / mass : 0.0;
      if (eps < 0.5) {
        accepted = true;
        break;
      }
      if (attempt == 0) detail::perturb_weights(w, seed, t);
    }
    if (!accepted) {
      model.stop = BoostStop::ErrorFloorHit;
      break;
    }

    const double beta = std::max(eps / (1.0 - eps), 1e-10);
    model.rounds.push_back(std::move(h));
    model.beta_t.push_back(beta);

    for (int i = 0; i < p.n_aux; ++i)
      if (pred[i] != p.y[i]) w[i] *= model.beta_src;
    for (int i = p.n_aux; i < n; ++i)
      if (pred[i] != p.y[i]) w[i] /= beta;

    if (trace) {
      BoostTraceRound tr;
      tr.normalized = norm;
      tr.predictions = pred;
      tr.eps = eps;
      tr.beta = beta;
      tr.weights_after = w;
      trace->rounds.push_back(std::move(tr));
    }
  }

  if (model.rounds.empty()) fail(ErrorKind::NonConvergence, "no boosting round met the error bound");
  model.committee_start = (static_cast<int>(model.rounds.size()) + 1) / 2;
  if (model.committee_start < 1) model.committee_start = 1;
  return model;
}

// Plain adaptive boosting on one training set with the same cost-at-
// initialization scheme, base learner and committee rule. This is the
// non-transfer arm used for baseline comparisons.
inline TrAdaBoostModel train_adaboost_baseline(const std::vector<LabeledSample>& train, int n_rounds,
                                               CostParams cost, std::uint64_t seed, int max_depth = 3,
                                               std::uint64_t standardization_checksum = 0) {
  if (n_rounds < 1) fail(ErrorKind::BadArgument, "n_rounds must be >= 1");
  detail::BoostProblem p = detail::assemble({}, train);
  const int n = static_cast<int>(p.y.size());

  TrAdaBoostModel model;
  model.cost = cost;
  model.n_rounds_requested = n_rounds;
  model.feature_count = static_cast<int>(p.x.cols());
  model.standardization_checksum = standardization_checksum;
  model.beta_src = 1.0;

  TreeTrainer trainer(p.x, p.y);
  std::vector<double> w = detail::initial_weights(p, cost);
  std::vector<double> norm(n);
  std::vector<int> pred(n);

  for (int t = 0; t < n_rounds; ++t) {
    BaseHypothesis h;
    double eps = 0;
    bool accepted = false;
    for (int attempt = 0; attempt < 2; ++attempt) {
      double total = std::accumulate(w.begin(), w.end(), 0.0);
      if (!(total > 0)) fail(ErrorKind::AllWeightsZero, "boosting weights vanished");
      for (int i = 0; i < n; ++i) norm[i] = w[i] / total;

      h = trainer.fit(norm, max_depth);
      for (int i = 0; i < n; ++i) pred[i] = h.predict(p.x.row(i));

      eps = 0;
      for (int i = 0; i < n; ++i)
        if (pred[i] != p.y[i]) eps += norm[i];
      if (eps < 0.5) {
        accepted = true;
        break;
      }
      if (attempt == 0) detail::perturb_weights(w, seed, t);
    }
    if (!accepted) {
      model.stop = BoostStop::ErrorFloorHit;
      break;
    }

    const double beta = std::max(eps / (1.0 - eps), 1e-10);
    model.rounds.push_back(std::move(h));
    model.beta_t.push_back(beta);
    for (int i = 0; i < n; ++i)
      if (pred[i] != p.y[i]) w[i] /= beta;
  }

  if (model.rounds.empty()) fail(ErrorKind::NonConvergence, "no boosting round met the error bound");
  model.committee_start = (static_cast<int>(model.rounds.size()) + 1) / 2;
  if (model.committee_start < 1) model.committee_start = 1;
  return model;
}

// --- flat model file, versioned, bit-exact round trip ---

inline std::string serialize_model(const TrAdaBoostModel& m) {
  std::string out;
  out += "tsa-model v1\n";
  out += "rounds = " + std::to_string(m.rounds.size()) + "\n";
  out += "requested = " + std::to_string(m.n_rounds_requested) + "\n";
  out += "committee_start = " + std::to_string(m.committee_start) + "\n";
  out += "beta_src = " + fmt_double(m.beta_src) + "\n";
  out += "c_fn = " + fmt_double(m.cost.c_fn) + "\n";
  out += "c_fp = " + fmt_double(m.cost.c_fp) + "\n";
  out += "features = " + std::to_string(m.feature_count) + "\n";
  out += "standardization_checksum = " + std::to_string(m.standardization_checksum) + "\n";
  out += std::string("stop = ") + (m.stop == BoostStop::Completed ? "completed" : "error_floor") + "\n";
  for (std::size_t t = 0; t < m.rounds.size(); ++t) {
    out += "round " + std::to_string(t) + " beta " + fmt_double(m.beta_t[t]) + " nodes " +
           std::to_string(m.rounds[t].nodes.size()) + "\n";
    for (const auto& nd : m.rounds[t].nodes)
      out += std::to_string(nd.feature) + " " + fmt_double(nd.threshold) + " " + std::to_string(nd.left) + " " +
             std::to_string(nd.right) + " " + std::to_string(nd.leaf_class) + "\n";
  }
  return out;
}

inline TrAdaBoostModel deserialize_model(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || trim(line) != "tsa-model v1")
    fail(ErrorKind::SchemaError, "not a tsa-model v1 file");
  TrAdaBoostModel m;
  auto kv = [&](const std::string& key) {
    if (!std::getline(in, line)) fail(ErrorKind::SchemaError, "model file truncated at " + key);
    auto parts = split(line, '=');
    if (parts.size() != 2 || parts[0] != key) fail(ErrorKind::SchemaError, "expected '" + key + "', got '" + line + "'");
    return parts[1];
  };
  const int n_rounds = static_cast<int>(parse_int(kv("rounds"), "model"));
  m.n_rounds_requested = static_cast<int>(parse_int(kv("requested"), "model"));
  m.committee_start = static_cast<int>(parse_int(kv("committee_start"), "model"));
  m.beta_src = parse_double(kv("beta_src"), "model");
  m.cost.c_fn = parse_double(kv("c_fn"), "model");
  m.cost.c_fp = parse_double(kv("c_fp"), "model");
  m.feature_count = static_cast<int>(parse_int(kv("features"), "model"));
  m.standardization_checksum = static_cast<std::uint64_t>(parse_int(kv("standardization_checksum"), "model"));
  m.stop = kv("stop") == "completed" ? BoostStop::Completed : BoostStop::ErrorFloorHit;
  for (int t = 0; t < n_rounds; ++t) {
    if (!std::getline(in, line)) fail(ErrorKind::SchemaError, "model file truncated at round " + std::to_string(t));
    auto parts = split(line, ' ');
    if (parts.size() != 6 || parts[0] != "round" || parts[2] != "beta" || parts[4] != "nodes")
      fail(ErrorKind::SchemaError, "bad round header '" + line + "'");
    m.beta_t.push_back(parse_double(parts[3], "model"));
    const int n_nodes = static_cast<int>(parse_int(parts[5], "model"));
    BaseHypothesis h;
    for (int k = 0; k < n_nodes; ++k) {
      if (!std::getline(in, line)) fail(ErrorKind::SchemaError, "model file truncated in tree");
      auto f = split(line, ' ');
      if (f.size() != 5) fail(ErrorKind::SchemaError, "bad tree node '" + line + "'");
      TreeNode nd;
      nd.feature = static_cast<int>(parse_int(f[0], "model"));
      nd.threshold = parse_double(f[1], "model");
      nd.left = static_cast<int>(parse_int(f[2], "model"));
      nd.right = static_cast<int>(parse_int(f[3], "model"));
      nd.leaf_class = static_cast<int>(parse_int(f[4], "model"));
      h.nodes.push_back(nd);
    }
    m.rounds.push_back(std::move(h));
  }
  return m;
}

}  // namespace tsa
