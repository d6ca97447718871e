#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "tsa/learn.hpp"

namespace tsa {

// Positive class = stable. fp counts samples predicted stable whose truth is
// unstable (the unsafe direction).
struct ConfusionMatrix {
  long long tp = 0, fp = 0, tn = 0, fn = 0;
  long long total() const { return tp + fp + tn + fn; }
};

struct MetricsReport {
  double recall = 0;       // tp / (tp + fn)
  double precision = 0;    // tp / (tp + fp)
  double specificity = 0;  // tn / (tn + fp)
  double accuracy = 0;     // (tp + tn) / total
  double fp_rate_pct = 0;  // fp / total, percent
  bool degenerate = false; // some ratio had a zero denominator (reported as 1)
};

inline MetricsReport metrics_from(const ConfusionMatrix& cm) {
  MetricsReport m;
  auto ratio = [&](double num, double den) {
    if (den <= 0) {
      m.degenerate = true;
      return 1.0;
    }
    return num / den;
  };
  m.recall = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
  m.precision = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp));
  m.specificity = ratio(static_cast<double>(cm.tn), static_cast<double>(cm.tn + cm.fp));
  m.accuracy = ratio(static_cast<double>(cm.tp + cm.tn), static_cast<double>(cm.total()));
  m.fp_rate_pct = cm.total() > 0 ? 100.0 * static_cast<double>(cm.fp) / static_cast<double>(cm.total()) : 0.0;
  return m;
}

struct Evaluation {
  ConfusionMatrix confusion;
  MetricsReport metrics;
  std::vector<int> predictions;  // aligned with the sample vector
};

inline Evaluation evaluate(const TrAdaBoostModel& model, const std::vector<LabeledSample>& samples) {
  if (samples.empty()) fail(ErrorKind::EmptySampleSet, "evaluation needs samples");
  Evaluation ev;
  ev.predictions.reserve(samples.size());
  for (const auto& s : samples) {
    const int p = predict(model, s.features);
    ev.predictions.push_back(p);
    if (p == 1 && s.label == 1) ++ev.confusion.tp;
    else if (p == 1 && s.label == 0) ++ev.confusion.fp;
    else if (p == 0 && s.label == 0) ++ev.confusion.tn;
    else ++ev.confusion.fn;
  }
  ev.metrics = metrics_from(ev.confusion);
  return ev;
}

enum class TrainingArm { Augmented, Baseline };

inline const char* to_string(TrainingArm a) { return a == TrainingArm::Augmented ? "augmented" : "baseline"; }

struct GridCell {
  double c_fn = 1, c_fp = 1;
  bool trained = false;
  std::string failure;
  std::optional<TrAdaBoostModel> model;
  std::optional<Evaluation> validation;
  std::optional<Evaluation> test;  // filled for the compromise cell only
};

struct TradeoffGrid {
  std::vector<double> c_fn_values, c_fp_values;
  std::vector<GridCell> cells;  // row-major over (c_fn, c_fp)
  TrainingArm arm = TrainingArm::Augmented;

  GridCell& at(std::size_t i, std::size_t j) { return cells[i * c_fp_values.size() + j]; }
  const GridCell& at(std::size_t i, std::size_t j) const { return cells[i * c_fp_values.size() + j]; }
};

struct LearnerConfig {
  int n_rounds = 50;
  int max_depth = 3;
};

// Trains one model per (c_fn, c_fp) cell and scores it on the validation
// partition. Test metrics are not computed here: selection must not see
// them. Per-cell failures are recorded, not fatal.
inline TradeoffGrid run_grid_search(const DatasetBundle& bundle, const std::vector<double>& c_fn_values,
                                    const std::vector<double>& c_fp_values, const LearnerConfig& learner,
                                    std::uint64_t seed, TrainingArm arm, unsigned workers = 1) {
  if (c_fn_values.empty() || c_fp_values.empty()) fail(ErrorKind::BadArgument, "empty cost grid");
  std::vector<LabeledSample> aux, same;
  if (arm == TrainingArm::Augmented) {
    for (const auto& s : bundle.augmented_train)
      (s.origin == Origin::Auxiliary ? aux : same).push_back(s);
  } else {
    same = bundle.baseline_train;
  }
  const std::vector<LabeledSample>& val = bundle.validation;

  TradeoffGrid grid;
  grid.arm = arm;
  grid.c_fn_values = c_fn_values;
  grid.c_fp_values = c_fp_values;
  grid.cells.resize(c_fn_values.size() * c_fp_values.size());

  const std::uint64_t st_checksum = bundle.standardization.checksum();
  parallel_for(grid.cells.size(), workers, [&](std::size_t k) {
    GridCell& cell = grid.cells[k];
    cell.c_fn = c_fn_values[k / c_fp_values.size()];
    cell.c_fp = c_fp_values[k % c_fp_values.size()];
    try {
      CostParams cost{cell.c_fn, cell.c_fp};
      TrAdaBoostModel model =
          arm == TrainingArm::Augmented
              ? train_tradaboost(aux, same, learner.n_rounds, cost, seed, learner.max_depth, st_checksum)
              : train_adaboost_baseline(same, learner.n_rounds, cost, seed, learner.max_depth, st_checksum);
      cell.validation = evaluate(model, val);
      cell.model = std::move(model);
      cell.trained = true;
    } catch (const std::exception& e) {
      cell.failure = e.what();
    }
  });
  return grid;
}

// Among cells within slack_pp percentage points of the best validation
// accuracy, picks the one with the fewest validation false positives. Ties
// break toward higher accuracy, then the lexicographically smallest cost
// pair.
inline std::size_t select_compromise(const TradeoffGrid& grid, double slack_pp = 0.2) {
  double best_acc = -1;
  for (const auto& c : grid.cells)
    if (c.trained) best_acc = std::max(best_acc, c.validation->metrics.accuracy);
  if (best_acc < 0) fail(ErrorKind::EmptySampleSet, "no successful grid cell");

  const double floor_acc = best_acc - slack_pp / 100.0;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < grid.cells.size(); ++k) {
    const auto& c = grid.cells[k];
    if (!c.trained || c.validation->metrics.accuracy < floor_acc) continue;
    if (!best) {
      best = k;
      continue;
    }
    const auto& b = grid.cells[*best];
    const auto key = [](const GridCell& g) {
      return std::make_tuple(g.validation->confusion.fp, -g.validation->metrics.accuracy, g.c_fn, g.c_fp);
    };
    if (key(c) < key(b)) best = k;
  }
  return *best;
}

}  // namespace tsa
