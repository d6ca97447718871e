#include <catch_amalgamated.hpp>

#include <random>

#include "tsa/learn.hpp"

using namespace tsa;

namespace {

LabeledSample sample1d(double x, int label, Origin origin, long long id) {
  LabeledSample s;
  s.features = Eigen::VectorXd::Constant(1, x);
  s.label = label;
  s.origin = origin;
  s.scenario_id = id;
  return s;
}

// two shifted Gaussian blobs in 2-D, linearly separable or overlapping by sigma
std::vector<LabeledSample> gaussian_blobs(int n_per_class, double separation, double sigma, Origin origin,
                                          std::uint64_t seed, long long id0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<LabeledSample> out;
  for (int i = 0; i < 2 * n_per_class; ++i) {
    const int label = i % 2;
    LabeledSample s;
    s.features = Eigen::Vector2d((label ? separation : 0.0) + noise(rng), noise(rng));
    s.label = label;
    s.origin = origin;
    s.scenario_id = id0 + i;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST_CASE("weighted tree training") {
  SECTION("separable 1-D data is fit exactly") {
    Eigen::MatrixXd x(6, 1);
    x << 0.0, 0.1, 0.2, 0.8, 0.9, 1.0;
    const std::vector<int> y{0, 0, 0, 1, 1, 1};
    const std::vector<double> w(6, 1.0 / 6);
    const BaseHypothesis h = train_base(x, y, w, 3);
    for (int i = 0; i < 6; ++i) CHECK(h.predict(x.row(i)) == y[i]);
  }

  SECTION("concentrated weight dictates the fit") {
    // candidate stumps on 4 points; 0.97 of the mass sits on the last point,
    // so any split must classify it correctly
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 0.3, 0.6, 0.9;
    const std::vector<int> y{1, 0, 0, 1};
    const std::vector<double> w{0.01, 0.01, 0.01, 0.97};
    const BaseHypothesis h = train_base(x, y, w, 1);
    CHECK(h.predict(x.row(3)) == 1);
  }

  SECTION("thresholds are midpoints of adjacent distinct values") {
    Eigen::MatrixXd x(4, 1);
    x << 0.0, 0.0, 1.0, 1.0;  // duplicates: the only cut is 0.5
    const std::vector<int> y{0, 0, 1, 1};
    const std::vector<double> w(4, 0.25);
    const BaseHypothesis h = train_base(x, y, w, 1);
    REQUIRE(h.nodes[0].feature == 0);
    CHECK(h.nodes[0].threshold == 0.5);
  }

  SECTION("all-zero weights are a named error") {
    Eigen::MatrixXd x(2, 1);
    x << 0.0, 1.0;
    const std::vector<int> y{0, 1};
    const std::vector<double> w{0.0, 0.0};
    CHECK_THROWS_MATCHES(train_base(x, y, w, 1), Error, Catch::Matchers::Predicate<Error>([](const Error& e) {
      return e.kind() == ErrorKind::AllWeightsZero;
    }));
  }
}

TEST_CASE("transfer boosting matches the longhand fixture") {
  // tests/oracles/trace_boosting.py traces this 4-sample, 2-round, depth-1
  // run by hand; every intermediate below is frozen from that trace.
  std::vector<LabeledSample> aux{sample1d(0.10, 1, Origin::Auxiliary, 1), sample1d(0.70, 0, Origin::Auxiliary, 2)};
  std::vector<LabeledSample> same{sample1d(0.50, 0, Origin::SameDist, 11), sample1d(0.95, 1, Origin::SameDist, 12)};

  BoostTrace trace;
  const TrAdaBoostModel model = train_tradaboost(aux, same, 2, CostParams{1.0, 3.0}, 42, 1, 0, &trace);

  REQUIRE(trace.sample_ids == std::vector<long long>{1, 2, 11, 12});
  REQUIRE(trace.initial_weights.size() == 4);
  CHECK(trace.initial_weights[0] == 1.0);
  CHECK(trace.initial_weights[1] == 1.0);
  CHECK(trace.initial_weights[2] == 1.5);
  CHECK(trace.initial_weights[3] == 0.5);

  REQUIRE(trace.rounds.size() == 2);
  const auto& r1 = trace.rounds[0];
  CHECK(r1.normalized == std::vector<double>{0.25, 0.25, 0.375, 0.125});
  CHECK(r1.predictions == std::vector<int>{1, 0, 0, 0});
  CHECK(r1.eps == 0.25);
  CHECK(r1.beta == 0.3333333333333333);
  CHECK(r1.weights_after == std::vector<double>{1.0, 1.0, 1.5, 1.5});

  const auto& r2 = trace.rounds[1];
  CHECK(r2.normalized == std::vector<double>{0.2, 0.2, 0.3, 0.3});
  CHECK(r2.predictions == std::vector<int>{0, 0, 0, 1});
  CHECK(r2.eps == 0.0);
  CHECK(r2.beta == 1e-10);
  // the misclassified auxiliary sample decays by beta_src
  CHECK(r2.weights_after[0] == model.beta_src);
  CHECK(r2.weights_after[0] == Catch::Approx(0.5456863298432674).margin(1e-15));
  CHECK(r2.weights_after[1] == 1.0);
  CHECK(r2.weights_after[2] == 1.5);
  CHECK(r2.weights_after[3] == 1.5);

  CHECK(model.beta_src == Catch::Approx(0.5456863298432674).margin(1e-15));
  CHECK(model.committee_start == 1);
  REQUIRE(model.beta_t.size() == 2);
  CHECK(model.beta_t[0] == 0.3333333333333333);
  CHECK(model.beta_t[1] == 1e-10);
}

TEST_CASE("source decay factor closed form") {
  // beta_src = 1 / (1 + sqrt(2 ln(n_aux) / N))
  std::vector<LabeledSample> aux{sample1d(0.1, 1, Origin::Auxiliary, 1), sample1d(0.9, 0, Origin::Auxiliary, 2)};
  std::vector<LabeledSample> same{sample1d(0.2, 1, Origin::SameDist, 11), sample1d(0.8, 0, Origin::SameDist, 12)};
  const TrAdaBoostModel m = train_tradaboost(aux, same, 4, CostParams{}, 1, 1);
  CHECK(m.beta_src == Catch::Approx(0.6294434730890195).margin(1e-5));
}

TEST_CASE("empty auxiliary set reproduces the plain boosting baseline") {
  const auto train = gaussian_blobs(100, 2.0, 1.0, Origin::SameDist, 555, 1);
  const auto probe = gaussian_blobs(100, 2.0, 1.0, Origin::Test, 777, 1000);

  const TrAdaBoostModel transfer = train_tradaboost({}, train, 20, CostParams{1.0, 1.0}, 9, 2);
  const TrAdaBoostModel baseline = train_adaboost_baseline(train, 20, CostParams{1.0, 1.0}, 9, 2);

  REQUIRE(transfer.rounds.size() == baseline.rounds.size());
  for (std::size_t t = 0; t < transfer.beta_t.size(); ++t) CHECK(transfer.beta_t[t] == baseline.beta_t[t]);
  for (const auto& s : probe) CHECK(predict(transfer, s.features) == predict(baseline, s.features));
}

TEST_CASE("prediction rule") {
  SECTION("single round is that round's vote") {
    std::vector<LabeledSample> same{sample1d(0.0, 0, Origin::SameDist, 1), sample1d(1.0, 1, Origin::SameDist, 2)};
    const TrAdaBoostModel m = train_tradaboost({}, same, 1, CostParams{}, 1, 1);
    CHECK(predict(m, Eigen::VectorXd::Constant(1, 0.1)) == 0);
    CHECK(predict(m, Eigen::VectorXd::Constant(1, 0.9)) == 1);
  }

  SECTION("hand-evaluated two-round committee vote") {
    // beta = (0.2, 0.4), votes (1, 0): lhs -ln 0.2 = 1.609 >= rhs 1.263 -> stable
    TrAdaBoostModel m;
    m.beta_t = {0.2, 0.4};
    m.committee_start = 1;
    m.feature_count = 1;
    BaseHypothesis stable_vote, unstable_vote;
    stable_vote.nodes.push_back(TreeNode{-1, 0, -1, -1, 1});
    unstable_vote.nodes.push_back(TreeNode{-1, 0, -1, -1, 0});
    m.rounds = {stable_vote, unstable_vote};
    CHECK(predict(m, Eigen::VectorXd::Zero(1)) == 1);
  }

  SECTION("unanimous unstable committee predicts unstable") {
    TrAdaBoostModel m;
    m.beta_t = {0.3, 0.3, 0.3};
    m.committee_start = 2;
    m.feature_count = 1;
    BaseHypothesis unstable_vote;
    unstable_vote.nodes.push_back(TreeNode{-1, 0, -1, -1, 0});
    m.rounds = {unstable_vote, unstable_vote, unstable_vote};
    CHECK(predict(m, Eigen::VectorXd::Zero(1)) == 0);
  }

  SECTION("log-space rule equals the direct product rule") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> unif(0.05, 0.95);
    for (int trial = 0; trial < 200; ++trial) {
      const int rounds = 1 + static_cast<int>(rng() % 6);
      TrAdaBoostModel m;
      m.feature_count = 1;
      m.committee_start = 1 + static_cast<int>(rng() % rounds);
      std::vector<int> votes;
      for (int t = 0; t < rounds; ++t) {
        m.beta_t.push_back(unif(rng));
        BaseHypothesis h;
        h.nodes.push_back(TreeNode{-1, 0, -1, -1, static_cast<int>(rng() % 2)});
        votes.push_back(h.nodes[0].leaf_class);
        m.rounds.push_back(h);
      }
      double lhs = 1.0, rhs = 1.0;
      for (int t = m.committee_start - 1; t < rounds; ++t) {
        lhs *= std::pow(m.beta_t[t], -votes[t]);
        rhs *= std::pow(m.beta_t[t], -0.5);
      }
      const int direct = lhs >= rhs ? 1 : 0;
      const int logspace = predict(m, Eigen::VectorXd::Zero(1));
      if (std::abs(lhs - rhs) > 1e-12 * std::max(lhs, rhs)) CHECK(direct == logspace);
    }
  }

  SECTION("dimension mismatch is a named error") {
    std::vector<LabeledSample> same{sample1d(0.0, 0, Origin::SameDist, 1), sample1d(1.0, 1, Origin::SameDist, 2)};
    const TrAdaBoostModel m = train_tradaboost({}, same, 1, CostParams{}, 1, 1);
    CHECK_THROWS_MATCHES(predict(m, Eigen::VectorXd::Zero(3)), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.kind() == ErrorKind::DimensionMismatch;
                         }));
  }
}

TEST_CASE("boosting invariants on an overlapping problem") {
  const auto aux = gaussian_blobs(60, 1.0, 1.2, Origin::Auxiliary, 11, 1);
  const auto same = gaussian_blobs(80, 1.4, 1.0, Origin::SameDist, 22, 500);

  BoostTrace trace;
  const TrAdaBoostModel m = train_tradaboost(aux, same, 15, CostParams{1.0, 2.0}, 7, 2, 0, &trace);

  SECTION("weights stay nonnegative and finite in every round") {
    for (const auto& r : trace.rounds)
      for (double w : r.weights_after) {
        CHECK(w >= 0);
        CHECK(std::isfinite(w));
      }
  }

  SECTION("auxiliary weights never increase") {
    std::vector<double> prev(trace.initial_weights.begin(), trace.initial_weights.begin() + 120);
    for (const auto& r : trace.rounds) {
      for (int i = 0; i < 120; ++i) {
        CHECK(r.weights_after[i] <= prev[i] + 1e-15);
      }
      prev.assign(r.weights_after.begin(), r.weights_after.begin() + 120);
    }
  }

  SECTION("every retained round has eps below one half and beta in (0,1)") {
    for (const auto& r : trace.rounds) CHECK(r.eps < 0.5);
    for (double b : m.beta_t) {
      CHECK(b > 0);
      CHECK(b < 1);
    }
  }

  SECTION("training is deterministic and independent of sample order") {
    auto aux_shuffled = aux;
    auto same_shuffled = same;
    std::reverse(aux_shuffled.begin(), aux_shuffled.end());
    std::reverse(same_shuffled.begin(), same_shuffled.end());
    const TrAdaBoostModel m2 = train_tradaboost(aux_shuffled, same_shuffled, 15, CostParams{1.0, 2.0}, 7, 2);
    REQUIRE(m2.beta_t.size() == m.beta_t.size());
    for (std::size_t t = 0; t < m.beta_t.size(); ++t) CHECK(m.beta_t[t] == m2.beta_t[t]);
    const auto probe = gaussian_blobs(50, 1.4, 1.0, Origin::Test, 33, 9000);
    for (const auto& s : probe) CHECK(predict(m, s.features) == predict(m2, s.features));
  }
}

TEST_CASE("cost weighting pushes false positives down") {
  // imbalanced, overlapping data; unstable (label 0) is the minority
  std::mt19937_64 rng(404);
  std::normal_distribution<double> noise(0.0, 1.2);
  auto make_set = [&](int n, Origin origin, long long id0) {
    std::vector<LabeledSample> out;
    for (int i = 0; i < n; ++i) {
      const int label = (i % 4 == 0) ? 0 : 1;
      LabeledSample s;
      s.features = Eigen::Vector2d((label ? 1.2 : 0.0) + noise(rng), noise(rng));
      s.label = label;
      s.origin = origin;
      s.scenario_id = id0 + i;
      out.push_back(std::move(s));
    }
    return out;
  };
  const auto train = make_set(400, Origin::SameDist, 1);
  const auto held = make_set(400, Origin::Test, 1000);

  const TrAdaBoostModel neutral = train_adaboost_baseline(train, 20, CostParams{1.0, 1.0}, 5, 2);
  const TrAdaBoostModel averse = train_adaboost_baseline(train, 20, CostParams{1.0, 10.0}, 5, 2);
  long long fp_neutral = 0, fp_averse = 0;
  for (const auto& s : held) {
    if (s.label == 0 && predict(neutral, s.features) == 1) ++fp_neutral;
    if (s.label == 0 && predict(averse, s.features) == 1) ++fp_averse;
  }
  CHECK(fp_averse <= fp_neutral);
}

TEST_CASE("model serialization round-trips bit-exactly") {
  const auto same = gaussian_blobs(60, 1.2, 1.0, Origin::SameDist, 1, 1);
  const auto aux = gaussian_blobs(30, 1.0, 1.1, Origin::Auxiliary, 2, 300);
  const TrAdaBoostModel m = train_tradaboost(aux, same, 8, CostParams{2.0, 5.0}, 3, 3, 0xfeedface);

  const std::string text = serialize_model(m);
  const TrAdaBoostModel r = deserialize_model(text);
  CHECK(r.beta_src == m.beta_src);
  CHECK(r.committee_start == m.committee_start);
  CHECK(r.cost.c_fn == m.cost.c_fn);
  CHECK(r.cost.c_fp == m.cost.c_fp);
  CHECK(r.feature_count == m.feature_count);
  CHECK(r.standardization_checksum == m.standardization_checksum);
  REQUIRE(r.beta_t.size() == m.beta_t.size());
  for (std::size_t t = 0; t < m.beta_t.size(); ++t) {
    CHECK(r.beta_t[t] == m.beta_t[t]);
    REQUIRE(r.rounds[t].nodes.size() == m.rounds[t].nodes.size());
    for (std::size_t k = 0; k < m.rounds[t].nodes.size(); ++k) {
      CHECK(r.rounds[t].nodes[k].feature == m.rounds[t].nodes[k].feature);
      CHECK(r.rounds[t].nodes[k].threshold == m.rounds[t].nodes[k].threshold);
      CHECK(r.rounds[t].nodes[k].leaf_class == m.rounds[t].nodes[k].leaf_class);
    }
  }
  CHECK(serialize_model(r) == text);
  const auto probe = gaussian_blobs(40, 1.2, 1.0, Origin::Test, 77, 5000);
  for (const auto& s : probe) CHECK(predict(r, s.features) == predict(m, s.features));
}

TEST_CASE("separable data reaches zero training error within five rounds") {
  const auto train = gaussian_blobs(50, 8.0, 0.5, Origin::SameDist, 99, 1);
  const TrAdaBoostModel m = train_adaboost_baseline(train, 5, CostParams{}, 1, 2);
  long long errors = 0;
  for (const auto& s : train)
    if (predict(m, s.features) != s.label) ++errors;
  CHECK(errors == 0);
}
