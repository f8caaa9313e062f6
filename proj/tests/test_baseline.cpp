#include <doctest.h>

#include <algorithm>
#include <random>

#include "gazetrait/baseline.hpp"
#include "gazetrait/error.hpp"

using namespace gazetrait;
using namespace gazetrait::baseline;

namespace {

std::vector<AugmentedFrame> window_of(const std::vector<std::optional<double>>& gaze_x) {
  std::vector<AugmentedFrame> w(gaze_x.size());
  for (std::size_t t = 0; t < gaze_x.size(); ++t) {
    for (std::size_t j = 0; j < kNumSignals; ++j) {
      w[t].values[j] = 0.5;
      w[t].mask[j] = 1;
    }
    w[t].values[0] = gaze_x[t].value_or(0.0);
    w[t].mask[0] = gaze_x[t] ? 1 : 0;
  }
  return w;
}

Forest::Tree leaf(std::size_t label) { return {Forest::Node{-1, 0.0, -1, -1, label}}; }

Forest voting(std::size_t a, std::size_t b, std::size_t c) {
  std::vector<Forest::Tree> trees;
  for (std::size_t i = 0; i < a; ++i) trees.push_back(leaf(0));
  for (std::size_t i = 0; i < b; ++i) trees.push_back(leaf(1));
  for (std::size_t i = 0; i < c; ++i) trees.push_back(leaf(2));
  return Forest::from_trees(1, trees);
}

}  // namespace

TEST_SUITE("baseline") {

TEST_CASE("stat feature names are pinned") {
  const auto& names = stat_feature_names();
  REQUIRE(names.size() == 20);
  const std::vector<std::string> expected{
      "gaze_x_min",   "gaze_x_max",   "gaze_x_mean",    "gaze_x_std",   "gaze_x_median",
      "gaze_y_min",   "gaze_y_max",   "gaze_y_mean",    "gaze_y_std",   "gaze_y_median",
      "pupil_min",    "pupil_max",    "pupil_mean",     "pupil_std",    "pupil_median",
      "velocity_min", "velocity_max", "velocity_mean",  "velocity_std", "velocity_median"};
  CHECK(names == expected);
}

TEST_CASE("stat feature examples") {
  const auto constant = stat_features(window_of({2.0, 2.0, 2.0}));
  CHECK(constant[0] == 2.0);
  CHECK(constant[1] == 2.0);
  CHECK(constant[2] == 2.0);
  CHECK(constant[3] == 0.0);
  CHECK(constant[4] == 2.0);

  const auto ramp = stat_features(window_of({1.0, 2.0, 3.0, 4.0}));
  CHECK(ramp[0] == 1.0);
  CHECK(ramp[1] == 4.0);
  CHECK(ramp[2] == 2.5);
  CHECK(ramp[3] == doctest::Approx(std::sqrt(1.25)).epsilon(1e-12));
  CHECK(ramp[4] == 2.0);

  const auto missing = stat_features(window_of({std::nullopt, std::nullopt}));
  for (std::size_t i = 0; i < 5; ++i) CHECK(missing[i] == 0.0);
  CHECK(missing[5] == 0.5);

  const auto partial = stat_features(window_of({std::nullopt, 7.0, std::nullopt, 1.0}));
  CHECK(partial[0] == 1.0);
  CHECK(partial[2] == 4.0);

  // pupil comes before velocity in the statistics layout
  auto w = window_of({0.0});
  w[0].values[static_cast<std::size_t>(Signal::Pupil)] = 3.0;
  w[0].values[static_cast<std::size_t>(Signal::Velocity)] = 9.0;
  const auto f = stat_features(w);
  CHECK(f[10] == 3.0);
  CHECK(f[15] == 9.0);
}

TEST_CASE("stat features ignore time order") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::optional<double>> xs(1 + trial);
    for (auto& x : xs) {
      if (u(rng) > -0.5) x = u(rng);
    }
    auto w = window_of(xs);
    const auto a = stat_features(w);
    std::shuffle(w.begin(), w.end(), rng);
    const auto b = stat_features(w);
    for (std::size_t i = 0; i < kStatDim; ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
  }
}

TEST_CASE("gini") {
  CHECK(gini(std::vector<std::size_t>{5, 5, 0}) == doctest::Approx(0.5));
  CHECK(gini(std::vector<std::size_t>{4, 0, 0}) == 0.0);
  CHECK(gini(std::vector<std::size_t>{1, 1, 1}) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("votes, fractions and ties") {
  const std::vector<double> x{0.0};
  const auto unanimous = voting(0, 200, 0).predict(x);
  CHECK(unanimous.label == 1);
  CHECK(unanimous.probs == std::array<double, 3>{0.0, 1.0, 0.0});

  CHECK(voting(100, 0, 100).predict(x).label == 0);
  CHECK(voting(0, 7, 7).predict(x).label == 1);

  const auto split = voting(120, 60, 20).predict(x);
  CHECK(split.label == 0);
  CHECK(split.probs[0] == doctest::Approx(0.6));
  CHECK(split.probs[1] == doctest::Approx(0.3));
  CHECK(split.probs[2] == doctest::Approx(0.1));
}

TEST_CASE("tree routing sends ties at the threshold left") {
  Forest::Tree stump{Forest::Node{0, 0.5, 1, 2, 0}, Forest::Node{-1, 0, -1, -1, 0},
                     Forest::Node{-1, 0, -1, -1, 2}};
  const auto f = Forest::from_trees(1, {stump});
  CHECK(f.predict(std::vector<double>{0.5}).label == 0);
  CHECK(f.predict(std::vector<double>{0.51}).label == 2);
  CHECK_THROWS_AS(f.predict(std::vector<double>{0.1, 0.2}), Error);
  Forest::Tree cyclic{Forest::Node{0, 0.5, 0, 0, 0}};
  CHECK_THROWS_AS(Forest::from_trees(1, {cyclic}), Error);
}

TEST_CASE("forest fits separable data") {
  Eigen::MatrixXd x(30, 1);
  std::vector<int> y;
  for (int i = 0; i < 30; ++i) {
    x(i, 0) = i;
    y.push_back(i / 10);
  }
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.seed = 3;
  cfg.features_per_split = 1;
  const auto forest = fit_forest(x, y, cfg);
  CHECK(forest.n_trees() == 25);
  std::size_t correct = 0;
  const auto preds = forest.predict(x);
  for (int i = 0; i < 30; ++i) correct += preds[static_cast<std::size_t>(i)].label == static_cast<std::size_t>(y[static_cast<std::size_t>(i)]);
  CHECK(correct == 30);

  std::vector<int> single(30, 1);
  try {
    fit_forest(x, single, cfg);
    FAIL("expected SingleClassTrainingSet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingleClassTrainingSet);
  }
}

TEST_CASE("forest is deterministic and training accuracy bounds oob accuracy") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  for (unsigned seed = 0; seed < 3; ++seed) {
    Eigen::MatrixXd x(90, 20);
    std::vector<int> y;
    for (int i = 0; i < 90; ++i) {
      for (int j = 0; j < 20; ++j) x(i, j) = n(rng);
      y.push_back(i % 3);
    }
    ForestConfig cfg;
    cfg.n_trees = 40;
    cfg.seed = seed;
    const auto a = fit_forest(x, y, cfg);
    const auto b = fit_forest(x, y, cfg);
    const auto pa = a.predict(x), pb = b.predict(x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].probs == pb[i].probs);
      correct += pa[i].label == static_cast<std::size_t>(y[i]);
    }
    CHECK(a.oob_accuracy() == b.oob_accuracy());
    CHECK(static_cast<double>(correct) / 90.0 >= a.oob_accuracy());
  }
}

TEST_CASE("feature csv layout") {
  const std::vector<StatFeatureVector> rows{stat_features(window_of({1.0, 3.0}))};
  const std::vector<int> labels{2};
  const auto csv = format_feature_csv(rows, labels);
  CHECK(csv.rfind("gaze_x_min,gaze_x_max,", 0) == 0);
  CHECK(csv.find(",label\n") != std::string::npos);
  CHECK(csv.substr(csv.size() - 3) == ",3\n");
}

}
