#include "gazetrait/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"
#include "gazetrait/random.hpp"

namespace gazetrait::baseline {

namespace {

constexpr std::array<Signal, kNumSignals> kStatSignalOrder{Signal::GazeX, Signal::GazeY,
                                                           Signal::Pupil, Signal::Velocity};

}  // namespace

StatFeatureVector stat_features(std::span<const AugmentedFrame> window) {
  if (window.empty()) throw Error(ErrorCode::InvalidArgument, "empty window");
  StatFeatureVector out{};
  std::vector<double> values;
  values.reserve(window.size());
  for (std::size_t s = 0; s < kNumSignals; ++s) {
    const auto sig = static_cast<std::size_t>(kStatSignalOrder[s]);
    values.clear();
    for (const auto& f : window) {
      if (f.mask[sig]) values.push_back(f.values[sig]);
    }
    if (values.empty()) continue;
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    std::sort(values.begin(), values.end());
    double* o = out.data() + 5 * s;
    o[0] = values.front();
    o[1] = values.back();
    o[2] = mean;
    o[3] = std::sqrt(ss / n);
    o[4] = values[(values.size() - 1) / 2];
  }
  return out;
}

const std::vector<std::string>& stat_feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (Signal s : kStatSignalOrder) {
      for (const char* stat : {"min", "max", "mean", "std", "median"}) {
        n.push_back(std::string(signal_name(s)) + "_" + stat);
      }
    }
    return n;
  }();
  return names;
}

std::string format_feature_csv(std::span<const StatFeatureVector> rows,
                               std::span<const int> labels) {
  if (rows.size() != labels.size()) {
    throw Error(ErrorCode::ShapeMismatch, "feature and label counts differ");
  }
  std::ostringstream out;
  for (const auto& n : stat_feature_names()) out << n << ',';
  out << "label\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (double v : rows[i]) out << io::format_double(v) << ',';
    out << labels[i] + 1 << '\n';
  }
  return out.str();
}

void ForestConfig::validate() const {
  if (n_trees < 1) throw Error(ErrorCode::InvalidArgument, "n_trees must be >= 1");
  if (min_samples_leaf < 1) throw Error(ErrorCode::InvalidArgument, "min_samples_leaf must be >= 1");
  if (features_per_split < 1) {
    throw Error(ErrorCode::InvalidArgument, "features_per_split must be >= 1");
  }
}

double gini(std::span<const std::size_t> class_counts) {
  const double total =
      static_cast<double>(std::accumulate(class_counts.begin(), class_counts.end(), std::size_t{0}));
  if (total == 0.0) return 0.0;
  double sum = 0.0;
  for (std::size_t c : class_counts) {
    const double p = static_cast<double>(c) / total;
    sum += p * p;
  }
  return 1.0 - sum;
}

namespace {

using Counts = std::array<std::size_t, kNumClasses>;

std::size_t majority(const Counts& counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return best;
}

double weighted_gini(const Counts& left, std::size_t nl, const Counts& right, std::size_t nr) {
  auto sum_sq = [](const Counts& c) {
    double s = 0.0;
    for (std::size_t v : c) s += static_cast<double>(v) * static_cast<double>(v);
    return s;
  };
  // n * weighted impurity = nl - sum_l^2/nl + nr - sum_r^2/nr; the constant drops out.
  return -(sum_sq(left) / static_cast<double>(nl) + sum_sq(right) / static_cast<double>(nr));
}

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const int> y, const ForestConfig& config, Rng& rng)
      : x_(x), y_(y), config_(config), rng_(rng) {}

  Forest::Tree build(std::vector<std::size_t> samples) {
    tree_.clear();
    grow(samples, 0, samples.size(), 1);
    return std::move(tree_);
  }

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = std::numeric_limits<double>::infinity();
  };

  int grow(std::vector<std::size_t>& s, std::size_t begin, std::size_t end, std::size_t depth) {
    Counts counts{};
    for (std::size_t i = begin; i < end; ++i) ++counts[static_cast<std::size_t>(y_[s[i]])];
    const int id = static_cast<int>(tree_.size());
    tree_.push_back(Forest::Node{});
    tree_[static_cast<std::size_t>(id)].label = majority(counts);

    const std::size_t n = end - begin;
    const bool pure = std::count(counts.begin(), counts.end(), 0) == kNumClasses - 1;
    const bool depth_capped = config_.max_depth > 0 && depth >= config_.max_depth;
    if (pure || depth_capped || n < 2 * config_.min_samples_leaf) return id;

    const Split split = find_split(s, begin, end);
    if (split.feature < 0) return id;

    const auto mid = std::partition(s.begin() + static_cast<std::ptrdiff_t>(begin),
                                    s.begin() + static_cast<std::ptrdiff_t>(end),
                                    [&](std::size_t i) { return x_(static_cast<Eigen::Index>(i), split.feature) <= split.threshold; });
    const std::size_t m = static_cast<std::size_t>(mid - s.begin());
    const int left = grow(s, begin, m, depth + 1);
    const int right = grow(s, m, end, depth + 1);
    auto& node = tree_[static_cast<std::size_t>(id)];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  // Draws features in random order; keeps drawing past `features_per_split`
  // only while no candidate has produced a valid split.
  Split find_split(const std::vector<std::size_t>& s, std::size_t begin, std::size_t end) {
    const auto d = static_cast<std::size_t>(x_.cols());
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    std::shuffle(features.begin(), features.end(), rng_);
    Split best;
    std::vector<std::pair<double, int>> column(end - begin);
    for (std::size_t k = 0; k < d; ++k) {
      if (k >= config_.features_per_split && best.feature >= 0) break;
      const auto f = static_cast<Eigen::Index>(features[k]);
      for (std::size_t i = begin; i < end; ++i) {
        column[i - begin] = {x_(static_cast<Eigen::Index>(s[i]), f), y_[s[i]]};
      }
      std::sort(column.begin(), column.end());
      Counts left{}, right{};
      for (const auto& [v, c] : column) ++right[static_cast<std::size_t>(c)];
      const std::size_t n = column.size();
      for (std::size_t i = 0; i + 1 < n; ++i) {
        const auto c = static_cast<std::size_t>(column[i].second);
        ++left[c];
        --right[c];
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < config_.min_samples_leaf || nr < config_.min_samples_leaf) continue;
        const double score = weighted_gini(left, nl, right, nr);
        if (score < best.score) {
          best.score = score;
          best.feature = static_cast<int>(f);
          best.threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const int> y_;
  const ForestConfig& config_;
  Rng& rng_;
  Forest::Tree tree_;
};

std::size_t tree_predict(const Forest::Tree& tree, std::span<const double> x) {
  std::size_t i = 0;
  while (tree[i].feature >= 0) {
    const auto& node = tree[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                     ? node.left
                                     : node.right);
  }
  return tree[i].label;
}

}  // namespace

Forest Forest::from_trees(std::size_t n_features, std::vector<Tree> trees) {
  for (const auto& tree : trees) {
    if (tree.empty()) throw Error(ErrorCode::InvalidArgument, "empty tree");
    const auto n = static_cast<int>(tree.size());
    for (int i = 0; i < n; ++i) {
      const auto& node = tree[static_cast<std::size_t>(i)];
      if (node.feature < 0) {
        if (node.label >= kNumClasses) throw Error(ErrorCode::InvalidArgument, "leaf label out of range");
        continue;
      }
      // Children after their parent rules out cycles.
      if (static_cast<std::size_t>(node.feature) >= n_features || node.left <= i ||
          node.right <= i || node.left >= n || node.right >= n) {
        throw Error(ErrorCode::InvalidArgument, "malformed tree node");
      }
    }
  }
  Forest f;
  f.n_features_ = n_features;
  f.trees_ = std::move(trees);
  f.oob_accuracy_ = std::numeric_limits<double>::quiet_NaN();
  return f;
}

Prediction Forest::predict(std::span<const double> features) const {
  if (features.size() != n_features_) {
    throw Error(ErrorCode::ShapeMismatch, "feature vector has the wrong width");
  }
  Counts votes{};
  for (const auto& tree : trees_) ++votes[tree_predict(tree, features)];
  Prediction p;
  p.label = majority(votes);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p.probs[c] = static_cast<double>(votes[c]) / static_cast<double>(trees_.size());
  }
  return p;
}

std::vector<Prediction> Forest::predict(const Eigen::MatrixXd& features) const {
  std::vector<Prediction> out;
  out.reserve(static_cast<std::size_t>(features.rows()));
  std::vector<double> row(static_cast<std::size_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) row[static_cast<std::size_t>(j)] = features(i, j);
    out.push_back(predict(row));
  }
  return out;
}

Forest fit_forest(const Eigen::MatrixXd& features, std::span<const int> labels,
                  const ForestConfig& config) {
  config.validate();
  const auto n = static_cast<std::size_t>(features.rows());
  if (n != labels.size()) throw Error(ErrorCode::ShapeMismatch, "feature and label counts differ");
  std::set<int> classes;
  for (int y : labels) {
    if (y < 0 || y >= static_cast<int>(kNumClasses)) {
      throw Error(ErrorCode::InvalidArgument, "label out of range");
    }
    classes.insert(y);
  }
  if (classes.size() < 2) {
    throw Error(ErrorCode::SingleClassTrainingSet, "random forest needs at least two classes");
  }

  Forest forest;
  forest.n_features_ = static_cast<std::size_t>(features.cols());
  Rng rng = make_rng({config.seed, key(Stream::Forest)});
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Counts> oob_votes(n, Counts{});
  std::vector<char> in_bag(n);
  std::vector<double> row(forest.n_features_);
  TreeBuilder builder(features, labels, config, rng);

  for (std::size_t t = 0; t < config.n_trees; ++t) {
    std::vector<std::size_t> sample(n);
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      sample[i] = config.bootstrap ? pick(rng) : i;
      in_bag[sample[i]] = 1;
    }
    forest.trees_.push_back(builder.build(std::move(sample)));
    for (std::size_t i = 0; i < n; ++i) {
      if (in_bag[i]) continue;
      for (std::size_t j = 0; j < row.size(); ++j) row[j] = features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      ++oob_votes[i][tree_predict(forest.trees_.back(), row)];
    }
  }

  std::size_t scored = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (std::accumulate(oob_votes[i].begin(), oob_votes[i].end(), std::size_t{0}) == 0) continue;
    ++scored;
    if (majority(oob_votes[i]) == static_cast<std::size_t>(labels[i])) ++correct;
  }
  forest.oob_accuracy_ = scored ? static_cast<double>(correct) / static_cast<double>(scored)
                                : std::numeric_limits<double>::quiet_NaN();
  return forest;
}

}  // namespace gazetrait::baseline
