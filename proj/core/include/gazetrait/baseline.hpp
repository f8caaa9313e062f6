#pragma once

// Non-sequential baseline: per-window descriptive statistics of the four base
// signals and a CART random forest.

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gazetrait/types.hpp"

namespace gazetrait::baseline {

inline constexpr std::size_t kStatDim = 20;
using StatFeatureVector = std::array<double, kStatDim>;

/// {min, max, mean, std, median} for gaze_x, gaze_y, pupil, velocity, in that
/// order, over observed samples only. Unobserved signals give five zeros.
/// std is the population value; the median is the lower middle for even counts.
StatFeatureVector stat_features(std::span<const AugmentedFrame> window);

/// gaze_x_min, gaze_x_max, ..., velocity_median.
const std::vector<std::string>& stat_feature_names();

/// Header of stat_feature_names() plus a trailing label column; labels are
/// 0-based class indices written as tertile labels 1..3.
std::string format_feature_csv(std::span<const StatFeatureVector> rows, std::span<const int> labels);

struct ForestConfig {
  std::size_t n_trees = 200;
  /// 0 means unlimited.
  std::size_t max_depth = 0;
  std::size_t min_samples_leaf = 1;
  std::size_t features_per_split = 5;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate() const;
};

/// 1 - sum p_c^2.
double gini(std::span<const std::size_t> class_counts);

struct Prediction {
  std::size_t label = 0;  // class index
  std::array<double, kNumClasses> probs{};
};

class Forest {
 public:
  /// Majority vote, probabilities as vote fractions; ties go to the lower class.
  Prediction predict(std::span<const double> features) const;
  std::vector<Prediction> predict(const Eigen::MatrixXd& features) const;
  /// Accuracy on out-of-bag samples (NaN if no sample was ever out of bag).
  double oob_accuracy() const noexcept { return oob_accuracy_; }
  std::size_t n_trees() const noexcept { return trees_.size(); }

  struct Node {
    int feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::size_t label = 0;
  };
  using Tree = std::vector<Node>;

  /// Assembles a forest from explicit trees; node 0 is each tree's root.
  static Forest from_trees(std::size_t n_features, std::vector<Tree> trees);

 private:
  friend Forest fit_forest(const Eigen::MatrixXd&, std::span<const int>, const ForestConfig&);
  std::size_t n_features_ = 0;
  std::vector<Tree> trees_;
  double oob_accuracy_ = 0.0;
};

/// Rows of `features` are samples; labels are class indices 0..2.
/// Throws SingleClassTrainingSet when fewer than two classes are present.
Forest fit_forest(const Eigen::MatrixXd& features, std::span<const int> labels,
                  const ForestConfig& config);

}  // namespace gazetrait::baseline
