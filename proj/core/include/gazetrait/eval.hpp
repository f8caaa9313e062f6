#pragma once

// Classification metrics, cross-validation aggregation and report files.
//
// Report layout under the output directory:
//   reports/<protocol>/<variant>/<trait>/metrics.csv
//   reports/<protocol>/<variant>/<trait>/confusion_fold<k>.csv
//   reports/summary.md, reports/summary.csv

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gazetrait/types.hpp"

namespace gazetrait::eval {

/// Rows are the true class, columns the predicted class.
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  void add(std::size_t truth, std::size_t predicted, std::size_t n = 1);
  std::size_t total() const noexcept;
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// Throws EmptyEvaluation on an empty matrix.
double accuracy(const ConfusionMatrix& cm);
/// Per-class F1 is 0 when precision + recall is 0.
double macro_f1(const ConfusionMatrix& cm);
/// Share of the most frequent true class.
double majority_share(const ConfusionMatrix& cm);

struct FoldResult {
  Trait trait = Trait::O;
  int fold = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  ConfusionMatrix confusion;
  FeatureVariant variant = FeatureVariant::Full;
  Protocol protocol = Protocol::SegmentStratified5Fold;

  static FoldResult from_confusion(Trait trait, int fold, FeatureVariant variant,
                                   Protocol protocol, const ConfusionMatrix& cm);
};

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

/// Mean and sample (N - 1) standard deviation. Throws TooFewFolds when N < 2.
MeanStd mean_std(std::span<const double> values);

struct Aggregate {
  Protocol protocol = Protocol::SegmentStratified5Fold;
  FeatureVariant variant = FeatureVariant::Full;
  Trait trait = Trait::O;
  std::size_t n_folds = 0;
  MeanStd accuracy;
  MeanStd macro_f1;
  double majority_share = 0.0;
};

/// Groups by (protocol, variant, trait) and returns groups in that sort order.
std::vector<Aggregate> aggregate(std::span<const FoldResult> results);

std::string format_confusion_csv(const ConfusionMatrix& cm);
ConfusionMatrix parse_confusion_csv(const std::string& text);

/// fold,accuracy,macro_f1,majority_share,n_windows
std::string format_metrics_csv(std::span<const FoldResult> results);

/// One Accuracy and one Macro-F1 table per protocol; variants as rows,
/// traits as columns, "mean ± std" percentages with two decimals.
std::string format_summary_markdown(std::span<const Aggregate> aggregates);
std::string format_summary_csv(std::span<const Aggregate> aggregates);

/// Full minus each other variant per trait and protocol (mean differences,
/// percentage points).
std::string format_delta_markdown(std::span<const Aggregate> aggregates);

std::filesystem::path cell_directory(const std::filesystem::path& out_dir, Protocol protocol,
                                     FeatureVariant variant, Trait trait);

/// Writes metrics.csv and confusion grids for one (protocol, variant, trait) cell.
void emit_cell(const std::filesystem::path& out_dir, std::span<const FoldResult> cell);

/// Writes every cell plus summary.md and summary.csv. Returns the aggregates.
std::vector<Aggregate> emit_report(const std::filesystem::path& out_dir,
                                   std::span<const FoldResult> results);

}  // namespace gazetrait::eval
