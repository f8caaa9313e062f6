#pragma once

// End-to-end experiment driver: dataset loading, per-fold feature fitting,
// model/forest training, evaluation, and report writing over the grid of
// (protocol, trait, fold, variant) cells.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "gazetrait/eval.hpp"
#include "gazetrait/featurize.hpp"
#include "gazetrait/manifest.hpp"
#include "gazetrait/train.hpp"

namespace gazetrait::pipeline {

struct Dataset {
  std::vector<SessionSeries> sessions;
  std::vector<TraitProfile> profiles;  // aligned with sessions
};

/// recordings/*.csv plus labels from labels.csv, responses.csv + bfi_key.csv,
/// or scores.csv (first available).
Dataset load_dataset_directory(const std::filesystem::path& dir, const RecordingConfig& config);
Dataset load_dataset(const Manifest& manifest);

/// Windows of one fold with the features every variant needs.
struct FoldData {
  int fold = 0;
  std::vector<Window> fit;
  std::vector<Window> validation;
  std::vector<Window> test;
  std::vector<AugmentedSequence> sequences;
  NormalizationStats stats;
  std::size_t short_segments = 0;
};

/// Splits, fits normalization on the fit segments only, and windows every segment.
class FoldPlanner {
 public:
  FoldPlanner(const Dataset& data, const split::WindowingConfig& windowing, Protocol protocol,
              Trait trait, int n_folds, std::uint64_t seed, double validation_fraction);

  const split::FoldPlan& plan() const noexcept { return plan_; }
  const std::vector<split::Segment>& segments() const noexcept { return segments_; }
  FoldData prepare(int fold) const;

 private:
  std::vector<featurize::SessionFeatures> features_;
  split::WindowingConfig windowing_;
  std::vector<split::Segment> segments_;
  split::FoldPlan plan_;
  std::uint64_t seed_;
  Trait trait_;
  double validation_fraction_;
};

/// Per-window model input for a sequential variant, as float.
train::WindowSet make_window_set(std::span<const Window> windows,
                                 std::span<const AugmentedSequence> sequences,
                                 FeatureVariant variant);

/// Independent seed for a grid cell.
std::uint64_t cell_seed(std::uint64_t seed, Protocol protocol, Trait trait, int fold,
                        FeatureVariant variant);

struct CellOutcome {
  eval::FoldResult result;
  std::vector<train::EpochLog> log;  // empty for the statistical variant
};

/// Trains the variant on the fold's fit (+ validation) windows and scores the test windows.
CellOutcome run_cell(const FoldData& data, FeatureVariant variant, Protocol protocol, Trait trait,
                     const Manifest& manifest);

struct RunResult {
  std::vector<eval::FoldResult> results;
  std::vector<eval::Aggregate> aggregates;
  std::vector<std::string> warnings;
};

using Logger = std::function<void(const std::string&)>;

/// Runs the whole grid and writes reports under manifest.output_dir.
RunResult run_experiment(const Manifest& manifest, const Dataset& data, const Logger& log = {});

/// Verifies locked inputs, loads the dataset, runs, and writes manifest.lock.
RunResult cmd_run(const Manifest& manifest, const Logger& log = {});
/// cmd_run with every variant, plus reports/ablation_delta.md.
RunResult cmd_ablate(Manifest manifest, const Logger& log = {});
/// Generates a synthetic dataset from a spec file. Returns the number of sessions.
std::size_t cmd_synth(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir);

}  // namespace gazetrait::pipeline
