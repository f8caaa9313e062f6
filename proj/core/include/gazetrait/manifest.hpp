#pragma once

// Experiment manifest: a nested YAML document naming the dataset, every
// configuration block, and the experiment grid. A resolved copy is written
// next to the results as manifest.lock, with SHA-256 hashes of every input
// file; loading a lock re-verifies those hashes.
//
//   dataset:    directory: <path> | synth_spec: <path> | synth: {<spec>}
//   recording:  sampling_rate_hz, screen_width_px, screen_height_px
//   windowing:  window_len, stride, segments_per_session
//   model:      hidden_size, num_layers, head_hidden, dropout
//   train:      lr, weight_decay, clip_norm, max_epochs, early_stop_patience,
//               plateau_patience, plateau_factor, min_lr, min_delta,
//               batch_size, validation_fraction, stop_on_macro_f1
//   forest:     n_trees, max_depth, min_samples_leaf, features_per_split, bootstrap
//   experiment: variants, protocols, traits (lists or "all"), folds, seed, jobs
//   output:     directory
//   lock:       version, inputs {relative path: sha256}   (lock files only)
//
// Relative paths resolve against the manifest's directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gazetrait/baseline.hpp"
#include "gazetrait/model.hpp"
#include "gazetrait/split.hpp"
#include "gazetrait/synth.hpp"
#include "gazetrait/train.hpp"
#include "gazetrait/types.hpp"

namespace gazetrait::pipeline {

inline constexpr int kLockVersion = 1;

struct DatasetSource {
  std::filesystem::path directory;
  std::optional<synth::SynthSpec> synth;

  bool is_synthetic() const noexcept { return synth.has_value(); }
};

struct ExperimentConfig {
  std::vector<FeatureVariant> variants{FeatureVariant::Full};
  std::vector<Protocol> protocols{Protocol::SegmentStratified5Fold};
  std::vector<Trait> traits{kAllTraits.begin(), kAllTraits.end()};
  int folds = 5;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct Manifest {
  DatasetSource dataset;
  RecordingConfig recording;
  split::WindowingConfig windowing;
  model::ModelDims model;
  train::TrainConfig train;
  baseline::ForestConfig forest;
  ExperimentConfig experiment;
  std::filesystem::path output_dir = "out";
  /// Present when loaded from a lock file.
  std::optional<std::map<std::string, std::string>> locked_inputs;

  /// Throws ConfigError.
  void validate() const;
};

/// Throws ConfigError (or InvalidSpec for an inline synth block) with the
/// offending line and field.
Manifest parse_manifest(const std::string& yaml_text, const std::string& source,
                        const std::filesystem::path& base_dir);
Manifest load_manifest(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<std::vector<FeatureVariant>> variants;
  std::optional<std::vector<Protocol>> protocols;
  std::optional<std::vector<Trait>> traits;
  std::optional<std::filesystem::path> output_dir;
  std::optional<std::size_t> jobs;
};

void apply_overrides(Manifest& manifest, const Overrides& overrides);

/// "all" or a comma-separated list.
std::vector<FeatureVariant> parse_variant_list(const std::string& text);
std::vector<Protocol> parse_protocol_list(const std::string& text);
std::vector<Trait> parse_trait_list(const std::string& text);

/// Files a directory dataset reads, relative to the directory, sorted:
/// recordings/*.csv plus the label source (labels.csv, else responses.csv
/// with bfi_key.csv, else scores.csv).
std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& directory);

/// Relative path -> sha256 of every file read from a directory dataset.
std::map<std::string, std::string> hash_inputs(const Manifest& manifest);

/// Throws HashMismatch when a locked input is missing or changed.
void verify_locked_inputs(const Manifest& manifest);

/// Fully resolved manifest plus the lock section.
std::string format_lock(const Manifest& manifest, const std::map<std::string, std::string>& hashes);

}  // namespace gazetrait::pipeline
