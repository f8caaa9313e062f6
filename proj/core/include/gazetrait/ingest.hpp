#pragma once

// Recording and questionnaire ingestion plus tertile labeling.
//
// Recording CSV (header required):
//   timestamp_s,left_x_px,left_y_px,right_x_px,right_y_px,left_pupil_mm,right_pupil_mm
// Empty cells and non-finite tokens are missing. Per-eye columns are merged
// by averaging whichever eyes are valid.

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gazetrait/types.hpp"

namespace gazetrait::ingest {

inline constexpr std::size_t kBfiItems = 44;

struct BfiKey {
  struct Item {
    int index = 0;  // 1-based
    Trait trait = Trait::O;
    bool reverse_scored = false;
  };
  std::vector<Item> items;

  /// Items must be exactly 1..n with each listed once.
  void validate() const;
  /// Additionally requires the full 44-item instrument with every trait covered.
  void validate_instrument() const;
};

struct TertileCuts {
  Trait trait = Trait::O;
  double cut_33 = 0.0;
  double cut_66 = 0.0;
};

struct ResponseRow {
  ParticipantId participant_id;
  std::vector<int> responses;
};

const std::vector<std::string>& recording_header();

SessionSeries parse_recording(const std::filesystem::path& path, const RecordingConfig& config);
/// Writes the monocular session into both eye columns.
std::string format_recording(const SessionSeries& session);
void write_recording(const SessionSeries& session, const std::filesystem::path& path);

/// Key CSV: item_index,trait,reverse. Validates the full instrument.
BfiKey load_bfi_key(const std::filesystem::path& path);
/// Responses CSV: participant_id,item_1,...,item_44.
std::vector<ResponseRow> load_responses(const std::filesystem::path& path);

/// Per trait, the mean over its items of r (forward) or 6 - r (reverse).
/// Traits with no items in the key are NaN. Responses must match the key size.
std::array<double, kNumTraits> score_bfi(std::span<const int> responses, const BfiKey& key);

/// Empirical quantile with linear interpolation at position q * (N - 1).
double linear_quantile(std::span<const double> values, double q);

TertileCuts fit_tertiles(std::span<const double> scores, Trait trait = Trait::O);

/// Low if score <= cut_33, Medium if score <= cut_66, High otherwise.
TertileLabel label_tertile(double score, const TertileCuts& cuts);

/// Fits per-trait cuts on the cohort and labels every participant.
std::vector<TraitProfile> build_trait_profiles(
    std::span<const ParticipantId> ids, std::span<const std::array<double, kNumTraits>> scores);

/// scores.csv: participant_id,O,C,E,A,N (continuous 1-5 scores).
std::vector<std::pair<ParticipantId, std::array<double, kNumTraits>>> load_scores(
    const std::filesystem::path& path);
std::string format_scores(std::span<const TraitProfile> profiles);

/// labels.csv: participant_id,O,C,E,A,N with tertile labels 1..3.
std::vector<TraitProfile> load_labels(const std::filesystem::path& path);
std::string format_labels(std::span<const TraitProfile> profiles);

}  // namespace gazetrait::ingest
