#pragma once

// Domain types shared across the pipeline. All types are plain values;
// construction-time invariants are checked by the validate() members and by
// the operations that produce them.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace gazetrait {

/// Number of base signals per timestep.
inline constexpr std::size_t kNumSignals = 4;
/// Flattened augmented frame width: (value, mask, gap) per signal.
inline constexpr std::size_t kAugmentedDim = 3 * kNumSignals;
inline constexpr std::size_t kNumTraits = 5;
inline constexpr std::size_t kNumClasses = 3;
/// Floor applied to fitted standard deviations.
inline constexpr double kStdFloor = 1e-8;

/// Signal order inside FeatureFrame / AugmentedFrame arrays.
enum class Signal : std::size_t { GazeX = 0, GazeY = 1, Pupil = 2, Velocity = 3 };

/// Signal order used when flattening a frame into a model input vector:
/// gaze_x, gaze_y, velocity, pupil.
inline constexpr std::array<Signal, kNumSignals> kFlatSignalOrder{
    Signal::GazeX, Signal::GazeY, Signal::Velocity, Signal::Pupil};

std::string_view signal_name(Signal s) noexcept;

enum class Trait : std::size_t { O = 0, C = 1, E = 2, A = 3, N = 4 };
inline constexpr std::array<Trait, kNumTraits> kAllTraits{Trait::O, Trait::C, Trait::E,
                                                         Trait::A, Trait::N};
char trait_code(Trait t) noexcept;
Trait parse_trait(std::string_view code);

enum class TertileLabel : std::uint8_t { Low = 1, Medium = 2, High = 3 };

/// Zero-based class index used by the classifiers (Low -> 0).
inline constexpr std::size_t class_index(TertileLabel l) noexcept {
  return static_cast<std::size_t>(l) - 1;
}
TertileLabel label_from_index(std::size_t idx);
std::string_view label_name(TertileLabel l) noexcept;

struct ParticipantId {
  std::string value;
  friend auto operator<=>(const ParticipantId&, const ParticipantId&) = default;
};

struct RecordingConfig {
  double sampling_rate_hz = 60.0;
  double sampling_period_s = 1.0 / 60.0;
  int screen_width_px = 1024;
  int screen_height_px = 576;

  static RecordingConfig from_rate(double rate_hz, int width_px, int height_px);
  void validate() const;
  friend bool operator==(const RecordingConfig&, const RecordingConfig&) = default;
};

struct GazeSample {
  double timestamp_s = 0.0;
  std::optional<double> gaze_x_px;
  std::optional<double> gaze_y_px;
  std::optional<double> pupil_mm;
  friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

struct SessionSeries {
  ParticipantId participant_id;
  std::vector<GazeSample> samples;
  RecordingConfig config;

  /// Throws TooShort / NonMonotonicTimestamps / IrregularSampling.
  void validate() const;
  std::size_t size() const noexcept { return samples.size(); }
  friend bool operator==(const SessionSeries&, const SessionSeries&) = default;
};

struct FeatureFrame {
  std::array<std::optional<double>, kNumSignals> values;

  std::optional<double> operator[](Signal s) const { return values[static_cast<std::size_t>(s)]; }
  friend bool operator==(const FeatureFrame&, const FeatureFrame&) = default;
};

struct AugmentedFrame {
  std::array<double, kNumSignals> values{};
  std::array<std::uint8_t, kNumSignals> mask{};
  std::array<double, kNumSignals> gaps_s{};

  /// 12-d vector in (value, mask, gap) x (gaze_x, gaze_y, velocity, pupil) order.
  std::array<double, kAugmentedDim> flatten() const noexcept;
  static AugmentedFrame unflatten(std::span<const double, kAugmentedDim> flat);
  friend bool operator==(const AugmentedFrame&, const AugmentedFrame&) = default;
};

struct AugmentedSequence {
  ParticipantId participant_id;
  std::vector<AugmentedFrame> frames;
  friend bool operator==(const AugmentedSequence&, const AugmentedSequence&) = default;
};

/// A fixed-length slice of one participant's augmented sequence, stored as
/// an index range. Windows never span a segment boundary.
struct Window {
  ParticipantId participant_id;
  std::size_t session_index = 0;
  std::size_t segment_id = 0;
  /// 1-based start within the segment.
  std::size_t start_index = 1;
  /// 0-based first timestep within the session.
  std::size_t session_offset = 0;
  std::size_t length = 0;
  TertileLabel label = TertileLabel::Low;
  int fold = -1;

  std::span<const AugmentedFrame> frames(std::span<const AugmentedSequence> sequences) const;
  friend bool operator==(const Window&, const Window&) = default;
};

struct TraitProfile {
  ParticipantId participant_id;
  std::array<double, kNumTraits> scores{};
  std::array<TertileLabel, kNumTraits> labels{};

  TertileLabel label(Trait t) const { return labels[static_cast<std::size_t>(t)]; }
  double score(Trait t) const { return scores[static_cast<std::size_t>(t)]; }
  friend bool operator==(const TraitProfile&, const TraitProfile&) = default;
};

enum class StatsProvenance : std::uint8_t { Unset = 0, TrainingOnly = 1 };

struct NormalizationStats {
  double pupil_mean = 0.0;
  double pupil_std = 1.0;
  double velocity_mean = 0.0;
  double velocity_std = 1.0;
  StatsProvenance provenance = StatsProvenance::Unset;

  /// Throws StatsProvenance when not fitted on training data only.
  void require_training_only() const;
  friend bool operator==(const NormalizationStats&, const NormalizationStats&) = default;
};

enum class FeatureVariant { Full, TsGap, TsOnly, Statistical };
inline constexpr std::array<FeatureVariant, 4> kAllVariants{
    FeatureVariant::Full, FeatureVariant::TsGap, FeatureVariant::TsOnly,
    FeatureVariant::Statistical};

/// Per-frame input width of a sequential variant; 0 for Statistical.
std::size_t per_frame_dim(FeatureVariant v) noexcept;
std::string_view variant_name(FeatureVariant v) noexcept;
std::string_view variant_label(FeatureVariant v) noexcept;
FeatureVariant parse_variant(std::string_view name);

enum class Protocol { SegmentStratified5Fold, ParticipantStratified };
std::string_view protocol_name(Protocol p) noexcept;
Protocol parse_protocol(std::string_view name);

}  // namespace gazetrait
