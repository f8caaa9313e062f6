#pragma once

// Per-timestep feature construction: velocity, gaze normalization, z-scoring,
// validity masks, temporal gaps, and the per-variant flat input layout.

#include <Eigen/Core>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gazetrait/types.hpp"

namespace gazetrait::featurize {

/// v_1 = 0; v_t = |g_t - g_{t-1}| / dt in px/s, missing when either position is missing.
std::vector<std::optional<double>> compute_velocity(const SessionSeries& series);

/// Maps pixel coordinates to [-1, 1]^2. Off-screen input is clamped and
/// counted in `clamp_count` when provided.
std::pair<double, double> normalize_gaze(double x_px, double y_px, const RecordingConfig& config,
                                         std::size_t* clamp_count = nullptr);

/// Session with normalized gaze but raw pupil (mm) and raw velocity (px/s);
/// everything that does not depend on training-set statistics.
struct SessionFeatures {
  ParticipantId participant_id;
  RecordingConfig config;
  std::vector<FeatureFrame> frames;
  std::size_t clamped_samples = 0;
};

SessionFeatures prepare_session(const SessionSeries& series);

/// Accumulates observed pupil and velocity samples over index ranges of
/// training sessions.
class NormalizationFitter {
 public:
  void add(const SessionFeatures& session, std::size_t begin, std::size_t end);
  void add(const SessionFeatures& session) { add(session, 0, session.frames.size()); }
  /// Throws NoObservedSamples if either signal was never observed.
  NormalizationStats finish() const;

 private:
  struct Moments {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
    void push(double x);
  };
  Moments pupil_;
  Moments velocity_;
};

NormalizationStats fit_normalization(std::span<const SessionFeatures> training_sessions);

inline double standardize(double value, double mean, double std) { return (value - mean) / std; }

/// Applies z-scores to pupil and velocity. Requires training-only stats.
std::vector<FeatureFrame> apply_normalization(const SessionFeatures& session,
                                              const NormalizationStats& stats);

/// Replaces missing values by 0, builds masks and temporal gaps.
std::vector<AugmentedFrame> augment(std::span<const FeatureFrame> frames,
                                    const RecordingConfig& config);

/// Per-timestep flat vectors, one column per frame.
///   Full   -> 12 rows (value, mask, gap) per signal
///   TsGap  ->  8 rows (value, gap) per signal
///   TsOnly ->  4 rows (value) per signal
/// Signals are ordered gaze_x, gaze_y, velocity, pupil.
Eigen::MatrixXd select_variant(std::span<const AugmentedFrame> frames, FeatureVariant variant);

/// Column names of select_variant's rows.
std::vector<std::string> variant_columns(FeatureVariant variant);

/// participant_id,timestep + the 12 Full columns.
std::string format_augmented_csv(std::span<const AugmentedSequence> sequences);
std::vector<AugmentedSequence> parse_augmented_csv(const std::string& text);

}  // namespace gazetrait::featurize
