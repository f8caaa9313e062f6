#include "gazetrait/types.hpp"

#include <cmath>
#include <string>

#include "gazetrait/error.hpp"

namespace gazetrait {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MalformedRow: return "MalformedRow";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::IrregularSampling: return "IrregularSampling";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::OutOfRangeResponse: return "OutOfRangeResponse";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::InsufficientParticipants: return "InsufficientParticipants";
    case ErrorCode::NoObservedSamples: return "NoObservedSamples";
    case ErrorCode::StatisticalVariantNotSequential: return "StatisticalVariantNotSequential";
    case ErrorCode::StatsProvenance: return "StatsProvenance";
    case ErrorCode::TooShortForSegmentation: return "TooShortForSegmentation";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::TooFewParticipants: return "TooFewParticipants";
    case ErrorCode::UnsupportedProtocol: return "UnsupportedProtocol";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteActivation: return "NonFiniteActivation";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::NonFiniteUpdate: return "NonFiniteUpdate";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::DivergedTraining: return "DivergedTraining";
    case ErrorCode::LeakageViolation: return "LeakageViolation";
    case ErrorCode::SingleClassTrainingSet: return "SingleClassTrainingSet";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorCode::TooFewFolds: return "TooFewFolds";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::HashMismatch: return "HashMismatch";
  }
  return "Unknown";
}

std::string_view signal_name(Signal s) noexcept {
  switch (s) {
    case Signal::GazeX: return "gaze_x";
    case Signal::GazeY: return "gaze_y";
    case Signal::Pupil: return "pupil";
    case Signal::Velocity: return "velocity";
  }
  return "?";
}

char trait_code(Trait t) noexcept { return "OCEAN"[static_cast<std::size_t>(t)]; }

Trait parse_trait(std::string_view code) {
  if (code.size() == 1) {
    for (Trait t : kAllTraits) {
      if (trait_code(t) == code[0]) return t;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "unknown trait '" + std::string(code) + "'");
}

TertileLabel label_from_index(std::size_t idx) {
  if (idx >= kNumClasses) {
    throw Error(ErrorCode::InvalidArgument, "class index out of range: " + std::to_string(idx));
  }
  return static_cast<TertileLabel>(idx + 1);
}

std::string_view label_name(TertileLabel l) noexcept {
  switch (l) {
    case TertileLabel::Low: return "Low";
    case TertileLabel::Medium: return "Medium";
    case TertileLabel::High: return "High";
  }
  return "?";
}

RecordingConfig RecordingConfig::from_rate(double rate_hz, int width_px, int height_px) {
  RecordingConfig c{rate_hz, 1.0 / rate_hz, width_px, height_px};
  c.validate();
  return c;
}

void RecordingConfig::validate() const {
  if (!(sampling_rate_hz > 0.0) || !std::isfinite(sampling_rate_hz)) {
    throw Error(ErrorCode::InvalidArgument, "sampling_rate_hz must be positive");
  }
  if (!(sampling_period_s > 0.0) || std::abs(sampling_period_s * sampling_rate_hz - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidArgument, "sampling_period_s must equal 1/sampling_rate_hz");
  }
  if (screen_width_px <= 0 || screen_height_px <= 0) {
    throw Error(ErrorCode::InvalidArgument, "screen dimensions must be positive");
  }
}

void SessionSeries::validate() const {
  config.validate();
  if (samples.size() < 2) {
    throw Error(ErrorCode::TooShort,
                participant_id.value + ": session needs at least 2 samples");
  }
  const double period = config.sampling_period_s;
  for (std::size_t t = 0; t < samples.size(); ++t) {
    if (!std::isfinite(samples[t].timestamp_s) || samples[t].timestamp_s < 0.0) {
      throw Error(ErrorCode::MalformedRow, participant_id.value + ": bad timestamp at row " +
                                               std::to_string(t + 1));
    }
    if (t == 0) continue;
    const double gap = samples[t].timestamp_s - samples[t - 1].timestamp_s;
    if (!(gap > 0.0)) {
      throw Error(ErrorCode::NonMonotonicTimestamps,
                  participant_id.value + ": timestamps not increasing at row " +
                      std::to_string(t + 1));
    }
    if (std::abs(gap - period) > 0.1 * period) {
      throw Error(ErrorCode::IrregularSampling,
                  participant_id.value + ": sample gap " + std::to_string(gap) + " s at row " +
                      std::to_string(t + 1) + " deviates from the sampling period");
    }
  }
}

std::array<double, kAugmentedDim> AugmentedFrame::flatten() const noexcept {
  std::array<double, kAugmentedDim> out{};
  for (std::size_t k = 0; k < kNumSignals; ++k) {
    const auto j = static_cast<std::size_t>(kFlatSignalOrder[k]);
    out[3 * k + 0] = values[j];
    out[3 * k + 1] = static_cast<double>(mask[j]);
    out[3 * k + 2] = gaps_s[j];
  }
  return out;
}

AugmentedFrame AugmentedFrame::unflatten(std::span<const double, kAugmentedDim> flat) {
  AugmentedFrame f;
  for (std::size_t k = 0; k < kNumSignals; ++k) {
    const auto j = static_cast<std::size_t>(kFlatSignalOrder[k]);
    f.values[j] = flat[3 * k + 0];
    f.mask[j] = flat[3 * k + 1] != 0.0 ? 1 : 0;
    f.gaps_s[j] = flat[3 * k + 2];
  }
  return f;
}

std::span<const AugmentedFrame> Window::frames(std::span<const AugmentedSequence> sequences) const {
  if (session_index >= sequences.size()) {
    throw Error(ErrorCode::InvalidArgument, "window refers to unknown session");
  }
  const auto& seq = sequences[session_index].frames;
  if (session_offset + length > seq.size()) {
    throw Error(ErrorCode::InvalidArgument, "window exceeds its session");
  }
  return std::span<const AugmentedFrame>(seq).subspan(session_offset, length);
}

void NormalizationStats::require_training_only() const {
  if (provenance != StatsProvenance::TrainingOnly) {
    throw Error(ErrorCode::StatsProvenance, "normalization stats were not fitted on training data");
  }
  if (!(pupil_std >= kStdFloor) || !(velocity_std >= kStdFloor)) {
    throw Error(ErrorCode::InvalidArgument, "normalization std below floor");
  }
}

std::size_t per_frame_dim(FeatureVariant v) noexcept {
  switch (v) {
    case FeatureVariant::Full: return 12;
    case FeatureVariant::TsGap: return 8;
    case FeatureVariant::TsOnly: return 4;
    case FeatureVariant::Statistical: return 0;
  }
  return 0;
}

std::string_view variant_name(FeatureVariant v) noexcept {
  switch (v) {
    case FeatureVariant::Full: return "full";
    case FeatureVariant::TsGap: return "ts_gap";
    case FeatureVariant::TsOnly: return "ts_only";
    case FeatureVariant::Statistical: return "statistical";
  }
  return "?";
}

std::string_view variant_label(FeatureVariant v) noexcept {
  switch (v) {
    case FeatureVariant::Full: return "Full";
    case FeatureVariant::TsGap: return "TS+Temporal Gap";
    case FeatureVariant::TsOnly: return "TS Only";
    case FeatureVariant::Statistical: return "Statistical";
  }
  return "?";
}

FeatureVariant parse_variant(std::string_view name) {
  for (FeatureVariant v : kAllVariants) {
    if (variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::ConfigError, "unknown variant '" + std::string(name) + "'");
}

std::string_view protocol_name(Protocol p) noexcept {
  switch (p) {
    case Protocol::SegmentStratified5Fold: return "segment";
    case Protocol::ParticipantStratified: return "participant";
  }
  return "?";
}

Protocol parse_protocol(std::string_view name) {
  if (name == "segment") return Protocol::SegmentStratified5Fold;
  if (name == "participant") return Protocol::ParticipantStratified;
  throw Error(ErrorCode::ConfigError, "unknown protocol '" + std::string(name) + "'");
}

}  // namespace gazetrait
