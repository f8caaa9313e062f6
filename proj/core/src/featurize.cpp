#include "gazetrait/featurize.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"

namespace gazetrait::featurize {

std::vector<std::optional<double>> compute_velocity(const SessionSeries& series) {
  const auto& s = series.samples;
  std::vector<std::optional<double>> v(s.size());
  if (s.empty()) return v;
  v[0] = 0.0;
  const double dt = series.config.sampling_period_s;
  for (std::size_t t = 1; t < s.size(); ++t) {
    const auto& a = s[t - 1];
    const auto& b = s[t];
    if (a.gaze_x_px && a.gaze_y_px && b.gaze_x_px && b.gaze_y_px) {
      v[t] = std::hypot(*b.gaze_x_px - *a.gaze_x_px, *b.gaze_y_px - *a.gaze_y_px) / dt;
    }
  }
  return v;
}

namespace {

double normalize_axis(double px, int extent, bool& clamped) {
  const double g = 2.0 * px / extent - 1.0;
  if (g < -1.0 || g > 1.0) {
    clamped = true;
    return std::clamp(g, -1.0, 1.0);
  }
  return g;
}

}  // namespace

std::pair<double, double> normalize_gaze(double x_px, double y_px, const RecordingConfig& config,
                                         std::size_t* clamp_count) {
  bool clamped = false;
  const double gx = normalize_axis(x_px, config.screen_width_px, clamped);
  const double gy = normalize_axis(y_px, config.screen_height_px, clamped);
  if (clamped && clamp_count) ++*clamp_count;
  return {gx, gy};
}

SessionFeatures prepare_session(const SessionSeries& series) {
  series.validate();
  SessionFeatures out;
  out.participant_id = series.participant_id;
  out.config = series.config;
  out.frames.resize(series.size());
  const auto velocity = compute_velocity(series);
  for (std::size_t t = 0; t < series.size(); ++t) {
    const auto& s = series.samples[t];
    auto& f = out.frames[t].values;
    bool clamped = false;
    if (s.gaze_x_px) {
      f[static_cast<std::size_t>(Signal::GazeX)] =
          normalize_axis(*s.gaze_x_px, series.config.screen_width_px, clamped);
    }
    if (s.gaze_y_px) {
      f[static_cast<std::size_t>(Signal::GazeY)] =
          normalize_axis(*s.gaze_y_px, series.config.screen_height_px, clamped);
    }
    if (clamped) ++out.clamped_samples;
    f[static_cast<std::size_t>(Signal::Pupil)] = s.pupil_mm;
    f[static_cast<std::size_t>(Signal::Velocity)] = velocity[t];
  }
  return out;
}

void NormalizationFitter::Moments::push(double x) {
  ++n;
  const double delta = x - mean;
  mean += delta / static_cast<double>(n);
  m2 += delta * (x - mean);
}

void NormalizationFitter::add(const SessionFeatures& session, std::size_t begin, std::size_t end) {
  end = std::min(end, session.frames.size());
  for (std::size_t t = begin; t < end; ++t) {
    if (auto p = session.frames[t][Signal::Pupil]) pupil_.push(*p);
    if (auto v = session.frames[t][Signal::Velocity]) velocity_.push(*v);
  }
}

NormalizationStats NormalizationFitter::finish() const {
  if (pupil_.n == 0) throw Error(ErrorCode::NoObservedSamples, "no observed pupil samples");
  if (velocity_.n == 0) throw Error(ErrorCode::NoObservedSamples, "no observed velocity samples");
  auto pop_std = [](const Moments& m) {
    return std::max(std::sqrt(m.m2 / static_cast<double>(m.n)), kStdFloor);
  };
  NormalizationStats stats;
  stats.pupil_mean = pupil_.mean;
  stats.pupil_std = pop_std(pupil_);
  stats.velocity_mean = velocity_.mean;
  stats.velocity_std = pop_std(velocity_);
  stats.provenance = StatsProvenance::TrainingOnly;
  return stats;
}

NormalizationStats fit_normalization(std::span<const SessionFeatures> training_sessions) {
  NormalizationFitter fitter;
  for (const auto& s : training_sessions) fitter.add(s);
  return fitter.finish();
}

std::vector<FeatureFrame> apply_normalization(const SessionFeatures& session,
                                              const NormalizationStats& stats) {
  stats.require_training_only();
  std::vector<FeatureFrame> out = session.frames;
  for (auto& f : out) {
    auto& p = f.values[static_cast<std::size_t>(Signal::Pupil)];
    auto& v = f.values[static_cast<std::size_t>(Signal::Velocity)];
    if (p) p = standardize(*p, stats.pupil_mean, stats.pupil_std);
    if (v) v = standardize(*v, stats.velocity_mean, stats.velocity_std);
  }
  return out;
}

std::vector<AugmentedFrame> augment(std::span<const FeatureFrame> frames,
                                    const RecordingConfig& config) {
  const double dt = config.sampling_period_s;
  std::vector<AugmentedFrame> out(frames.size());
  // The gap recursion (0 on observation, previous + dt otherwise) is carried
  // as an integer run length so the result is exactly run_length * dt.
  std::array<std::size_t, kNumSignals> run{};
  for (std::size_t t = 0; t < frames.size(); ++t) {
    for (std::size_t j = 0; j < kNumSignals; ++j) {
      const auto& v = frames[t].values[j];
      auto& a = out[t];
      if (v) {
        a.values[j] = *v;
        a.mask[j] = 1;
        run[j] = 0;
        a.gaps_s[j] = 0.0;
      } else {
        a.values[j] = 0.0;
        a.mask[j] = 0;
        ++run[j];
        a.gaps_s[j] = static_cast<double>(run[j]) * dt;
      }
    }
  }
  return out;
}

Eigen::MatrixXd select_variant(std::span<const AugmentedFrame> frames, FeatureVariant variant) {
  if (variant == FeatureVariant::Statistical) {
    throw Error(ErrorCode::StatisticalVariantNotSequential,
                "the statistical variant has no per-frame representation");
  }
  const auto dim = static_cast<Eigen::Index>(per_frame_dim(variant));
  Eigen::MatrixXd out(dim, static_cast<Eigen::Index>(frames.size()));
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& f = frames[t];
    const auto col = static_cast<Eigen::Index>(t);
    Eigen::Index r = 0;
    for (Signal s : kFlatSignalOrder) {
      const auto j = static_cast<std::size_t>(s);
      out(r++, col) = f.values[j];
      if (variant == FeatureVariant::Full) out(r++, col) = f.mask[j];
      if (variant != FeatureVariant::TsOnly) out(r++, col) = f.gaps_s[j];
    }
  }
  return out;
}

std::vector<std::string> variant_columns(FeatureVariant variant) {
  if (variant == FeatureVariant::Statistical) {
    throw Error(ErrorCode::StatisticalVariantNotSequential,
                "the statistical variant has no per-frame representation");
  }
  std::vector<std::string> cols;
  for (Signal s : kFlatSignalOrder) {
    const std::string name(signal_name(s));
    cols.push_back(name);
    if (variant == FeatureVariant::Full) cols.push_back(name + "_mask");
    if (variant != FeatureVariant::TsOnly) cols.push_back(name + "_gap");
  }
  return cols;
}

std::string format_augmented_csv(std::span<const AugmentedSequence> sequences) {
  std::ostringstream out;
  out << "participant_id,timestep";
  for (const auto& c : variant_columns(FeatureVariant::Full)) out << ',' << c;
  out << '\n';
  for (const auto& seq : sequences) {
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
      out << seq.participant_id.value << ',' << t + 1;
      const auto flat = seq.frames[t].flatten();
      for (std::size_t k = 0; k < flat.size(); ++k) {
        if (k % 3 == 1) {
          out << ',' << static_cast<int>(flat[k]);
        } else {
          out << ',' << io::format_double(flat[k]);
        }
      }
      out << '\n';
    }
  }
  return out.str();
}

std::vector<AugmentedSequence> parse_augmented_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::SchemaMismatch, "empty augmented CSV");
  std::vector<AugmentedSequence> out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ++row;
    const auto cells = io::split_row(line);
    if (cells.size() != 2 + kAugmentedDim) {
      throw Error(ErrorCode::MalformedRow, "row " + std::to_string(row) + ": wrong column count");
    }
    const std::string pid(cells[0]);
    if (out.empty() || out.back().participant_id.value != pid) {
      out.push_back(AugmentedSequence{ParticipantId{pid}, {}});
    }
    std::array<double, kAugmentedDim> flat{};
    for (std::size_t k = 0; k < kAugmentedDim; ++k) flat[k] = io::parse_double(cells[k + 2], row);
    out.back().frames.push_back(AugmentedFrame::unflatten(flat));
  }
  return out;
}

}  // namespace gazetrait::featurize
