#pragma once

// Seeded synthetic gaze sessions with class-conditioned fixation dynamics
// and Markov missingness, plus the likelihood classifier that reads only the
// missingness channel.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gazetrait/types.hpp"

namespace gazetrait::synth {

struct ClassProfile {
  TertileLabel label = TertileLabel::Low;
  double fixation_dwell_mean_s = 0.3;
  /// Rate of small corrective shifts of the fixation point while fixating.
  double saccade_rate_hz = 2.0;
  double saccade_amplitude_px = 150.0;
  double pupil_baseline_mm = 3.5;
  double pupil_noise_mm = 0.15;
  double missing_rate = 0.0;
  double gap_len_mean_s = 0.1;
};

enum class SignalMode { DynamicsOnly, MissingnessOnly, Both };
std::string_view mode_name(SignalMode m) noexcept;
SignalMode parse_mode(std::string_view name);

struct SynthSpec {
  std::size_t n_participants_per_class = 10;
  std::size_t session_len_samples = 6000;
  std::array<ClassProfile, kNumClasses> profiles{};
  std::uint64_t seed = 0;
  SignalMode mode = SignalMode::Both;
  RecordingConfig recording;
  /// Standard deviation of isotropic fixation jitter, truncated at 3 sd.
  double fixation_jitter_px = 1.5;
  std::size_t min_session_len = 100;

  /// Throws InvalidSpec.
  void validate() const;
  /// Profile actually used for a class once the mode's sharing rules apply:
  /// missingness-only shares the Low profile's dynamics, dynamics-only shares
  /// its missingness parameters.
  ClassProfile effective_profile(std::size_t class_idx) const;
};

/// Two-state observed/missing chain: P(obs -> miss) = a, P(miss -> obs) = b,
/// with b = 1 / (gap_len_mean_s * fs) and a chosen so that the stationary
/// missing probability equals missing_rate.
struct MissingnessChain {
  double a = 0.0;
  double b = 1.0;
  double stationary_missing = 0.0;

  static MissingnessChain from_profile(const ClassProfile& p, double sampling_rate_hz);
};

struct SyntheticDataset {
  std::vector<SessionSeries> sessions;
  std::vector<TraitProfile> profiles;  // aligned with sessions
  std::vector<std::size_t> classes;    // generating class index per session
};

SyntheticDataset generate(const SynthSpec& spec);

/// recordings/<pid>.csv, labels.csv and scores.csv under `out_dir`.
void write_dataset(const SyntheticDataset& data, const std::filesystem::path& out_dir);

/// Parses the YAML spec format; errors are InvalidSpec with line and field.
SynthSpec parse_spec(const std::string& yaml_text);
SynthSpec load_spec(const std::filesystem::path& path);
std::string format_spec(const SynthSpec& spec);

/// Exact per-class log-likelihood of a gaze validity sequence (1 = observed)
/// under each class's missingness chain, maximized over classes.
class BayesGapOracle {
 public:
  explicit BayesGapOracle(const SynthSpec& spec);

  std::array<double, kNumClasses> log_likelihoods(std::span<const std::uint8_t> observed) const;
  /// Ties go to the lower class index.
  std::size_t classify(std::span<const std::uint8_t> observed) const;

 private:
  std::array<MissingnessChain, kNumClasses> chains_;
};

/// Monte Carlo accuracy of the oracle on freshly simulated windows.
double oracle_accuracy_mc(const SynthSpec& spec, std::size_t window_len,
                          std::size_t windows_per_class, std::uint64_t seed);

}  // namespace gazetrait::synth
