#include "gazetrait/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/ingest.hpp"
#include "gazetrait/io.hpp"
#include "gazetrait/random.hpp"
#include "synth_yaml.hpp"

namespace gazetrait::synth {

std::string_view mode_name(SignalMode m) noexcept {
  switch (m) {
    case SignalMode::DynamicsOnly: return "dynamics-only";
    case SignalMode::MissingnessOnly: return "missingness-only";
    case SignalMode::Both: return "both";
  }
  return "?";
}

SignalMode parse_mode(std::string_view name) {
  for (SignalMode m : {SignalMode::DynamicsOnly, SignalMode::MissingnessOnly, SignalMode::Both}) {
    if (mode_name(m) == name) return m;
  }
  throw Error(ErrorCode::InvalidSpec, "unknown signal mode '" + std::string(name) + "'");
}

namespace {

double jitter_margin(const SynthSpec& spec) { return 3.0 * spec.fixation_jitter_px + 1.0; }

void invalid(const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); }

}  // namespace

void SynthSpec::validate() const {
  if (n_participants_per_class < 1) invalid("participants_per_class must be >= 1");
  if (session_len_samples < std::max<std::size_t>(min_session_len, 2)) {
    invalid("session_len_samples must be at least " + std::to_string(min_session_len));
  }
  try {
    recording.validate();
  } catch (const Error& e) {
    invalid(e.what());
  }
  if (!(fixation_jitter_px >= 0.0)) invalid("fixation_jitter_px must be >= 0");
  const double m = jitter_margin(*this);
  if (recording.screen_width_px <= 2 * m || recording.screen_height_px <= 2 * m) {
    invalid("screen too small for the fixation jitter");
  }
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& p = profiles[c];
    const std::string name(label_name(label_from_index(c)));
    if (p.label != label_from_index(c)) invalid("profile " + name + " carries the wrong label");
    if (!(p.fixation_dwell_mean_s > 0) || !(p.saccade_rate_hz > 0) ||
        !(p.saccade_amplitude_px > 0) || !(p.pupil_baseline_mm > 0) || !(p.gap_len_mean_s > 0)) {
      invalid("profile " + name + ": scale parameters must be positive");
    }
    if (!(p.pupil_noise_mm >= 0)) invalid("profile " + name + ": pupil_noise_mm must be >= 0");
    if (!(p.missing_rate >= 0 && p.missing_rate < 1)) {
      invalid("profile " + name + ": missing_rate must be in [0, 1)");
    }
    const auto chain = MissingnessChain::from_profile(p, recording.sampling_rate_hz);
    if (chain.b > 1.0 || chain.a > 1.0) {
      invalid("profile " + name + ": gap_len_mean_s and missing_rate imply a transition "
              "probability above 1 at this sampling rate");
    }
  }
}

ClassProfile SynthSpec::effective_profile(std::size_t class_idx) const {
  ClassProfile p = profiles.at(class_idx);
  const ClassProfile& shared = profiles[0];
  if (mode == SignalMode::MissingnessOnly) {
    p.fixation_dwell_mean_s = shared.fixation_dwell_mean_s;
    p.saccade_rate_hz = shared.saccade_rate_hz;
    p.saccade_amplitude_px = shared.saccade_amplitude_px;
    p.pupil_baseline_mm = shared.pupil_baseline_mm;
    p.pupil_noise_mm = shared.pupil_noise_mm;
  } else if (mode == SignalMode::DynamicsOnly) {
    p.missing_rate = shared.missing_rate;
    p.gap_len_mean_s = shared.gap_len_mean_s;
  }
  return p;
}

MissingnessChain MissingnessChain::from_profile(const ClassProfile& p, double sampling_rate_hz) {
  MissingnessChain c;
  c.b = 1.0 / (p.gap_len_mean_s * sampling_rate_hz);
  c.a = p.missing_rate * c.b / (1.0 - p.missing_rate);
  c.stationary_missing = p.missing_rate;
  return c;
}

namespace {

class MissingnessProcess {
 public:
  MissingnessProcess(const MissingnessChain& chain, Rng& rng) : chain_(chain) {
    missing_ = std::bernoulli_distribution(chain.stationary_missing)(rng);
  }
  bool missing() const { return missing_; }
  void advance(Rng& rng) {
    const double p = missing_ ? chain_.b : chain_.a;
    if (std::bernoulli_distribution(p)(rng)) missing_ = !missing_;
  }

 private:
  MissingnessChain chain_;
  bool missing_ = false;
};

struct Point {
  double x = 0.0;
  double y = 0.0;
};

class FixationProcess {
 public:
  FixationProcess(const ClassProfile& p, const SynthSpec& spec, Rng& rng)
      : p_(p), fs_(spec.recording.sampling_rate_hz), jitter_(spec.fixation_jitter_px) {
    const double m = jitter_margin(spec);
    lo_ = {m, m};
    hi_ = {spec.recording.screen_width_px - m, spec.recording.screen_height_px - m};
    center_ = uniform_point(rng);
    dwell_left_ = draw_dwell(rng);
  }

  Point next(Rng& rng) {
    if (dwell_left_ == 0) {
      saccade(rng);
      dwell_left_ = draw_dwell(rng);
    } else if (std::bernoulli_distribution(std::min(1.0, p_.saccade_rate_hz / fs_))(rng)) {
      shift(0.1 * p_.saccade_amplitude_px, rng);
    }
    --dwell_left_;
    return {center_.x + truncated_noise(rng), center_.y + truncated_noise(rng)};
  }

 private:
  bool inside(const Point& q) const {
    return q.x >= lo_.x && q.x <= hi_.x && q.y >= lo_.y && q.y <= hi_.y;
  }

  Point uniform_point(Rng& rng) const {
    return {std::uniform_real_distribution<double>(lo_.x, hi_.x)(rng),
            std::uniform_real_distribution<double>(lo_.y, hi_.y)(rng)};
  }

  bool shift(double amplitude, Rng& rng) {
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    const double th = angle(rng);
    const Point q{center_.x + amplitude * std::cos(th), center_.y + amplitude * std::sin(th)};
    if (!inside(q)) return false;
    center_ = q;
    return true;
  }

  void saccade(Rng& rng) {
    for (int attempt = 0; attempt < 32; ++attempt) {
      if (shift(p_.saccade_amplitude_px, rng)) return;
    }
    center_ = uniform_point(rng);
  }

  std::size_t draw_dwell(Rng& rng) const {
    const double s = std::exponential_distribution<double>(1.0 / p_.fixation_dwell_mean_s)(rng);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(s * fs_)));
  }

  double truncated_noise(Rng& rng) const {
    if (jitter_ <= 0.0) return 0.0;
    std::normal_distribution<double> n(0.0, jitter_);
    for (;;) {
      const double v = n(rng);
      if (std::abs(v) <= 3.0 * jitter_) return v;
    }
  }

  ClassProfile p_;
  double fs_;
  double jitter_;
  Point lo_, hi_, center_;
  std::size_t dwell_left_ = 0;
};

std::string participant_name(std::size_t i, std::size_t total) {
  std::string digits = std::to_string(i + 1);
  const std::size_t width = std::max<std::size_t>(3, std::to_string(total).size());
  return "p" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

SyntheticDataset generate(const SynthSpec& spec) {
  spec.validate();
  SyntheticDataset data;
  const std::size_t total = kNumClasses * spec.n_participants_per_class;
  const double fs = spec.recording.sampling_rate_hz;
  for (std::size_t i = 0; i < total; ++i) {
    const std::size_t cls = i % kNumClasses;
    const ClassProfile profile = spec.effective_profile(cls);
    Rng rng = make_rng({spec.seed, key(Stream::Synth), i});
    FixationProcess gaze(profile, spec, rng);
    MissingnessProcess missing(MissingnessChain::from_profile(profile, fs), rng);
    std::normal_distribution<double> pupil_noise(0.0, 1.0);

    SessionSeries s;
    s.participant_id = ParticipantId{participant_name(i, total)};
    s.config = spec.recording;
    s.samples.reserve(spec.session_len_samples);
    for (std::size_t t = 0; t < spec.session_len_samples; ++t) {
      // Draw every stream each step so that dynamics do not depend on missingness.
      const Point g = gaze.next(rng);
      const double pupil = std::max(
          0.1, profile.pupil_baseline_mm + profile.pupil_noise_mm * pupil_noise(rng));
      GazeSample sample;
      sample.timestamp_s = static_cast<double>(t) / fs;
      if (!missing.missing()) {
        sample.gaze_x_px = g.x;
        sample.gaze_y_px = g.y;
        sample.pupil_mm = pupil;
      }
      s.samples.push_back(sample);
      missing.advance(rng);
    }

    TraitProfile tp;
    tp.participant_id = s.participant_id;
    std::uniform_real_distribution<double> within(0.05, 4.0 / 3.0 - 0.05);
    for (std::size_t k = 0; k < kNumTraits; ++k) {
      tp.scores[k] = 1.0 + (4.0 / 3.0) * static_cast<double>(cls) + within(rng);
      tp.labels[k] = label_from_index(cls);
    }
    data.sessions.push_back(std::move(s));
    data.profiles.push_back(tp);
    data.classes.push_back(cls);
  }
  return data;
}

void write_dataset(const SyntheticDataset& data, const std::filesystem::path& out_dir) {
  for (const auto& s : data.sessions) {
    ingest::write_recording(s, out_dir / "recordings" / (s.participant_id.value + ".csv"));
  }
  io::write_file(out_dir / "labels.csv", ingest::format_labels(data.profiles));
  io::write_file(out_dir / "scores.csv", ingest::format_scores(data.profiles));
}

namespace {

ClassProfile read_profile(const yaml::Reader& r, const YAML::Node& node, const std::string& path,
                          TertileLabel label) {
  r.check_keys(node, path,
               {"fixation_dwell_mean_s", "saccade_rate_hz", "saccade_amplitude_px",
                "pupil_baseline_mm", "pupil_noise_mm", "missing_rate", "gap_len_mean_s"});
  ClassProfile p;
  p.label = label;
  p.fixation_dwell_mean_s = r.require<double>(node, path, "fixation_dwell_mean_s");
  p.saccade_rate_hz = r.require<double>(node, path, "saccade_rate_hz");
  p.saccade_amplitude_px = r.require<double>(node, path, "saccade_amplitude_px");
  p.pupil_baseline_mm = r.require<double>(node, path, "pupil_baseline_mm");
  p.pupil_noise_mm = r.require<double>(node, path, "pupil_noise_mm");
  p.missing_rate = r.require<double>(node, path, "missing_rate");
  p.gap_len_mean_s = r.require<double>(node, path, "gap_len_mean_s");
  return p;
}

}  // namespace

SynthSpec spec_from_node(const YAML::Node& root, const std::string& source) {
  const yaml::Reader r(ErrorCode::InvalidSpec, source);
  r.check_keys(root, "",
               {"seed", "mode", "participants_per_class", "session_len_samples",
                "fixation_jitter_px", "recording", "profiles"});
  SynthSpec spec;
  spec.seed = r.get<std::uint64_t>(root, "", "seed", 0);
  const auto mode = r.require<std::string>(root, "", "mode");
  try {
    spec.mode = parse_mode(mode);
  } catch (const Error&) {
    r.fail(root["mode"], "mode", "expected dynamics-only, missingness-only or both");
  }
  const auto n = r.require<long long>(root, "", "participants_per_class");
  if (n < 1) r.fail(root["participants_per_class"], "participants_per_class", "must be >= 1");
  spec.n_participants_per_class = static_cast<std::size_t>(n);
  const auto len = r.require<long long>(root, "", "session_len_samples");
  if (len < 1) r.fail(root["session_len_samples"], "session_len_samples", "must be positive");
  spec.session_len_samples = static_cast<std::size_t>(len);
  spec.fixation_jitter_px = r.get<double>(root, "", "fixation_jitter_px", spec.fixation_jitter_px);
  if (const auto rec = root["recording"]; rec.IsDefined()) {
    r.check_keys(rec, "recording", {"sampling_rate_hz", "screen_width_px", "screen_height_px"});
    try {
      spec.recording = RecordingConfig::from_rate(
          r.get<double>(rec, "recording", "sampling_rate_hz", 60.0),
          r.get<int>(rec, "recording", "screen_width_px", 1024),
          r.get<int>(rec, "recording", "screen_height_px", 576));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::InvalidSpec) throw;
      r.fail(rec, "recording", e.what());
    }
  }
  const YAML::Node profiles = root["profiles"];
  if (!profiles.IsDefined()) r.fail(root, "profiles", "missing required field");
  r.check_keys(profiles, "profiles", {"low", "medium", "high"});
  const char* names[] = {"low", "medium", "high"};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const YAML::Node node = profiles[names[c]];
    const std::string path = std::string("profiles.") + names[c];
    if (!node.IsDefined()) r.fail(profiles, path, "missing required field");
    spec.profiles[c] = read_profile(r, node, path, label_from_index(c));
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidSpec, source + ": " + e.what());
  }
  return spec;
}

SynthSpec parse_spec(const std::string& yaml_text) {
  return spec_from_node(yaml::parse(yaml_text, ErrorCode::InvalidSpec, "<spec>"), "<spec>");
}

SynthSpec load_spec(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::InvalidSpec, e.what());
  }
  return spec_from_node(yaml::parse(text, ErrorCode::InvalidSpec, path.string()), path.string());
}

std::string format_spec(const SynthSpec& spec) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << spec.seed;
  out << YAML::Key << "mode" << YAML::Value << std::string(mode_name(spec.mode));
  out << YAML::Key << "participants_per_class" << YAML::Value << spec.n_participants_per_class;
  out << YAML::Key << "session_len_samples" << YAML::Value << spec.session_len_samples;
  out << YAML::Key << "fixation_jitter_px" << YAML::Value << spec.fixation_jitter_px;
  out << YAML::Key << "recording" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "sampling_rate_hz" << YAML::Value << spec.recording.sampling_rate_hz;
  out << YAML::Key << "screen_width_px" << YAML::Value << spec.recording.screen_width_px;
  out << YAML::Key << "screen_height_px" << YAML::Value << spec.recording.screen_height_px;
  out << YAML::EndMap;
  out << YAML::Key << "profiles" << YAML::Value << YAML::BeginMap;
  const char* names[] = {"low", "medium", "high"};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& p = spec.profiles[c];
    out << YAML::Key << names[c] << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "fixation_dwell_mean_s" << YAML::Value << p.fixation_dwell_mean_s;
    out << YAML::Key << "saccade_rate_hz" << YAML::Value << p.saccade_rate_hz;
    out << YAML::Key << "saccade_amplitude_px" << YAML::Value << p.saccade_amplitude_px;
    out << YAML::Key << "pupil_baseline_mm" << YAML::Value << p.pupil_baseline_mm;
    out << YAML::Key << "pupil_noise_mm" << YAML::Value << p.pupil_noise_mm;
    out << YAML::Key << "missing_rate" << YAML::Value << p.missing_rate;
    out << YAML::Key << "gap_len_mean_s" << YAML::Value << p.gap_len_mean_s;
    out << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

BayesGapOracle::BayesGapOracle(const SynthSpec& spec) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    chains_[c] =
        MissingnessChain::from_profile(spec.effective_profile(c), spec.recording.sampling_rate_hz);
  }
}

std::array<double, kNumClasses> BayesGapOracle::log_likelihoods(
    std::span<const std::uint8_t> observed) const {
  // Sufficient statistics: first state and the four transition counts.
  std::array<std::array<double, 2>, 2> n{};
  for (std::size_t t = 1; t < observed.size(); ++t) {
    n[observed[t - 1] ? 0 : 1][observed[t] ? 0 : 1] += 1.0;
  }
  auto term = [](double count, double p) {
    if (count == 0.0) return 0.0;
    return p > 0.0 ? count * std::log(p) : -std::numeric_limits<double>::infinity();
  };
  std::array<double, kNumClasses> ll{};
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& ch = chains_[c];
    double v = 0.0;
    if (!observed.empty()) {
      v += term(1.0, observed[0] ? 1.0 - ch.stationary_missing : ch.stationary_missing);
    }
    v += term(n[0][0], 1.0 - ch.a) + term(n[0][1], ch.a) + term(n[1][0], ch.b) +
         term(n[1][1], 1.0 - ch.b);
    ll[c] = v;
  }
  return ll;
}

std::size_t BayesGapOracle::classify(std::span<const std::uint8_t> observed) const {
  const auto ll = log_likelihoods(observed);
  std::size_t best = 0;
  for (std::size_t c = 1; c < kNumClasses; ++c) {
    if (ll[c] > ll[best]) best = c;
  }
  return best;
}

double oracle_accuracy_mc(const SynthSpec& spec, std::size_t window_len,
                          std::size_t windows_per_class, std::uint64_t seed) {
  spec.validate();
  const BayesGapOracle oracle(spec);
  std::size_t correct = 0;
  std::vector<std::uint8_t> obs(window_len);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto chain = MissingnessChain::from_profile(spec.effective_profile(c),
                                                      spec.recording.sampling_rate_hz);
    Rng rng = make_rng({seed, key(Stream::Synth), 0xB4E5ull, c});
    for (std::size_t w = 0; w < windows_per_class; ++w) {
      MissingnessProcess m(chain, rng);
      for (std::size_t t = 0; t < window_len; ++t) {
        obs[t] = m.missing() ? 0 : 1;
        m.advance(rng);
      }
      if (oracle.classify(obs) == c) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(kNumClasses * windows_per_class);
}

}  // namespace gazetrait::synth
