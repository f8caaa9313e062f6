#include "gazetrait/manifest.hpp"

#include <algorithm>
#include <sstream>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"
#include "synth_yaml.hpp"

namespace gazetrait::pipeline {

namespace fs = std::filesystem;

void Manifest::validate() const {
  auto wrap = [](auto&& f, const char* section) {
    try {
      f();
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, std::string(section) + ": " + e.what());
    }
  };
  wrap([&] { recording.validate(); }, "recording");
  wrap([&] { windowing.validate(); }, "windowing");
  wrap([&] { model.validate(); }, "model");
  wrap([&] { train.validate(); }, "train");
  wrap([&] { forest.validate(); }, "forest");
  if (experiment.variants.empty() || experiment.protocols.empty() || experiment.traits.empty()) {
    throw Error(ErrorCode::ConfigError, "experiment: empty variant, protocol or trait list");
  }
  if (experiment.folds < 2) throw Error(ErrorCode::ConfigError, "experiment.folds must be >= 2");
  if (experiment.jobs < 1) throw Error(ErrorCode::ConfigError, "experiment.jobs must be >= 1");
  if (!dataset.is_synthetic() && dataset.directory.empty()) {
    throw Error(ErrorCode::ConfigError, "dataset: no directory or synth spec");
  }
}

namespace {

template <typename T, typename Parse>
std::vector<T> parse_list(const std::string& text, Parse&& parse, std::span<const T> all) {
  if (text == "all") return std::vector<T>(all.begin(), all.end());
  std::vector<T> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    const T v = parse(item);
    if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(v);
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, "empty list '" + text + "'");
  return out;
}

template <typename F>
auto as_config_error(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
}

constexpr std::array<Protocol, 2> kAllProtocols{Protocol::SegmentStratified5Fold,
                                                Protocol::ParticipantStratified};

}  // namespace

std::vector<FeatureVariant> parse_variant_list(const std::string& text) {
  return as_config_error([&] {
    return parse_list<FeatureVariant>(text, [](const std::string& s) { return parse_variant(s); },
                                      kAllVariants);
  });
}

std::vector<Protocol> parse_protocol_list(const std::string& text) {
  return as_config_error([&] {
    return parse_list<Protocol>(text, [](const std::string& s) { return parse_protocol(s); },
                                kAllProtocols);
  });
}

std::vector<Trait> parse_trait_list(const std::string& text) {
  return as_config_error([&] {
    return parse_list<Trait>(text, [](const std::string& s) { return parse_trait(s); }, kAllTraits);
  });
}

namespace {

// Lists may be YAML sequences or a scalar ("all" / comma-separated).
template <typename T>
std::vector<T> read_list(const yaml::Reader& r, const YAML::Node& parent, const char* key,
                         std::vector<T> fallback,
                         std::vector<T> (*parse)(const std::string&)) {
  const YAML::Node node = parent[key];
  const std::string path = std::string("experiment.") + key;
  if (!node.IsDefined() || node.IsNull()) return fallback;
  std::string text;
  if (node.IsSequence()) {
    for (const auto& item : node) {
      text += (text.empty() ? "" : ",") + r.convert<std::string>(item, path);
    }
  } else {
    text = r.convert<std::string>(node, path);
  }
  try {
    return parse(text);
  } catch (const Error& e) {
    r.fail(node, path, e.what());
  }
}

std::size_t read_count(const yaml::Reader& r, const YAML::Node& parent, const std::string& path,
                       const char* key, std::size_t fallback) {
  const auto v = r.get<long long>(parent, path, key, static_cast<long long>(fallback));
  if (v < 0) r.fail(parent[key], yaml::Reader::join(path, key), "must be >= 0");
  return static_cast<std::size_t>(v);
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  return (p.is_absolute() ? p : base / p).lexically_normal();
}

}  // namespace

Manifest parse_manifest(const std::string& yaml_text, const std::string& source,
                        const fs::path& base_dir) {
  const YAML::Node root = yaml::parse(yaml_text, ErrorCode::ConfigError, source);
  const yaml::Reader r(ErrorCode::ConfigError, source);
  r.check_keys(root, "",
               {"dataset", "recording", "windowing", "model", "train", "forest", "experiment",
                "output", "lock"});
  Manifest m;

  const YAML::Node ds = root["dataset"];
  if (!ds.IsDefined()) r.fail(root, "dataset", "missing required field");
  r.check_keys(ds, "dataset", {"directory", "synth_spec", "synth"});
  const int sources = ds["directory"].IsDefined() + ds["synth_spec"].IsDefined() +
                      ds["synth"].IsDefined();
  if (sources != 1) r.fail(ds, "dataset", "give exactly one of directory, synth_spec, synth");
  if (ds["directory"].IsDefined()) {
    m.dataset.directory = resolve(base_dir, r.require<std::string>(ds, "dataset", "directory"));
  } else if (ds["synth_spec"].IsDefined()) {
    m.dataset.synth =
        synth::load_spec(resolve(base_dir, r.require<std::string>(ds, "dataset", "synth_spec")));
  } else {
    m.dataset.synth = synth::spec_from_node(ds["synth"], source + " (dataset.synth)");
  }

  if (const auto n = root["recording"]; n.IsDefined()) {
    r.check_keys(n, "recording", {"sampling_rate_hz", "screen_width_px", "screen_height_px"});
    const double rate = r.get<double>(n, "recording", "sampling_rate_hz", 60.0);
    if (!(rate > 0.0)) r.fail(n["sampling_rate_hz"], "recording.sampling_rate_hz", "must be positive");
    m.recording = RecordingConfig{rate, 1.0 / rate,
                                  r.get<int>(n, "recording", "screen_width_px", 1024),
                                  r.get<int>(n, "recording", "screen_height_px", 576)};
  }
  if (m.dataset.is_synthetic()) m.recording = m.dataset.synth->recording;

  if (const auto n = root["windowing"]; n.IsDefined()) {
    r.check_keys(n, "windowing", {"window_len", "stride", "segments_per_session"});
    auto& w = m.windowing;
    w.window_len = read_count(r, n, "windowing", "window_len", w.window_len);
    w.stride = read_count(r, n, "windowing", "stride", w.stride);
    w.segments_per_session = read_count(r, n, "windowing", "segments_per_session", w.segments_per_session);
  }
  if (const auto n = root["model"]; n.IsDefined()) {
    r.check_keys(n, "model", {"hidden_size", "num_layers", "head_hidden", "dropout"});
    auto& d = m.model;
    d.hidden_size = read_count(r, n, "model", "hidden_size", d.hidden_size);
    d.num_layers = read_count(r, n, "model", "num_layers", d.num_layers);
    d.head_hidden = read_count(r, n, "model", "head_hidden", d.head_hidden);
    d.dropout = r.get<double>(n, "model", "dropout", d.dropout);
  }
  if (const auto n = root["train"]; n.IsDefined()) {
    r.check_keys(n, "train",
                 {"lr", "weight_decay", "clip_norm", "max_epochs", "early_stop_patience",
                  "plateau_patience", "plateau_factor", "min_lr", "min_delta", "batch_size",
                  "validation_fraction", "stop_on_macro_f1", "adam_beta1", "adam_beta2",
                  "adam_eps"});
    auto& t = m.train;
    t.lr = r.get<double>(n, "train", "lr", t.lr);
    t.weight_decay = r.get<double>(n, "train", "weight_decay", t.weight_decay);
    t.clip_norm = r.get<double>(n, "train", "clip_norm", t.clip_norm);
    t.max_epochs = r.get<int>(n, "train", "max_epochs", t.max_epochs);
    t.early_stop_patience = r.get<int>(n, "train", "early_stop_patience", t.early_stop_patience);
    t.plateau_patience = r.get<int>(n, "train", "plateau_patience", t.plateau_patience);
    t.plateau_factor = r.get<double>(n, "train", "plateau_factor", t.plateau_factor);
    t.min_lr = r.get<double>(n, "train", "min_lr", t.min_lr);
    t.min_delta = r.get<double>(n, "train", "min_delta", t.min_delta);
    t.batch_size = read_count(r, n, "train", "batch_size", t.batch_size);
    t.validation_fraction = r.get<double>(n, "train", "validation_fraction", t.validation_fraction);
    t.stop_on_macro_f1 = r.get<bool>(n, "train", "stop_on_macro_f1", t.stop_on_macro_f1);
    t.adam_beta1 = r.get<double>(n, "train", "adam_beta1", t.adam_beta1);
    t.adam_beta2 = r.get<double>(n, "train", "adam_beta2", t.adam_beta2);
    t.adam_eps = r.get<double>(n, "train", "adam_eps", t.adam_eps);
  }
  if (const auto n = root["forest"]; n.IsDefined()) {
    r.check_keys(n, "forest",
                 {"n_trees", "max_depth", "min_samples_leaf", "features_per_split", "bootstrap"});
    auto& f = m.forest;
    f.n_trees = read_count(r, n, "forest", "n_trees", f.n_trees);
    f.max_depth = read_count(r, n, "forest", "max_depth", f.max_depth);
    f.min_samples_leaf = read_count(r, n, "forest", "min_samples_leaf", f.min_samples_leaf);
    f.features_per_split = read_count(r, n, "forest", "features_per_split", f.features_per_split);
    f.bootstrap = r.get<bool>(n, "forest", "bootstrap", f.bootstrap);
  }
  if (const auto n = root["experiment"]; n.IsDefined()) {
    r.check_keys(n, "experiment", {"variants", "protocols", "traits", "folds", "seed", "jobs"});
    auto& e = m.experiment;
    e.variants = read_list(r, n, "variants", e.variants, &parse_variant_list);
    e.protocols = read_list(r, n, "protocols", e.protocols, &parse_protocol_list);
    e.traits = read_list(r, n, "traits", e.traits, &parse_trait_list);
    e.folds = r.get<int>(n, "experiment", "folds", e.folds);
    e.seed = r.get<std::uint64_t>(n, "experiment", "seed", e.seed);
    e.jobs = read_count(r, n, "experiment", "jobs", e.jobs);
  }
  m.output_dir = resolve(base_dir, "out");
  if (const auto n = root["output"]; n.IsDefined()) {
    r.check_keys(n, "output", {"directory"});
    m.output_dir = resolve(base_dir, r.get<std::string>(n, "output", "directory", "out"));
  }
  if (const auto n = root["lock"]; n.IsDefined()) {
    r.check_keys(n, "lock", {"version", "inputs"});
    if (r.require<int>(n, "lock", "version") != kLockVersion) {
      r.fail(n["version"], "lock.version", "unsupported lock version");
    }
    std::map<std::string, std::string> inputs;
    if (const auto in = n["inputs"]; in.IsDefined() && !in.IsNull()) {
      r.require_map(in, "lock.inputs");
      for (const auto& kv : in) {
        inputs[kv.first.as<std::string>()] = r.convert<std::string>(kv.second, "lock.inputs");
      }
    }
    m.locked_inputs = std::move(inputs);
  }
  m.validate();
  return m;
}

Manifest load_manifest(const fs::path& path) {
  std::string text;
  try {
    text = io::read_file(path);
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return parse_manifest(text, path.string(), fs::absolute(path).parent_path());
}

void apply_overrides(Manifest& m, const Overrides& o) {
  if (o.seed) m.experiment.seed = *o.seed;
  if (o.folds) m.experiment.folds = *o.folds;
  if (o.variants) m.experiment.variants = *o.variants;
  if (o.protocols) m.experiment.protocols = *o.protocols;
  if (o.traits) m.experiment.traits = *o.traits;
  if (o.output_dir) m.output_dir = fs::absolute(*o.output_dir).lexically_normal();
  if (o.jobs) m.experiment.jobs = *o.jobs;
  m.validate();
}

std::vector<fs::path> dataset_files(const fs::path& directory) {
  std::vector<fs::path> out;
  const fs::path rec = directory / "recordings";
  if (!fs::is_directory(rec)) {
    throw Error(ErrorCode::IoFailure, "missing recordings directory " + rec.string());
  }
  for (const auto& entry : fs::directory_iterator(rec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") {
      out.push_back(fs::path("recordings") / entry.path().filename());
    }
  }
  std::sort(out.begin(), out.end());
  if (fs::exists(directory / "labels.csv")) {
    out.emplace_back("labels.csv");
  } else if (fs::exists(directory / "responses.csv") && fs::exists(directory / "bfi_key.csv")) {
    out.emplace_back("bfi_key.csv");
    out.emplace_back("responses.csv");
  } else if (fs::exists(directory / "scores.csv")) {
    out.emplace_back("scores.csv");
  } else {
    throw Error(ErrorCode::IoFailure,
                "no labels.csv, responses.csv + bfi_key.csv, or scores.csv in " + directory.string());
  }
  return out;
}

std::map<std::string, std::string> hash_inputs(const Manifest& m) {
  std::map<std::string, std::string> out;
  if (m.dataset.is_synthetic()) return out;
  for (const auto& rel : dataset_files(m.dataset.directory)) {
    out[rel.generic_string()] = io::sha256_file(m.dataset.directory / rel);
  }
  return out;
}

void verify_locked_inputs(const Manifest& m) {
  if (!m.locked_inputs) return;
  std::map<std::string, std::string> actual;
  try {
    actual = hash_inputs(m);
  } catch (const Error& e) {
    throw Error(ErrorCode::HashMismatch, std::string("cannot hash locked inputs: ") + e.what());
  }
  for (const auto& [path, hash] : *m.locked_inputs) {
    const auto it = actual.find(path);
    if (it == actual.end()) throw Error(ErrorCode::HashMismatch, "locked input missing: " + path);
    if (it->second != hash) throw Error(ErrorCode::HashMismatch, "input changed since lock: " + path);
  }
  for (const auto& [path, hash] : actual) {
    if (!m.locked_inputs->count(path)) {
      throw Error(ErrorCode::HashMismatch, "input not in lock: " + path);
    }
  }
}

namespace {

std::string join_names(auto const& items, auto&& name) {
  std::string s;
  for (const auto& v : items) s += (s.empty() ? "" : ",") + std::string(name(v));
  return s;
}

}  // namespace

std::string format_lock(const Manifest& m, const std::map<std::string, std::string>& hashes) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "dataset" << YAML::Value << YAML::BeginMap;
  if (m.dataset.is_synthetic()) {
    out << YAML::Key << "synth" << YAML::Value << YAML::Load(synth::format_spec(*m.dataset.synth));
  } else {
    out << YAML::Key << "directory" << YAML::Value << m.dataset.directory.string();
  }
  out << YAML::EndMap;

  out << YAML::Key << "recording" << YAML::Value << YAML::BeginMap
      << YAML::Key << "sampling_rate_hz" << YAML::Value << m.recording.sampling_rate_hz
      << YAML::Key << "screen_width_px" << YAML::Value << m.recording.screen_width_px
      << YAML::Key << "screen_height_px" << YAML::Value << m.recording.screen_height_px
      << YAML::EndMap;
  out << YAML::Key << "windowing" << YAML::Value << YAML::BeginMap
      << YAML::Key << "window_len" << YAML::Value << m.windowing.window_len
      << YAML::Key << "stride" << YAML::Value << m.windowing.stride
      << YAML::Key << "segments_per_session" << YAML::Value << m.windowing.segments_per_session
      << YAML::EndMap;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap
      << YAML::Key << "hidden_size" << YAML::Value << m.model.hidden_size
      << YAML::Key << "num_layers" << YAML::Value << m.model.num_layers
      << YAML::Key << "head_hidden" << YAML::Value << m.model.head_hidden
      << YAML::Key << "dropout" << YAML::Value << m.model.dropout << YAML::EndMap;
  const auto& t = m.train;
  out << YAML::Key << "train" << YAML::Value << YAML::BeginMap
      << YAML::Key << "lr" << YAML::Value << t.lr
      << YAML::Key << "weight_decay" << YAML::Value << t.weight_decay
      << YAML::Key << "clip_norm" << YAML::Value << t.clip_norm
      << YAML::Key << "max_epochs" << YAML::Value << t.max_epochs
      << YAML::Key << "early_stop_patience" << YAML::Value << t.early_stop_patience
      << YAML::Key << "plateau_patience" << YAML::Value << t.plateau_patience
      << YAML::Key << "plateau_factor" << YAML::Value << t.plateau_factor
      << YAML::Key << "min_lr" << YAML::Value << t.min_lr
      << YAML::Key << "min_delta" << YAML::Value << t.min_delta
      << YAML::Key << "batch_size" << YAML::Value << t.batch_size
      << YAML::Key << "validation_fraction" << YAML::Value << t.validation_fraction
      << YAML::Key << "stop_on_macro_f1" << YAML::Value << t.stop_on_macro_f1
      << YAML::Key << "adam_beta1" << YAML::Value << t.adam_beta1
      << YAML::Key << "adam_beta2" << YAML::Value << t.adam_beta2
      << YAML::Key << "adam_eps" << YAML::Value << t.adam_eps << YAML::EndMap;
  const auto& f = m.forest;
  out << YAML::Key << "forest" << YAML::Value << YAML::BeginMap
      << YAML::Key << "n_trees" << YAML::Value << f.n_trees
      << YAML::Key << "max_depth" << YAML::Value << f.max_depth
      << YAML::Key << "min_samples_leaf" << YAML::Value << f.min_samples_leaf
      << YAML::Key << "features_per_split" << YAML::Value << f.features_per_split
      << YAML::Key << "bootstrap" << YAML::Value << f.bootstrap << YAML::EndMap;
  const auto& e = m.experiment;
  out << YAML::Key << "experiment" << YAML::Value << YAML::BeginMap
      << YAML::Key << "variants" << YAML::Value
      << join_names(e.variants, [](FeatureVariant v) { return variant_name(v); })
      << YAML::Key << "protocols" << YAML::Value
      << join_names(e.protocols, [](Protocol p) { return protocol_name(p); })
      << YAML::Key << "traits" << YAML::Value
      << join_names(e.traits, [](Trait tr) { return std::string(1, trait_code(tr)); })
      << YAML::Key << "folds" << YAML::Value << e.folds
      << YAML::Key << "seed" << YAML::Value << e.seed
      << YAML::Key << "jobs" << YAML::Value << e.jobs << YAML::EndMap;
  out << YAML::Key << "output" << YAML::Value << YAML::BeginMap
      << YAML::Key << "directory" << YAML::Value << m.output_dir.string() << YAML::EndMap;
  out << YAML::Key << "lock" << YAML::Value << YAML::BeginMap
      << YAML::Key << "version" << YAML::Value << kLockVersion
      << YAML::Key << "inputs" << YAML::Value << YAML::BeginMap;
  for (const auto& [path, hash] : hashes) out << YAML::Key << path << YAML::Value << hash;
  out << YAML::EndMap << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace gazetrait::pipeline
