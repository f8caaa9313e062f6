#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sys/wait.h>

#include "gazetrait/error.hpp"
#include "gazetrait/io.hpp"
#include "gazetrait/manifest.hpp"
#include "gazetrait/synth.hpp"
#include "support.hpp"

using namespace gazetrait;
using namespace gazetrait::pipeline;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

synth::SynthSpec tiny_spec() {
  synth::SynthSpec s;
  s.n_participants_per_class = 2;
  s.session_len_samples = 300;
  s.seed = 3;
  for (std::size_t c = 0; c < 3; ++c) {
    s.profiles[c].label = label_from_index(c);
    s.profiles[c].missing_rate = 0.1 * static_cast<double>(c);
  }
  return s;
}

#ifdef GAZETRAIT_CLI_PATH
int run_cli(const std::string& args) {
  const std::string cmd = std::string(GAZETRAIT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
#endif

}  // namespace

TEST_SUITE("manifest") {

TEST_CASE("directory manifest with defaults and relative paths") {
  const auto m = parse_manifest("dataset:\n  directory: data\n", "m.yaml", "/base/dir");
  CHECK(m.dataset.directory == std::filesystem::path("/base/dir/data"));
  CHECK_FALSE(m.dataset.is_synthetic());
  CHECK(m.output_dir == std::filesystem::path("/base/dir/out"));
  CHECK(m.experiment.folds == 5);
  CHECK(m.experiment.traits.size() == 5);
  CHECK(m.experiment.variants == std::vector<FeatureVariant>{FeatureVariant::Full});
  CHECK(m.windowing.window_len == 100);
  CHECK(m.windowing.stride == 50);
  CHECK(m.model.hidden_size == 64);
  CHECK(m.model.num_layers == 2);
  CHECK(m.model.dropout == 0.3);
  CHECK(m.forest.n_trees == 200);
  CHECK(m.train.lr == 1e-3);
  CHECK(m.recording.sampling_rate_hz == 60.0);
}

TEST_CASE("experiment lists") {
  const auto m = parse_manifest(
      "dataset: {directory: d}\n"
      "experiment:\n"
      "  variants: all\n"
      "  protocols: [segment, participant]\n"
      "  traits: N,E\n"
      "  folds: 4\n"
      "  seed: 9\n"
      "output: {directory: /tmp/x}\n",
      "m.yaml", "/b");
  CHECK(m.experiment.variants.size() == 4);
  CHECK(m.experiment.protocols.size() == 2);
  CHECK(m.experiment.traits == std::vector<Trait>{Trait::N, Trait::E});
  CHECK(m.experiment.folds == 4);
  CHECK(m.experiment.seed == 9);
  CHECK(m.output_dir == std::filesystem::path("/tmp/x"));
  CHECK(parse_variant_list("full, ts_only") ==
        std::vector<FeatureVariant>{FeatureVariant::Full, FeatureVariant::TsOnly});
}

TEST_CASE("manifest errors name the line and field") {
  try {
    parse_manifest("dataset:\n  directory: d\ntrain:\n  lr: fast\n", "m.yaml", "/b");
    FAIL("expected ConfigError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ConfigError);
    const std::string what = e.what();
    CHECK(what.find("m.yaml:4") != std::string::npos);
    CHECK(what.find("train.lr") != std::string::npos);
  }
  CHECK(code_of([] { parse_manifest("dataset: {directory: d}\nbogus: 1\n", "m", "/b"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { parse_manifest("recording: {}\n", "m", "/b"); }) == ErrorCode::ConfigError);
  CHECK(code_of([] {
          parse_manifest("dataset: {directory: d}\nexperiment: {variants: [deep]}\n", "m", "/b");
        }) == ErrorCode::ConfigError);
  CHECK(code_of([] { parse_manifest("dataset: {directory: d}\nexperiment: {folds: 1}\n", "m", "/b"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { parse_manifest("dataset: {directory: d, synth_spec: s}\n", "m", "/b"); }) ==
        ErrorCode::ConfigError);
  CHECK(code_of([] { parse_manifest("dataset: {synth: {mode: both}}\n", "m", "/b"); }) ==
        ErrorCode::InvalidSpec);
  CHECK(code_of([] { load_manifest("/nonexistent/manifest.yaml"); }) == ErrorCode::ConfigError);
}

TEST_CASE("overrides") {
  auto m = parse_manifest("dataset: {directory: d}\n", "m", "/b");
  Overrides o;
  o.seed = 42;
  o.folds = 3;
  o.traits = parse_trait_list("A");
  o.variants = parse_variant_list("all");
  o.output_dir = "/tmp/elsewhere";
  apply_overrides(m, o);
  CHECK(m.experiment.seed == 42);
  CHECK(m.experiment.folds == 3);
  CHECK(m.experiment.traits.size() == 1);
  CHECK(m.experiment.variants.size() == 4);
  CHECK(m.output_dir == std::filesystem::path("/tmp/elsewhere"));
  Overrides bad;
  bad.folds = 1;
  CHECK_THROWS_AS(apply_overrides(m, bad), Error);
}

TEST_CASE("synthetic dataset recording comes from the spec") {
  testing::TempDir dir("manifest");
  auto spec = tiny_spec();
  spec.recording = RecordingConfig::from_rate(30.0, 800, 600);
  io::write_file(dir.path() / "spec.yaml", synth::format_spec(spec));
  io::write_file(dir.path() / "m.yaml",
                 "dataset: {synth_spec: spec.yaml}\nrecording: {sampling_rate_hz: 60}\n");
  const auto m = load_manifest(dir.path() / "m.yaml");
  REQUIRE(m.dataset.is_synthetic());
  CHECK(m.recording.sampling_rate_hz == 30.0);
  CHECK(m.dataset.synth->n_participants_per_class == 2);
}

TEST_CASE("lock round trip keeps every resolved parameter") {
  testing::TempDir dir("manifest");
  io::write_file(dir.path() / "spec.yaml", synth::format_spec(tiny_spec()));
  io::write_file(dir.path() / "m.yaml",
                 "dataset: {synth_spec: spec.yaml}\n"
                 "train: {max_epochs: 3, lr: 0.002}\n"
                 "experiment: {variants: [full, statistical], traits: [C], seed: 12}\n"
                 "output: {directory: results}\n");
  const auto m = load_manifest(dir.path() / "m.yaml");
  const auto text = format_lock(m, hash_inputs(m));
  io::write_file(dir.path() / "elsewhere" / "manifest.lock", text);
  const auto back = load_manifest(dir.path() / "elsewhere" / "manifest.lock");
  CHECK(back.locked_inputs.has_value());
  CHECK(back.output_dir == m.output_dir);
  CHECK(back.train.max_epochs == 3);
  CHECK(back.train.lr == 0.002);
  CHECK(back.experiment.variants == m.experiment.variants);
  CHECK(back.experiment.seed == 12);
  CHECK(synth::format_spec(*back.dataset.synth) == synth::format_spec(*m.dataset.synth));
  CHECK(format_lock(back, hash_inputs(back)) == text);
}

TEST_CASE("changed inputs fail lock verification") {
  testing::TempDir dir("manifest");
  synth::write_dataset(synth::generate(tiny_spec()), dir.path() / "data");
  io::write_file(dir.path() / "m.yaml", "dataset: {directory: data}\n");
  const auto m = load_manifest(dir.path() / "m.yaml");
  const auto hashes = hash_inputs(m);
  CHECK(hashes.size() == 7);  // six recordings + labels.csv
  CHECK(hashes.count("labels.csv") == 1);
  io::write_file(dir.path() / "m.lock", format_lock(m, hashes));
  const auto locked = load_manifest(dir.path() / "m.lock");
  CHECK_NOTHROW(verify_locked_inputs(locked));

  std::ofstream(dir.path() / "data" / "recordings" / "p002.csv", std::ios::app) << "\n";
  CHECK(code_of([&] { verify_locked_inputs(locked); }) == ErrorCode::HashMismatch);
  std::filesystem::remove(dir.path() / "data" / "recordings" / "p002.csv");
  CHECK(code_of([&] { verify_locked_inputs(locked); }) == ErrorCode::HashMismatch);
}

TEST_CASE("label source priority") {
  testing::TempDir dir("manifest");
  std::filesystem::create_directories(dir.path() / "recordings");
  io::write_file(dir.path() / "recordings" / "a.csv", "x");
  io::write_file(dir.path() / "scores.csv", "x");
  CHECK(dataset_files(dir.path()).back() == "scores.csv");
  io::write_file(dir.path() / "responses.csv", "x");
  CHECK(dataset_files(dir.path()).back() == "scores.csv");
  io::write_file(dir.path() / "bfi_key.csv", "x");
  CHECK(dataset_files(dir.path()).back() == "responses.csv");
  io::write_file(dir.path() / "labels.csv", "x");
  CHECK(dataset_files(dir.path()).back() == "labels.csv");
  CHECK(dataset_files(dir.path()).size() == 2);
}

#ifdef GAZETRAIT_CLI_PATH
TEST_CASE("cli exit codes and synth output") {
  testing::TempDir dir("cli");
  io::write_file(dir.path() / "spec.yaml", synth::format_spec(tiny_spec()));
  CHECK(run_cli("synth " + (dir.path() / "spec.yaml").string() + " " +
                (dir.path() / "a").string()) == 0);
  CHECK(run_cli("synth " + (dir.path() / "spec.yaml").string() + " " +
                (dir.path() / "b").string()) == 0);
  std::size_t recordings = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir.path() / "a" / "recordings")) {
    ++recordings;
    CHECK(io::read_file(e.path()) ==
          io::read_file(dir.path() / "b" / "recordings" / e.path().filename()));
  }
  CHECK(recordings == 6);
  CHECK(std::filesystem::exists(dir.path() / "a" / "labels.csv"));

  io::write_file(dir.path() / "bad.yaml", "mode: nonsense\n");
  CHECK(run_cli("synth " + (dir.path() / "bad.yaml").string() + " " +
                (dir.path() / "c").string()) == 2);
  io::write_file(dir.path() / "bad_manifest.yaml", "dataset: {directory: d}\nunknown: 1\n");
  CHECK(run_cli("run " + (dir.path() / "bad_manifest.yaml").string()) == 2);
  io::write_file(dir.path() / "missing_data.yaml", "dataset: {directory: nowhere}\n");
  CHECK(run_cli("run " + (dir.path() / "missing_data.yaml").string() + " -q") == 1);
  CHECK(run_cli("frobnicate") == 2);
}
#endif

}
