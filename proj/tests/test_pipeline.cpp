#include <doctest.h>

#include <map>
#include <set>

#include "gazetrait/error.hpp"
#include "gazetrait/ingest.hpp"
#include "gazetrait/io.hpp"
#include "gazetrait/pipeline.hpp"
#include "gazetrait/synth.hpp"
#include "support.hpp"

using namespace gazetrait;
using namespace gazetrait::pipeline;

namespace {

synth::SynthSpec small_spec(std::size_t per_class = 5, std::size_t length = 1200) {
  synth::SynthSpec s;
  s.n_participants_per_class = per_class;
  s.session_len_samples = length;
  s.seed = 8;
  s.mode = synth::SignalMode::MissingnessOnly;
  const std::array<double, 3> rates{0.05, 0.25, 0.5};
  for (std::size_t c = 0; c < 3; ++c) {
    s.profiles[c].label = label_from_index(c);
    s.profiles[c].missing_rate = rates[c];
    s.profiles[c].gap_len_mean_s = 0.05;
  }
  return s;
}

Dataset to_dataset(const synth::SyntheticDataset& d) { return Dataset{d.sessions, d.profiles}; }

Manifest quick_manifest(const std::filesystem::path& out) {
  Manifest m;
  m.dataset.synth = small_spec(2, 600);
  m.recording = m.dataset.synth->recording;
  m.windowing.window_len = 40;
  m.windowing.stride = 20;
  m.model.hidden_size = 6;
  m.model.head_hidden = 6;
  m.train.max_epochs = 1;
  m.train.batch_size = 32;
  m.forest.n_trees = 10;
  m.experiment.folds = 2;
  m.experiment.seed = 4;
  m.experiment.jobs = 2;
  m.output_dir = out;
  return m;
}

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("fold planner keeps test segments out of training and normalization") {
  const auto data = to_dataset(synth::generate(small_spec()));
  split::WindowingConfig wc;
  const FoldPlanner planner(data, wc, Protocol::SegmentStratified5Fold, Trait::O, 5, 3, 0.2);
  CHECK(planner.segments().size() == 75);
  for (int fold = 0; fold < 5; ++fold) {
    const auto fd = planner.prepare(fold);
    CHECK_FALSE(fd.fit.empty());
    CHECK_FALSE(fd.validation.empty());
    CHECK_FALSE(fd.test.empty());
    std::set<std::size_t> test_segments, train_segments;
    for (const auto& w : fd.test) {
      CHECK(w.fold == fold);
      test_segments.insert(w.segment_id);
    }
    for (const auto* set : {&fd.fit, &fd.validation}) {
      for (const auto& w : *set) {
        CHECK(w.fold != fold);
        train_segments.insert(w.segment_id);
      }
    }
    for (auto s : test_segments) CHECK(train_segments.count(s) == 0);

    // stats equal an independent fit on the fit segments only
    std::set<std::size_t> fit_segments;
    for (const auto& w : fd.fit) fit_segments.insert(w.segment_id);
    featurize::NormalizationFitter fitter;
    for (const auto& seg : planner.segments()) {
      if (fit_segments.count(seg.segment_id)) {
        fitter.add(featurize::prepare_session(data.sessions[seg.session_index]), seg.begin, seg.end);
      }
    }
    const auto expected = fitter.finish();
    CHECK(fd.stats.pupil_mean == doctest::Approx(expected.pupil_mean).epsilon(1e-12));
    CHECK(fd.stats.velocity_std == doctest::Approx(expected.velocity_std).epsilon(1e-12));
    CHECK(fd.stats.provenance == StatsProvenance::TrainingOnly);
  }
}

TEST_CASE("participant protocol keeps participants whole") {
  const auto data = to_dataset(synth::generate(small_spec()));
  const FoldPlanner planner(data, split::WindowingConfig{}, Protocol::ParticipantStratified,
                            Trait::N, 5, 3, 0.2);
  std::map<std::string, std::set<int>> folds;
  for (const auto& s : planner.segments()) folds[s.participant_id.value].insert(s.fold);
  CHECK(folds.size() == 15);
  for (const auto& [id, f] : folds) CHECK(f.size() == 1);
}

TEST_CASE("window sets follow the variant layout") {
  const auto data = to_dataset(synth::generate(small_spec(2, 600)));
  const FoldPlanner planner(data, split::WindowingConfig{}, Protocol::SegmentStratified5Fold,
                            Trait::O, 2, 1, 0.2);
  const auto fd = planner.prepare(0);
  for (FeatureVariant v : {FeatureVariant::Full, FeatureVariant::TsGap, FeatureVariant::TsOnly}) {
    const auto set = make_window_set(fd.test, fd.sequences, v);
    REQUIRE(set.size() == fd.test.size());
    CHECK(set.inputs[0].rows() == static_cast<Eigen::Index>(per_frame_dim(v)));
    CHECK(set.inputs[0].cols() == 100);
    CHECK(set.folds[0] == 0);
  }
}

TEST_CASE("cell seeds differ across the grid") {
  std::set<std::uint64_t> seeds;
  for (int fold = 0; fold < 5; ++fold) {
    for (Trait t : kAllTraits) {
      for (FeatureVariant v : kAllVariants) {
        for (Protocol p : {Protocol::SegmentStratified5Fold, Protocol::ParticipantStratified}) {
          seeds.insert(cell_seed(1, p, t, fold, v));
        }
      }
    }
  }
  CHECK(seeds.size() == 5 * 5 * 4 * 2);
  CHECK(cell_seed(1, Protocol::SegmentStratified5Fold, Trait::O, 0, FeatureVariant::Full) ==
        cell_seed(1, Protocol::SegmentStratified5Fold, Trait::O, 0, FeatureVariant::Full));
}

TEST_CASE("directory datasets with questionnaire responses") {
  testing::TempDir dir("pipeline");
  const auto synth_data = synth::generate(small_spec(2, 300));
  for (const auto& s : synth_data.sessions) {
    ingest::write_recording(s, dir.path() / "recordings" / (s.participant_id.value + ".csv"));
  }
  std::string key = "item_index,trait,reverse\n";
  for (int i = 1; i <= 44; ++i) {
    key += std::to_string(i) + "," + trait_code(kAllTraits[(i - 1) % 5]) + ",0\n";
  }
  io::write_file(dir.path() / "bfi_key.csv", key);
  std::string responses = "participant_id";
  for (int i = 1; i <= 44; ++i) responses += ",item_" + std::to_string(i);
  responses += "\n";
  for (std::size_t p = 0; p < synth_data.sessions.size(); ++p) {
    responses += synth_data.sessions[p].participant_id.value;
    for (int i = 1; i <= 44; ++i) responses += "," + std::to_string(1 + (p + i) % 5);
    responses += "\n";
  }
  io::write_file(dir.path() / "responses.csv", responses);

  const auto data = load_dataset_directory(dir.path(), RecordingConfig{});
  REQUIRE(data.sessions.size() == 6);
  REQUIRE(data.profiles.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(data.profiles[i].participant_id == data.sessions[i].participant_id);
    for (double s : data.profiles[i].scores) {
      CHECK(s >= 1.0);
      CHECK(s <= 5.0);
    }
  }
  CHECK(data.sessions[2].samples == synth_data.sessions[2].samples);

  // labels.csv takes precedence
  io::write_file(dir.path() / "labels.csv", ingest::format_labels(synth_data.profiles));
  const auto labelled = load_dataset_directory(dir.path(), RecordingConfig{});
  for (std::size_t i = 0; i < 6; ++i) CHECK(labelled.profiles[i].labels == synth_data.profiles[i].labels);
}

TEST_CASE("end to end run writes the report tree") {
  testing::TempDir dir("pipeline");
  auto m = quick_manifest(dir.path());
  m.experiment.variants = {FeatureVariant::Full, FeatureVariant::Statistical};
  m.experiment.protocols = {Protocol::SegmentStratified5Fold, Protocol::ParticipantStratified};
  std::vector<std::string> lines;
  const auto r = cmd_run(m, [&](const std::string& s) { lines.push_back(s); });
  CHECK(r.results.size() == 2 * 2 * 5 * 2);
  CHECK(r.aggregates.size() == 2 * 2 * 5);
  const auto reports = dir.path() / "reports";
  CHECK(std::filesystem::exists(dir.path() / "manifest.lock"));
  CHECK(std::filesystem::exists(reports / "summary.md"));
  CHECK(std::filesystem::exists(reports / "segment" / "full" / "E" / "train_log_fold1.csv"));
  CHECK(std::filesystem::exists(reports / "participant" / "statistical" / "N" / "confusion_fold0.csv"));
  CHECK(std::filesystem::exists(reports / "segment" / "fold_plan_O.csv"));
  const auto summary = io::read_file(reports / "summary.md");
  CHECK(summary.find("| Full |") != std::string::npos);
  CHECK(summary.find("| Statistical |") != std::string::npos);
  CHECK(summary.find("| O | C | E | A | N |") != std::string::npos);

  // rerunning from the lock reproduces the summary
  const auto first = io::read_file(reports / "summary.csv");
  const auto locked = load_manifest(dir.path() / "manifest.lock");
  cmd_run(locked);
  CHECK(io::read_file(reports / "summary.csv") == first);
}

TEST_CASE("ablate emits all variants and the delta table") {
  testing::TempDir dir("pipeline");
  auto m = quick_manifest(dir.path());
  m.experiment.traits = {Trait::A};
  const auto r = cmd_ablate(m);
  CHECK(r.aggregates.size() == 4);
  const auto delta = io::read_file(dir.path() / "reports" / "ablation_delta.md");
  CHECK(delta.find("| Full - TS+Temporal Gap |") != std::string::npos);
  CHECK(delta.find("| Full - TS Only |") != std::string::npos);
  CHECK(delta.find("| Full - Statistical |") != std::string::npos);
}

}
