#include "gazetrait/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "gazetrait/baseline.hpp"
#include "gazetrait/error.hpp"
#include "gazetrait/ingest.hpp"
#include "gazetrait/io.hpp"
#include "gazetrait/random.hpp"
#include "gazetrait/synth.hpp"

namespace gazetrait::pipeline {

namespace fs = std::filesystem;

Dataset load_dataset_directory(const fs::path& dir, const RecordingConfig& config) {
  Dataset data;
  const auto files = dataset_files(dir);
  for (const auto& rel : files) {
    if (rel.parent_path() == "recordings") {
      data.sessions.push_back(ingest::parse_recording(dir / rel, config));
    }
  }
  if (data.sessions.empty()) throw Error(ErrorCode::IoFailure, "no recordings in " + dir.string());

  std::vector<ParticipantId> ids;
  for (const auto& s : data.sessions) ids.push_back(s.participant_id);
  const auto& label_file = files.back();

  std::map<std::string, TraitProfile> by_id;
  if (label_file == "labels.csv") {
    for (auto& p : ingest::load_labels(dir / label_file)) by_id[p.participant_id.value] = p;
  } else {
    std::map<std::string, std::array<double, kNumTraits>> scores;
    if (label_file == "responses.csv") {
      const auto key = ingest::load_bfi_key(dir / "bfi_key.csv");
      for (const auto& row : ingest::load_responses(dir / label_file)) {
        scores[row.participant_id.value] = ingest::score_bfi(row.responses, key);
      }
    } else {
      for (const auto& [id, s] : ingest::load_scores(dir / label_file)) scores[id.value] = s;
    }
    std::vector<std::array<double, kNumTraits>> cohort;
    for (const auto& id : ids) {
      const auto it = scores.find(id.value);
      if (it == scores.end()) {
        throw Error(ErrorCode::InvalidArgument, "no trait scores for participant " + id.value);
      }
      cohort.push_back(it->second);
    }
    for (auto& p : ingest::build_trait_profiles(ids, cohort)) by_id[p.participant_id.value] = p;
  }
  for (const auto& id : ids) {
    const auto it = by_id.find(id.value);
    if (it == by_id.end()) {
      throw Error(ErrorCode::InvalidArgument, "no labels for participant " + id.value);
    }
    data.profiles.push_back(it->second);
  }
  return data;
}

Dataset load_dataset(const Manifest& manifest) {
  if (manifest.dataset.is_synthetic()) {
    auto generated = synth::generate(*manifest.dataset.synth);
    return Dataset{std::move(generated.sessions), std::move(generated.profiles)};
  }
  return load_dataset_directory(manifest.dataset.directory, manifest.recording);
}

FoldPlanner::FoldPlanner(const Dataset& data, const split::WindowingConfig& windowing,
                         Protocol protocol, Trait trait, int n_folds, std::uint64_t seed,
                         double validation_fraction)
    : windowing_(windowing), seed_(seed), trait_(trait), validation_fraction_(validation_fraction) {
  if (data.sessions.size() != data.profiles.size()) {
    throw Error(ErrorCode::InvalidArgument, "sessions and trait profiles are not aligned");
  }
  std::vector<split::SessionInfo> info;
  for (std::size_t i = 0; i < data.sessions.size(); ++i) {
    features_.push_back(featurize::prepare_session(data.sessions[i]));
    info.push_back({data.sessions[i].participant_id, data.sessions[i].size(),
                    data.profiles[i].label(trait)});
  }
  segments_ = split::segment_sessions(info, windowing);
  if (protocol == Protocol::SegmentStratified5Fold) {
    plan_ = split::assign_folds_stratified(segments_, n_folds, seed);
  } else {
    std::vector<std::pair<ParticipantId, TertileLabel>> roster;
    for (const auto& s : info) roster.emplace_back(s.participant_id, s.label);
    plan_ = split::assign_folds_by_participant(roster, n_folds, seed);
  }
  split::apply_plan(plan_, segments_);
}

FoldData FoldPlanner::prepare(int fold) const {
  FoldData out;
  out.fold = fold;
  std::vector<split::Segment> training, test;
  for (const auto& s : segments_) (s.fold == fold ? test : training).push_back(s);
  if (training.empty() || test.empty()) {
    throw Error(ErrorCode::InvalidArgument, "fold " + std::to_string(fold) + " is degenerate");
  }
  const auto [fit_idx, val_idx] = split::split_validation(
      training, validation_fraction_,
      make_rng({seed_, static_cast<std::uint64_t>(fold), static_cast<std::uint64_t>(trait_)})());

  featurize::NormalizationFitter fitter;
  for (std::size_t i : fit_idx) {
    const auto& s = training[i];
    fitter.add(features_[s.session_index], s.begin, s.end);
  }
  out.stats = fitter.finish();
  for (const auto& f : features_) {
    out.sequences.push_back(AugmentedSequence{
        f.participant_id, featurize::augment(featurize::apply_normalization(f, out.stats), f.config)});
  }
  auto add = [&](const split::Segment& s, std::vector<Window>& dst) {
    for (auto& w : split::make_windows(s, windowing_, &out.short_segments)) dst.push_back(std::move(w));
  };
  for (std::size_t i : fit_idx) add(training[i], out.fit);
  for (std::size_t i : val_idx) add(training[i], out.validation);
  for (const auto& s : test) add(s, out.test);
  return out;
}

train::WindowSet make_window_set(std::span<const Window> windows,
                                 std::span<const AugmentedSequence> sequences,
                                 FeatureVariant variant) {
  train::WindowSet set;
  for (const auto& w : windows) {
    set.push_back(featurize::select_variant(w.frames(sequences), variant).cast<float>(),
                  static_cast<int>(class_index(w.label)), w.fold);
  }
  return set;
}

std::uint64_t cell_seed(std::uint64_t seed, Protocol protocol, Trait trait, int fold,
                        FeatureVariant variant) {
  return make_rng({seed, static_cast<std::uint64_t>(fold), static_cast<std::uint64_t>(trait),
                   static_cast<std::uint64_t>(variant), static_cast<std::uint64_t>(protocol)})();
}

CellOutcome run_cell(const FoldData& data, FeatureVariant variant, Protocol protocol, Trait trait,
                     const Manifest& manifest) {
  const std::uint64_t seed = cell_seed(manifest.experiment.seed, protocol, trait, data.fold, variant);
  CellOutcome out;
  eval::ConfusionMatrix cm;

  if (variant == FeatureVariant::Statistical) {
    std::vector<Window> training = data.fit;
    training.insert(training.end(), data.validation.begin(), data.validation.end());
    auto features = [&](std::span<const Window> ws) {
      Eigen::MatrixXd x(static_cast<Eigen::Index>(ws.size()),
                        static_cast<Eigen::Index>(baseline::kStatDim));
      for (std::size_t i = 0; i < ws.size(); ++i) {
        const auto f = baseline::stat_features(ws[i].frames(data.sequences));
        for (std::size_t j = 0; j < f.size(); ++j) {
          x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
        }
      }
      return x;
    };
    std::vector<int> labels;
    for (const auto& w : training) {
      if (w.fold == data.fold) {
        throw Error(ErrorCode::LeakageViolation, "training window from the test fold");
      }
      labels.push_back(static_cast<int>(class_index(w.label)));
    }
    baseline::ForestConfig config = manifest.forest;
    config.seed = seed;
    const auto forest = baseline::fit_forest(features(training), labels, config);
    const auto preds = forest.predict(features(data.test));
    for (std::size_t i = 0; i < preds.size(); ++i) {
      cm.add(class_index(data.test[i].label), preds[i].label);
    }
  } else {
    const auto fit_set = make_window_set(data.fit, data.sequences, variant);
    const auto val_set = make_window_set(data.validation, data.sequences, variant);
    const auto test_set = make_window_set(data.test, data.sequences, variant);
    model::ModelDims dims = manifest.model;
    dims.input_dim = per_frame_dim(variant);
    train::TrainConfig config = manifest.train;
    config.seed = seed;
    auto fitted = train::fit(fit_set, val_set, data.fold, dims, config);
    const auto probs = train::predict_proba(fitted.params, test_set);
    for (Eigen::Index i = 0; i < probs.cols(); ++i) {
      Eigen::Index pred = 0;
      probs.col(i).maxCoeff(&pred);
      cm.add(static_cast<std::size_t>(test_set.labels[static_cast<std::size_t>(i)]),
             static_cast<std::size_t>(pred));
    }
    out.log = std::move(fitted.log);
  }
  out.result = eval::FoldResult::from_confusion(trait, data.fold, variant, protocol, cm);
  return out;
}

namespace {

struct Task {
  std::size_t planner = 0;
  Protocol protocol;
  Trait trait;
  int fold = 0;
  FeatureVariant variant;
};

}  // namespace

RunResult run_experiment(const Manifest& manifest, const Dataset& data, const Logger& log) {
  manifest.validate();
  const auto& exp = manifest.experiment;
  RunResult run;

  std::vector<std::unique_ptr<FoldPlanner>> planners;
  std::vector<Task> tasks;
  for (Protocol p : exp.protocols) {
    for (Trait t : exp.traits) {
      planners.push_back(std::make_unique<FoldPlanner>(data, manifest.windowing, p, t, exp.folds,
                                                       exp.seed, manifest.train.validation_fraction));
      const auto& plan = planners.back()->plan();
      for (const auto& w : plan.warnings) {
        run.warnings.push_back(std::string(protocol_name(p)) + "/" + trait_code(t) + ": " + w);
        if (log) log("warning: " + run.warnings.back());
      }
      io::write_file(manifest.output_dir / "reports" / std::string(protocol_name(p)) /
                         (std::string("fold_plan_") + trait_code(t) + ".csv"),
                     split::format_fold_plan(plan));
      for (int f = 0; f < exp.folds; ++f) {
        for (FeatureVariant v : exp.variants) tasks.push_back({planners.size() - 1, p, t, f, v});
      }
    }
  }

  std::vector<CellOutcome> outcomes(tasks.size());
  std::vector<char> done(tasks.size(), 0);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;

  auto cell_complete = [&](const Task& t) {
    std::vector<eval::FoldResult> cell;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& o = tasks[i];
      if (o.planner != t.planner || o.variant != t.variant) continue;
      if (!done[i]) return;
      cell.push_back(outcomes[i].result);
    }
    eval::emit_cell(manifest.output_dir, cell);
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto& o = tasks[i];
      if (o.planner != t.planner || o.variant != t.variant || outcomes[i].log.empty()) continue;
      io::write_file(eval::cell_directory(manifest.output_dir, o.protocol, o.variant, o.trait) /
                         ("train_log_fold" + std::to_string(o.fold) + ".csv"),
                     train::format_training_log(outcomes[i].log));
    }
  };

  auto worker = [&] {
    for (;;) {
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      const Task& t = tasks[i];
      try {
        const FoldData fold = planners[t.planner]->prepare(t.fold);
        CellOutcome outcome = run_cell(fold, t.variant, t.protocol, t.trait, manifest);
        std::lock_guard lock(mu);
        outcomes[i] = std::move(outcome);
        done[i] = 1;
        if (log) {
          log(std::string(protocol_name(t.protocol)) + "/" + std::string(variant_name(t.variant)) +
              "/" + trait_code(t.trait) + " fold " + std::to_string(t.fold) +
              ": accuracy " + io::format_fixed(outcomes[i].result.accuracy, 4) + ", macro-F1 " +
              io::format_fixed(outcomes[i].result.macro_f1, 4));
        }
        cell_complete(t);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_threads = std::min(exp.jobs, std::max<std::size_t>(tasks.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t k = 0; k < n_threads; ++k) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  for (const auto& o : outcomes) run.results.push_back(o.result);
  run.aggregates = eval::emit_report(manifest.output_dir, run.results);
  return run;
}

RunResult cmd_run(const Manifest& manifest, const Logger& log) {
  manifest.validate();
  verify_locked_inputs(manifest);
  const auto hashes = hash_inputs(manifest);
  io::write_file(manifest.output_dir / "manifest.lock", format_lock(manifest, hashes));
  const Dataset data = load_dataset(manifest);
  return run_experiment(manifest, data, log);
}

RunResult cmd_ablate(Manifest manifest, const Logger& log) {
  manifest.experiment.variants.assign(kAllVariants.begin(), kAllVariants.end());
  RunResult run = cmd_run(manifest, log);
  io::write_file(manifest.output_dir / "reports" / "ablation_delta.md",
                 eval::format_delta_markdown(run.aggregates));
  return run;
}

std::size_t cmd_synth(const fs::path& spec_path, const fs::path& out_dir) {
  const auto spec = synth::load_spec(spec_path);
  const auto data = synth::generate(spec);
  synth::write_dataset(data, out_dir);
  return data.sessions.size();
}

}  // namespace gazetrait::pipeline
