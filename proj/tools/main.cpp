// gazetrait command-line tool.
//
//   gazetrait synth  <spec.yaml> <out_dir>
//   gazetrait run    <manifest.yaml> [overrides]
//   gazetrait ablate <manifest.yaml> [overrides]
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "gazetrait/error.hpp"
#include "gazetrait/eval.hpp"
#include "gazetrait/pipeline.hpp"

namespace {

using namespace gazetrait;

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct RunArgs {
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<int> folds;
  std::optional<std::string> variant;
  std::optional<std::string> protocol;
  std::optional<std::string> trait;
  std::optional<std::string> out;
  std::optional<std::size_t> jobs;
  bool quiet = false;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
  cmd->add_option("manifest", a.manifest, "Experiment manifest or manifest.lock")->required();
  cmd->add_option("--seed", a.seed, "Global seed");
  cmd->add_option("--folds", a.folds, "Number of cross-validation folds");
  cmd->add_option("--variant", a.variant, "full, ts_gap, ts_only, statistical, or all");
  cmd->add_option("--protocol", a.protocol, "segment, participant, or all");
  cmd->add_option("--trait", a.trait, "O, C, E, A, N (comma-separated) or all");
  cmd->add_option("--out", a.out, "Output directory");
  cmd->add_option("--jobs", a.jobs, "Worker threads for grid cells");
  cmd->add_flag("-q,--quiet", a.quiet, "Only print the summary");
}

pipeline::Manifest resolve_manifest(const RunArgs& a) {
  auto m = pipeline::load_manifest(a.manifest);
  pipeline::Overrides o;
  o.seed = a.seed;
  o.folds = a.folds;
  if (a.variant) o.variants = pipeline::parse_variant_list(*a.variant);
  if (a.protocol) o.protocols = pipeline::parse_protocol_list(*a.protocol);
  if (a.trait) o.traits = pipeline::parse_trait_list(*a.trait);
  if (a.out) o.output_dir = *a.out;
  o.jobs = a.jobs;
  pipeline::apply_overrides(m, o);
  return m;
}

bool is_config_error(ErrorCode c) {
  return c == ErrorCode::ConfigError || c == ErrorCode::InvalidSpec || c == ErrorCode::HashMismatch;
}

void print_summary(const pipeline::Manifest& m, const pipeline::RunResult& r) {
  std::cout << eval::format_summary_markdown(r.aggregates);
  std::cout << "\nReports written to " << (m.output_dir / "reports").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaze-based Big Five tertile classification experiments"};
  app.require_subcommand(1);

  std::string spec_path, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset from a YAML spec");
  synth_cmd->add_option("spec", spec_path, "Synthetic dataset spec")->required();
  synth_cmd->add_option("out", synth_out, "Output directory")->required();

  RunArgs run_args, ablate_args;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment grid of a manifest");
  add_run_options(run_cmd, run_args);
  auto* ablate_cmd = app.add_subcommand("ablate", "Run all four variants and a delta table");
  add_run_options(ablate_cmd, ablate_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (synth_cmd->parsed()) {
      const std::size_t n = pipeline::cmd_synth(spec_path, synth_out);
      std::cout << "Wrote " << n << " recordings to " << synth_out << '\n';
      return kExitOk;
    }
    const bool ablate = ablate_cmd->parsed();
    const RunArgs& a = ablate ? ablate_args : run_args;
    const auto manifest = resolve_manifest(a);
    pipeline::Logger log;
    if (!a.quiet) log = [](const std::string& line) { std::cerr << line << std::endl; };
    const auto result = ablate ? pipeline::cmd_ablate(manifest, log) : pipeline::cmd_run(manifest, log);
    print_summary(manifest, result);
    return kExitOk;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}
