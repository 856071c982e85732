// Command-line entry point: train runs a configuration, ablate runs the
// four consensus/tracking groups, compare ranks two run artifacts, verify
// executes the property suites, export-plots flattens a metrics file.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 verification
// failure, 3 runtime error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dvdn/harness.hpp"
#include "dvdn/verify.hpp"

namespace {

std::string default_output_root() {
  if (const char* env = std::getenv("DVDN_OUTPUT_ROOT")) return env;
  return "runs";
}

dvdn::ExperimentConfig resolve_config(const std::string& config_path,
                                      const std::vector<std::string>& overrides,
                                      int threads) {
  dvdn::ExperimentConfig config = config_path.empty()
                                      ? dvdn::ExperimentConfig{}
                                      : dvdn::load_config_file(config_path);
  for (const std::string& o : overrides) dvdn::apply_override(config, o);
  if (threads > 0) config.threads = threads;
  config.validate();
  return config;
}

int cmd_train(const std::string& config_path,
              const std::vector<std::string>& overrides, int threads,
              const std::string& out_dir) {
  const dvdn::ExperimentConfig config =
      resolve_config(config_path, overrides, threads);
  std::cout << "run_id: " << config.resolved_run_id() << "\n"
            << "output: " << out_dir << "\n";
  const dvdn::RunResult result = dvdn::train(config);
  const std::string run_dir = dvdn::write_run_artifact(result, out_dir);
  std::cout << "metrics: " << run_dir << "/metrics.csv\n";
  const dvdn::MaxAverageReturn best =
      dvdn::max_average_return(result.checkpoints);
  std::cout << "max average episodic return: " << best.value << " at step "
            << best.step << " (95% CI [" << best.ci.low << ", " << best.ci.high
            << "])\n";
  return 0;
}

int cmd_ablate(const std::string& config_path,
               const std::vector<std::string>& overrides, int threads,
               const std::string& out_dir) {
  const dvdn::ExperimentConfig base =
      resolve_config(config_path, overrides, threads);
  std::cout << "output: " << out_dir << "\n";
  const std::vector<dvdn::AblationGroupResult> groups = dvdn::run_ablation(base);
  const std::string csv = dvdn::render_ablation_csv(groups);
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(out_dir) / (base.resolved_run_id() + "-ablation");
  fs::create_directories(dir);
  std::ofstream os(dir / "ablation.csv");
  os << csv;
  std::cout << csv << "written: " << (dir / "ablation.csv").string() << "\n";
  return 0;
}

int cmd_compare(const std::string& run_a, const std::string& run_b) {
  const dvdn::LoadedRun a = dvdn::read_metrics_csv(run_a + "/metrics.csv");
  const dvdn::LoadedRun b = dvdn::read_metrics_csv(run_b + "/metrics.csv");
  dvdn::Rng rng(dvdn::split_seed(0, "compare"));
  std::cout << dvdn::to_string(dvdn::compare_runs(a, b, rng)) << "\n";
  return 0;
}

int cmd_verify() {
  bool all_passed = true;
  for (const dvdn::SuiteResult& r : dvdn::run_verification_suites()) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": "
              << r.detail << "\n";
    all_passed = all_passed && r.passed;
  }
  return all_passed ? 0 : 2;
}

int cmd_export_plots(const std::string& run_dir, std::string out_file) {
  const dvdn::LoadedRun run = dvdn::read_metrics_csv(run_dir + "/metrics.csv");
  if (out_file.empty()) out_file = run_dir + "/plot_data.csv";
  std::ofstream os(out_file);
  if (!os) throw std::runtime_error("cannot write " + out_file);
  os << dvdn::render_plot_csv(run);
  std::cout << "written: " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized cooperative Q-learning over switching topologies"};
  app.require_subcommand(1);

  std::string config_path, out_dir = default_output_root(), out_file;
  std::string run_a, run_b, run_dir;
  std::vector<std::string> overrides;
  int threads = 0;

  CLI::App* train = app.add_subcommand("train", "train one configuration");
  train->add_option("--config", config_path, "configuration file");
  train->add_option("--override", overrides, "dotted-key=value override");
  train->add_option("--threads", threads, "seed-parallel workers (1 = reference mode)");
  train->add_option("--out", out_dir, "output root (or DVDN_OUTPUT_ROOT)");

  CLI::App* ablate = app.add_subcommand("ablate", "run the ablation groups");
  ablate->add_option("--config", config_path, "configuration file");
  ablate->add_option("--override", overrides, "dotted-key=value override");
  ablate->add_option("--threads", threads, "seed-parallel workers");
  ablate->add_option("--out", out_dir, "output root (or DVDN_OUTPUT_ROOT)");

  CLI::App* compare = app.add_subcommand("compare", "rank two run artifacts");
  compare->add_option("run_a", run_a, "first run directory")->required();
  compare->add_option("run_b", run_b, "second run directory")->required();

  app.add_subcommand("verify", "run the property suites");

  CLI::App* export_plots =
      app.add_subcommand("export-plots", "flatten metrics into plot data");
  export_plots->add_option("run_dir", run_dir, "run directory")->required();
  export_plots->add_option("--out", out_file, "output csv path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, overrides, threads, out_dir);
    if (ablate->parsed()) return cmd_ablate(config_path, overrides, threads, out_dir);
    if (compare->parsed()) return cmd_compare(run_a, run_b);
    if (export_plots->parsed()) return cmd_export_plots(run_dir, out_file);
    return cmd_verify();
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
