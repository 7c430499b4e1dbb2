// sampa-bench: runs optimizer comparisons, lambda sweeps and theory checks
// from a config file or a built-in preset.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "sampa/bench/config.hpp"
#include "sampa/bench/experiment.hpp"
#include "sampa/bench/presets.hpp"
#include "sampa/errors.hpp"
#include "sampa/format.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

void print_summary(const sampa::bench::ComparisonSummary& summary) {
  std::printf("%-22s %5s %13s %13s %13s %10s %9s\n", "method", "fail", "final_f", "f_std", "final_|g|", "seq_grads",
              "speedup");
  for (const auto& m : summary.methods) {
    std::printf("%-22s %2zu/%-2zu %13.6g %13.6g %13.6g %10.0f %9.4f\n", m.label.c_str(), m.failures, m.runs,
                m.final_f_mean, m.final_f_std, m.final_grad_norm_mean, m.seq_grads_mean, m.speedup_vs_sam);
  }
}

}  // namespace

int main(int argc, char** argv) {
  using namespace sampa::bench;
  CLI::App app{"SAM-family optimizer benchmark harness"};
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::string seeds;
  std::string mode;
  std::size_t jobs = 1;
  bool print_config = false;
  bool list_presets = false;

  auto* config_opt = app.add_option("--config", config_path, "experiment config file (sectioned key = value)");
  auto* preset_opt = app.add_option("--preset", preset, "built-in experiment")
                         ->check(CLI::IsMember({"fig1", "lemma1", "theorem1", "alignment", "timing", "lambda-sweep"}));
  config_opt->excludes(preset_opt);
  app.add_option("--out", out_dir, "output directory (overrides [run] out)");
  app.add_option("--seeds", seeds, "comma-separated seeds or a-b ranges (overrides [run] seeds)");
  app.add_option("--mode", mode, "serial or parallel (overrides [run] mode)")
      ->check(CLI::IsMember({"serial", "parallel"}));
  app.add_option("--jobs", jobs, "(method, seed) pairs run concurrently; 0 = hardware threads")
      ->check(CLI::NonNegativeNumber);
  app.add_flag("--print-config", print_config, "print the resolved config and exit");
  app.add_flag("--list-presets", list_presets, "list built-in presets and exit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (list_presets) {
    for (auto name : preset_names()) std::cout << name << '\n';
    return 0;
  }

  ExperimentConfig config;
  try {
    if (!config_path.empty()) {
      config = parse_config_file(config_path);
    } else if (!preset.empty()) {
      config = load_preset(preset);
    } else {
      std::cerr << "error: one of --config or --preset is required\n";
      return kExitConfig;
    }
    if (!out_dir.empty()) config.out_dir = out_dir;
    if (!seeds.empty()) config.seeds = parse_seed_list(seeds);
    if (!mode.empty()) config.mode = mode == "parallel" ? Mode::parallel : Mode::serial;
    config.validate();
  } catch (const sampa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  if (print_config) {
    std::cout << to_config_text(config);
    return 0;
  }
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());

  try {
    if (!config.sweep_lambdas.empty()) {
      const SweepResult sweep = lambda_sweep(config, config.sweep_lambdas, jobs);
      print_summary(sweep.experiment.summary);
      std::cout << "wrote " << sweep.experiment.artifacts.size() << " artifacts to " << config.out_dir.string()
                << '\n';
      return sweep.experiment.all_ok() ? 0 : kExitRuntime;
    }
    const ExperimentResult result = run_experiment(config, jobs);
    print_summary(result.summary);
    for (const auto& p : result.pairs) {
      if (!p.ok) std::cerr << "failed: " << p.label << " seed " << p.seed << ": " << p.error << '\n';
    }
    std::cout << "wrote " << result.artifacts.size() << " artifacts to " << config.out_dir.string() << '\n';
    return result.all_ok() ? 0 : kExitRuntime;
  } catch (const sampa::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
}
