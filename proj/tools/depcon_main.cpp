#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depcon/config.hpp"
#include "depcon/harness.hpp"
#include "depcon/theory.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 2;
constexpr int kExitExperimentError = 3;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  bool out_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int jobs = 0;
  bool quiet = false;
};

void add_common(CLI::App* sub, CommonFlags& flags, bool config_required) {
  auto* opt = sub->add_option("--config", flags.config_path, "experiment config file");
  if (config_required) opt->required();
  sub->add_option("--out", flags.out_dir, "output directory")
      ->each([&](const std::string&) { flags.out_set = true; });
  sub->add_option("--seed", flags.seed, "base seed override")
      ->each([&](const std::string&) { flags.seed_set = true; });
  sub->add_option("--jobs", flags.jobs, "trial worker threads");
  sub->add_flag("--quiet", flags.quiet, "suppress progress output");
}

depcon::ExperimentConfig load_config(const CommonFlags& flags) {
  depcon::ExperimentConfig cfg;
  if (!flags.config_path.empty())
    cfg = depcon::experiment_config_from_file(flags.config_path);
  if (flags.out_set) cfg.out_dir = flags.out_dir;
  if (flags.seed_set) cfg.seed = flags.seed;
  if (flags.jobs > 0) cfg.jobs = flags.jobs;
  if (flags.quiet) cfg.quiet = true;
  cfg.validate();
  return cfg;
}

void print_summary(const depcon::ExperimentSummary& s) {
  std::cout << s.benchmark << " / " << s.method << ": MAPE " << s.mape_mean << " +/- "
            << s.mape_sd << " over " << s.trials << " trials (" << s.diverged
            << " diverged), results in place\n";
}

int cmd_run(const CommonFlags& flags) {
  const auto cfg = load_config(flags);
  print_summary(depcon::run_experiment(cfg));
  return kExitOk;
}

int cmd_sweep(const CommonFlags& flags, const std::vector<int>& grid_sizes) {
  auto cfg = load_config(flags);
  const auto summaries = depcon::sweep_scales(cfg, grid_sizes);
  for (const auto& s : summaries) print_summary(s);
  return kExitOk;
}

int cmd_baselines(const CommonFlags& flags) {
  auto cfg = load_config(flags);
  const std::string root = cfg.out_dir;
  for (const std::string method :
       {"nelder-mead", "levenberg-marquardt", "l-bfgs", "differential-evolution"}) {
    depcon::ExperimentConfig mc = cfg;
    mc.method = method;
    mc.baseline.method = depcon::baseline_method_from_string(method);
    mc.out_dir = (std::filesystem::path(root) / method).string();
    print_summary(depcon::run_experiment(mc));
  }
  return kExitOk;
}

int cmd_gen_data(const CommonFlags& flags) {
  const auto cfg = load_config(flags);
  depcon::emit_benchmark_data(cfg);
  std::cout << "wrote signal.csv, observations.csv, true_trajectory.csv to " << cfg.out_dir
            << "\n";
  return kExitOk;
}

// Appendix check suite on the Lotka-Volterra benchmark plus the circadian
// mollifier/stability checks.
int cmd_theory(const CommonFlags& flags) {
  auto cfg = load_config(flags);
  using namespace depcon;
  std::vector<SweepReport> reports;

  const BenchmarkSetup lv = make_benchmark(Benchmark::LotkaVolterra, {}, {}, cfg.seed);
  reports.push_back(check_mollifier_convergence(lv.input, {1.0, 0.25, 0.0625, 0.015625}));
  reports.push_back(check_trajectory_stability(
      lv.model, lv.truth, lv.input,
      {{0.05, 0.1}, {0.05, 0.2}, {0.05, 0.4}, {0.1, 0.2}, {0.1, 0.4}, {0.2, 0.4}}, lv.y0,
      lv.grid));
  reports.push_back(check_minimizer_convergence(lv.model, lv.input, lv.obs,
                                                {0.4, 0.2, 0.1, 0.05, 0.0}, lv.truth, lv.y0,
                                                lv.grid, cfg.seed));
  reports.push_back(check_corrector_error_scaling(lv.model, lv.input, lv.obs, 0.2,
                                                  {1e-2, 1e-3, 1e-4}, lv.truth, lv.y0, lv.grid,
                                                  cfg.seed));
  {
    DepconConfig dc = cfg.depcon;
    dc.box = lv.box;
    dc.seed = cfg.seed;
    const ScaleHierarchy hierarchy = build_hierarchy(lv.input, dc.scales, dc.tau_max);
    const TrialResult run = train(lv.model, lv.input, lv.obs, lv.y0, dc, &hierarchy);
    OneStepContext ctx{&run.net, &hierarchy, run.chain, lv.box, lv.y0, lv.grid};
    reports.push_back(check_one_step_bound(lv.model, lv.obs, ctx, 1, cfg.seed));
  }

  const BenchmarkSetup circ = make_benchmark(Benchmark::Circadian, {}, {}, cfg.seed);
  reports.push_back(check_mollifier_convergence(circ.input, {9.0, 3.0, 1.0, 0.3}));
  reports.push_back(check_trajectory_stability(circ.model, circ.truth, circ.input,
                                               {{0.5, 1.0}, {0.5, 2.0}, {1.0, 2.0}, {2.0, 4.0}},
                                               circ.y0, circ.grid));

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  save_reports_json(reports, (dir / "theory.json").string());
  save_reports_markdown(reports, (dir / "theory.md").string());

  bool all_pass = true;
  for (const auto& r : reports) {
    std::cout << (r.passed() ? "PASS " : "FAIL ") << r.name << "\n";
    all_pass = all_pass && r.passed();
  }
  return all_pass ? kExitOk : kExitExperimentError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-scale predictor-corrector parameter estimation for non-autonomous ODEs"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, base_flags, theory_flags, gen_flags;
  std::string sweep_list = "4,8,12";

  auto* run = app.add_subcommand("run", "run one experiment config");
  add_common(run, run_flags, true);
  auto* sweep = app.add_subcommand("sweep", "smoothing-grid sweep on one config");
  add_common(sweep, sweep_flags, true);
  sweep->add_option("--scales", sweep_list, "comma-separated grid sizes (default 4,8,12)");
  auto* baselines = app.add_subcommand("baselines", "all four baselines on one benchmark");
  add_common(baselines, base_flags, true);
  auto* theory = app.add_subcommand("theory", "appendix numerical verification suite");
  add_common(theory, theory_flags, false);
  auto* gen = app.add_subcommand("gen-data", "emit benchmark signals/observations");
  add_common(gen, gen_flags, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (sweep->parsed()) {
      std::vector<int> sizes;
      std::stringstream ss(sweep_list);
      std::string tok;
      while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
      return cmd_sweep(sweep_flags, sizes);
    }
    if (baselines->parsed()) return cmd_baselines(base_flags);
    if (theory->parsed()) return cmd_theory(theory_flags);
    if (gen->parsed()) return cmd_gen_data(gen_flags);
  } catch (const depcon::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitExperimentError;
  }
  return kExitConfigError;
}
