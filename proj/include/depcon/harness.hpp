#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "depcon/baselines.hpp"
#include "depcon/config.hpp"
#include "depcon/depcon.hpp"
#include "depcon/models.hpp"
#include "depcon/ode.hpp"
#include "depcon/rng.hpp"
#include "depcon/signal.hpp"

namespace depcon {

// Mean absolute percentage error over parameter components.
inline double mape(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size()) throw std::invalid_argument("mape: size mismatch");
  double acc = 0.0;
  for (int i = 0; i < truth.size(); ++i) {
    if (truth(i) == 0.0) throw std::domain_error("mape: zero truth component");
    acc += std::abs(estimate(i) - truth(i)) / std::abs(truth(i));
  }
  return acc / static_cast<double>(truth.size());
}

// Random initial guess: uniform per component in [truth/4, 4*truth].
inline Eigen::VectorXd sample_initial(const Eigen::VectorXd& truth, std::uint64_t seed) {
  for (int i = 0; i < truth.size(); ++i)
    if (!(truth(i) > 0.0)) throw std::domain_error("sample_initial: truth must be > 0");
  Rng rng(seed);
  Eigen::VectorXd p(truth.size());
  for (int i = 0; i < truth.size(); ++i) p(i) = rng.uniform(truth(i) / 4.0, 4.0 * truth(i));
  return p;
}

enum class Benchmark { LotkaVolterra, Circadian };

inline std::string to_string(Benchmark b) {
  return b == Benchmark::LotkaVolterra ? "lotka-volterra" : "circadian";
}

inline Benchmark benchmark_from_string(const std::string& s) {
  if (s == "lotka-volterra") return Benchmark::LotkaVolterra;
  if (s == "circadian") return Benchmark::Circadian;
  throw ConfigError("unknown benchmark: " + s);
}

// Per-benchmark synthetic input settings. The LV forcing is a seeded pulse
// train; the circadian input is a square-wave light schedule.
struct SignalSettings {
  double dt = 0.0;  // 0 means the per-benchmark default
  int pulses = 6;
  double amplitude = 1.0;
  double width = 0.5;
  double period_h = 24.0;
  double on_fraction = 0.5;
  double lux = 250.0;
  double jitter_h = 0.0;
};

struct ObservationSettings {
  double t_end = 0.0;  // 0 means the per-benchmark default
  int count = 80;
  double noise_sd = 0.0;
};

struct BenchmarkSetup {
  OdeModel model;
  SampledSignal input;
  Eigen::VectorXd y0;
  Eigen::VectorXd truth;
  ParamBox box;
  TimeGrid grid;
  ObservationSet obs;
};

inline BenchmarkSetup make_benchmark(Benchmark which, SignalSettings sig, ObservationSettings obs,
                                     std::uint64_t data_seed, double h_target = 0.0) {
  BenchmarkSetup setup;
  if (which == Benchmark::LotkaVolterra) {
    if (sig.dt == 0.0) sig.dt = 0.02;
    if (obs.t_end == 0.0) obs.t_end = 10.0;
    setup.model = lv_model();
    setup.truth = lv_true_params();
    setup.y0 = lv_default_y0();
    setup.input = make_pulse_train(obs.t_end, sig.dt, sig.pulses, sig.amplitude, sig.width,
                                   splitmix64(data_seed));
  } else {
    if (sig.dt == 0.0) sig.dt = 0.1;
    if (obs.t_end == 0.0) obs.t_end = 144.0;
    setup.model = circadian_model();
    setup.truth = circadian_true_params();
    setup.y0 = circadian_default_y0();
    LightSchedule sched;
    sched.period_h = sig.period_h;
    sched.on_fraction = sig.on_fraction;
    sched.lux = sig.lux;
    sched.jitter_h = sig.jitter_h;
    sched.seed = splitmix64(data_seed);
    setup.input = make_light_schedule(sched, obs.t_end, sig.dt);
  }
  setup.box = ParamBox::around(setup.truth);
  if (h_target == 0.0) h_target = sig.dt / 4.0;
  setup.grid = grid_for_observations(obs.t_end, obs.count, h_target);
  std::uint64_t noise_seed = data_seed ^ 0x9e3779b97f4a7c15ULL;
  setup.obs = generate_observations(setup.model, setup.truth, setup.input, Interp::NearestLeft,
                                    setup.y0, setup.grid, obs.count, obs.noise_sd,
                                    splitmix64(noise_seed));
  return setup;
}

struct ExperimentConfig {
  Benchmark benchmark = Benchmark::LotkaVolterra;
  std::string method = "depcon";
  int trials = 30;
  std::uint64_t seed = 42;
  SignalSettings signal;
  ObservationSettings observations;
  DepconConfig depcon;
  BaselineConfig baseline;
  std::string out_dir = "results";
  int jobs = 1;
  bool quiet = false;

  void validate() const {
    if (trials < 1) throw ConfigError("ExperimentConfig: trials must be >= 1");
    if (jobs < 1) throw ConfigError("ExperimentConfig: jobs must be >= 1");
    if (method != "depcon") baseline_method_from_string(method);
  }
};

// Full schema of the key-value config file; unknown keys are rejected.
inline ExperimentConfig experiment_config_from_file(const std::string& path) {
  ConfigFile f = ConfigFile::parse_file(path);
  ExperimentConfig cfg;
  cfg.benchmark = benchmark_from_string(f.get_string("experiment", "benchmark", "lotka-volterra"));
  cfg.method = f.get_string("experiment", "method", "depcon");
  cfg.trials = static_cast<int>(f.get_int("experiment", "trials", 30));
  cfg.seed = f.get_u64("experiment", "seed", 42);
  cfg.out_dir = f.get_string("experiment", "out", "results");
  cfg.jobs = static_cast<int>(f.get_int("experiment", "jobs", 1));

  cfg.observations.t_end = f.get_double("observations", "t_end", 0.0);
  cfg.observations.count = static_cast<int>(f.get_int("observations", "count", 80));
  cfg.observations.noise_sd = f.get_double("observations", "noise_sd", 0.0);

  cfg.signal.dt = f.get_double("signal", "dt", 0.0);
  cfg.signal.pulses = static_cast<int>(f.get_int("signal", "pulses", 6));
  cfg.signal.amplitude = f.get_double("signal", "amplitude", 1.0);
  cfg.signal.width = f.get_double("signal", "width", 0.5);
  cfg.signal.period_h = f.get_double("signal", "period_h", 24.0);
  cfg.signal.on_fraction = f.get_double("signal", "on_fraction", 0.5);
  cfg.signal.lux = f.get_double("signal", "lux", 250.0);
  cfg.signal.jitter_h = f.get_double("signal", "jitter_h", 0.0);

  cfg.depcon.scales = static_cast<int>(f.get_int("depcon", "scales", 8));
  cfg.depcon.tau_max =
      f.get_double("depcon", "tau_max", cfg.benchmark == Benchmark::Circadian ? 9.0 : 1.0);
  cfg.depcon.adam.lr_terminal = f.get_double("depcon", "lr_terminal", 1e-2);
  cfg.depcon.adam.lr_net = f.get_double("depcon", "lr_net", 1e-3);
  cfg.depcon.adam.beta1 = f.get_double("depcon", "beta1", 0.9);
  cfg.depcon.adam.beta2 = f.get_double("depcon", "beta2", 0.999);
  cfg.depcon.adam.eps = f.get_double("depcon", "adam_eps", 1e-8);
  cfg.depcon.max_iters = static_cast<int>(f.get_int("depcon", "max_iters", 2000));
  cfg.depcon.grad_tol = f.get_double("depcon", "grad_tol", 1e-6);
  cfg.depcon.step_h = f.get_double("depcon", "step_h", 0.0);
  cfg.depcon.divergence_penalty = f.get_double("depcon", "divergence_penalty", 1e6);

  if (cfg.method != "depcon")
    cfg.baseline.method = baseline_method_from_string(cfg.method);
  cfg.baseline.max_evals = static_cast<int>(f.get_int("baseline", "max_evals", 4000));
  cfg.baseline.nm_simplex_frac = f.get_double("baseline", "nm_simplex_frac", 0.05);
  cfg.baseline.lm_lambda0 = f.get_double("baseline", "lm_lambda0", 1e-3);
  cfg.baseline.lm_growth = f.get_double("baseline", "lm_growth", 10.0);
  cfg.baseline.lbfgs_memory = static_cast<int>(f.get_int("baseline", "lbfgs_memory", 10));
  cfg.baseline.de_population = static_cast<int>(f.get_int("baseline", "de_population", 40));
  cfg.baseline.de_weight = f.get_double("baseline", "de_weight", 0.8);
  cfg.baseline.de_crossover = f.get_double("baseline", "de_crossover", 0.9);

  f.reject_unknown();
  cfg.validate();
  return cfg;
}

struct ExperimentSummary {
  std::string benchmark;
  std::string method;
  int trials = 0;
  std::uint64_t seed = 0;
  Eigen::VectorXd truth;
  Eigen::VectorXd param_mean;
  Eigen::VectorXd param_sd;
  std::vector<double> trial_mapes;  // NaN marks a diverged trial
  double mape_mean = 0.0;
  double mape_sd = 0.0;
  double mape_median = 0.0;
  int diverged = 0;
  double total_seconds = 0.0;
  double mean_trial_seconds = 0.0;

  nlohmann::json to_json(bool include_timing = true) const {
    nlohmann::json j;
    j["schema"] = 1;
    j["benchmark"] = benchmark;
    j["method"] = method;
    j["trials"] = trials;
    j["seed"] = seed;
    j["truth"] = depcon::to_json(truth);
    j["per_parameter"] = {{"mean", depcon::to_json(param_mean)},
                          {"sd", depcon::to_json(param_sd)}};
    nlohmann::json mapes = nlohmann::json::array();
    for (double m : trial_mapes) {
      if (std::isnan(m)) mapes.push_back(nullptr);
      else mapes.push_back(m);
    }
    j["mape"] = {{"values", mapes},
                 {"mean", mape_mean},
                 {"sd", mape_sd},
                 {"median", mape_median}};
    j["diverged_trials"] = diverged;
    if (include_timing)
      j["timing"] = {{"total_seconds", total_seconds},
                     {"mean_trial_seconds", mean_trial_seconds}};
    return j;
  }
};

namespace harness_detail {

inline double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Fixed-size work pool over trial indices; results land in index order so
// aggregation is deterministic regardless of scheduling.
inline void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
  if (jobs <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t) {
    pool.emplace_back([&, t]() {
      try {
        for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline ExperimentSummary summarize(const ExperimentConfig& cfg, const BenchmarkSetup& setup,
                                   const std::vector<TrialResult>& results) {
  ExperimentSummary s;
  s.benchmark = to_string(cfg.benchmark);
  s.method = cfg.method;
  s.trials = static_cast<int>(results.size());
  s.seed = cfg.seed;
  s.truth = setup.truth;

  std::vector<double> valid_mapes;
  std::vector<std::vector<double>> params(static_cast<std::size_t>(setup.truth.size()));
  double total_seconds = 0.0;
  for (const auto& r : results) {
    total_seconds += r.iter_seconds.empty() ? 0.0 : r.iter_seconds.back();
    if (r.reason == StopReason::Divergence && r.method != "depcon") {
      s.trial_mapes.push_back(std::numeric_limits<double>::quiet_NaN());
      s.diverged += 1;
      continue;
    }
    const double m = mape(r.estimate, setup.truth);
    s.trial_mapes.push_back(m);
    valid_mapes.push_back(m);
    for (int i = 0; i < r.estimate.size(); ++i)
      params[static_cast<std::size_t>(i)].push_back(r.estimate(i));
  }

  s.param_mean = Eigen::VectorXd::Zero(setup.truth.size());
  s.param_sd = Eigen::VectorXd::Zero(setup.truth.size());
  for (int i = 0; i < setup.truth.size(); ++i) {
    const auto& col = params[static_cast<std::size_t>(i)];
    if (col.empty()) continue;
    double mean = 0.0;
    for (double x : col) mean += x;
    mean /= static_cast<double>(col.size());
    s.param_mean(i) = mean;
    s.param_sd(i) = sample_sd(col, mean);
  }
  if (!valid_mapes.empty()) {
    double mean = 0.0;
    for (double m : valid_mapes) mean += m;
    mean /= static_cast<double>(valid_mapes.size());
    s.mape_mean = mean;
    s.mape_sd = sample_sd(valid_mapes, mean);
    s.mape_median = median(valid_mapes);
  } else {
    s.mape_mean = s.mape_sd = s.mape_median = std::numeric_limits<double>::quiet_NaN();
  }
  s.total_seconds = total_seconds;
  s.mean_trial_seconds = total_seconds / std::max<std::size_t>(1, results.size());
  return s;
}

inline void write_plot_data(const ExperimentConfig& cfg, const BenchmarkSetup& setup,
                            const std::vector<TrialResult>& results,
                            const std::filesystem::path& dir) {
  {
    std::ofstream scatter(dir / "scatter.csv");
    scatter.precision(17);
    scatter << "trial";
    for (int i = 0; i < setup.truth.size(); ++i) scatter << ",p" << (i + 1);
    for (int i = 0; i < setup.truth.size(); ++i) scatter << ",norm_p" << (i + 1);
    scatter << ",mape\n";
    for (std::size_t t = 0; t < results.size(); ++t) {
      const auto& r = results[t];
      scatter << t;
      for (int i = 0; i < r.estimate.size(); ++i) scatter << "," << r.estimate(i);
      for (int i = 0; i < r.estimate.size(); ++i)
        scatter << "," << r.estimate(i) / setup.truth(i);
      const bool div = r.reason == StopReason::Divergence && r.method != "depcon";
      scatter << "," << (div ? std::numeric_limits<double>::quiet_NaN()
                             : mape(r.estimate, setup.truth))
              << "\n";
    }
  }
  {
    std::ofstream trace(dir / "mape_walltime.csv");
    trace.precision(17);
    trace << "trial,step,seconds,mape\n";
    for (std::size_t t = 0; t < results.size(); ++t) {
      const auto& r = results[t];
      for (std::size_t k = 0; k < r.estimate_history.size(); ++k)
        trace << t << "," << k << "," << r.iter_seconds[k] << ","
              << mape(r.estimate_history[k], setup.truth) << "\n";
    }
  }
  {
    std::ofstream box(dir / "mape_box.csv");
    box.precision(17);
    box << "trial,mape\n";
    for (std::size_t t = 0; t < results.size(); ++t) {
      const auto& r = results[t];
      const bool div = r.reason == StopReason::Divergence && r.method != "depcon";
      box << t << ","
          << (div ? std::numeric_limits<double>::quiet_NaN() : mape(r.estimate, setup.truth))
          << "\n";
    }
  }
}

inline void write_report(const ExperimentSummary& s, const std::filesystem::path& dir) {
  std::ofstream out(dir / "report.md");
  out.precision(6);
  out << "# " << s.benchmark << " / " << s.method << "\n\n";
  out << "- trials: " << s.trials << " (diverged: " << s.diverged << ")\n";
  out << "- seed: " << s.seed << "\n";
  out << "- MAPE: " << s.mape_mean << " +/- " << s.mape_sd << " (median " << s.mape_median
      << ")\n\n";
  out << "| parameter | true | mean | sd |\n|---|---|---|---|\n";
  for (int i = 0; i < s.truth.size(); ++i)
    out << "| p" << (i + 1) << " | " << s.truth(i) << " | " << s.param_mean(i) << " | "
        << s.param_sd(i) << " |\n";
}

}  // namespace harness_detail

// Runs K trials on freshly generated benchmark data (one dataset per config
// seed), writes per-trial JSON, plot CSVs, summary JSON, and a Markdown
// report under out_dir, and returns the summary.
inline ExperimentSummary run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const BenchmarkSetup setup =
      make_benchmark(cfg.benchmark, cfg.signal, cfg.observations, cfg.seed, cfg.depcon.step_h);

  ScaleHierarchy hierarchy;
  const bool is_depcon = cfg.method == "depcon";
  if (is_depcon) hierarchy = build_hierarchy(setup.input, cfg.depcon.scales, cfg.depcon.tau_max);

  std::vector<TrialResult> results(static_cast<std::size_t>(cfg.trials));
  harness_detail::parallel_for(cfg.trials, cfg.jobs, [&](int i) {
    const std::uint64_t trial_seed = cfg.seed + static_cast<std::uint64_t>(i);
    if (is_depcon) {
      DepconConfig dc = cfg.depcon;
      dc.box = setup.box;
      dc.seed = trial_seed;
      results[static_cast<std::size_t>(i)] =
          train(setup.model, setup.input, setup.obs, setup.y0, dc, &hierarchy);
    } else {
      BaselineConfig bc = cfg.baseline;
      bc.box = setup.box;
      results[static_cast<std::size_t>(i)] =
          run_baseline_trial(setup.model, setup.input, setup.obs, setup.y0, bc, trial_seed);
    }
    if (!cfg.quiet)
      std::cerr << "[" << cfg.method << "] trial " << i << " done\n";
  });

  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < results.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "trial_%03zu.json", i);
    std::ofstream out(dir / name);
    out << to_json(results[i]).dump(2) << "\n";
  }
  const ExperimentSummary summary = harness_detail::summarize(cfg, setup, results);
  {
    std::ofstream out(dir / "summary.json");
    out << summary.to_json().dump(2) << "\n";
  }
  harness_detail::write_plot_data(cfg, setup, results, dir);
  harness_detail::write_report(summary, dir);
  return summary;
}

// Re-runs the experiment for each smoothing-grid size on identical data and
// emits the combined box-plot CSV (one row per trial per N).
inline std::vector<ExperimentSummary> sweep_scales(const ExperimentConfig& base,
                                                   const std::vector<int>& grid_sizes) {
  if (grid_sizes.empty()) throw ConfigError("sweep_scales: empty grid-size list");
  std::vector<ExperimentSummary> summaries;
  const std::filesystem::path root(base.out_dir);
  std::filesystem::create_directories(root);
  std::ofstream box(root / "sweep_box.csv");
  box.precision(17);
  box << "N,trial,mape\n";
  for (int n : grid_sizes) {
    ExperimentConfig cfg = base;
    cfg.depcon.scales = n;
    cfg.out_dir = (root / ("N_" + std::to_string(n))).string();
    ExperimentSummary s = run_experiment(cfg);
    for (std::size_t t = 0; t < s.trial_mapes.size(); ++t)
      box << n << "," << t << "," << s.trial_mapes[t] << "\n";
    summaries.push_back(std::move(s));
  }
  return summaries;
}

// Emits the benchmark's input signal and observations in the CSV formats
// the loaders understand.
inline void emit_benchmark_data(const ExperimentConfig& cfg) {
  const BenchmarkSetup setup =
      make_benchmark(cfg.benchmark, cfg.signal, cfg.observations, cfg.seed, cfg.depcon.step_h);
  const std::filesystem::path dir(cfg.out_dir);
  std::filesystem::create_directories(dir);
  save_signal_csv(setup.input, (dir / "signal.csv").string());
  save_observations_csv(setup.obs, (dir / "observations.csv").string());
  const Trajectory traj =
      integrate(setup.model, setup.truth, setup.input, Interp::NearestLeft, setup.y0, setup.grid);
  save_trajectory_csv(traj, (dir / "true_trajectory.csv").string());
}

}  // namespace depcon
