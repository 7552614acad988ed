#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "depcon/depcon.hpp"
#include "depcon/ode.hpp"
#include "depcon/rng.hpp"

namespace depcon {

enum class BaselineMethod { NelderMead, LevenbergMarquardt, LBfgs, DifferentialEvolution };

inline std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::NelderMead: return "nelder-mead";
    case BaselineMethod::LevenbergMarquardt: return "levenberg-marquardt";
    case BaselineMethod::LBfgs: return "l-bfgs";
    case BaselineMethod::DifferentialEvolution: return "differential-evolution";
  }
  return "unknown";
}

inline BaselineMethod baseline_method_from_string(const std::string& s) {
  if (s == "nelder-mead") return BaselineMethod::NelderMead;
  if (s == "levenberg-marquardt") return BaselineMethod::LevenbergMarquardt;
  if (s == "l-bfgs") return BaselineMethod::LBfgs;
  if (s == "differential-evolution") return BaselineMethod::DifferentialEvolution;
  throw std::domain_error("unknown baseline method: " + s);
}

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::NelderMead;
  ParamBox box;
  int max_evals = 4000;
  std::uint64_t seed = 0;
  // Nelder-Mead: initial simplex edge as a fraction of the box width.
  double nm_simplex_frac = 0.05;
  // Levenberg-Marquardt damping and its growth factor.
  double lm_lambda0 = 1e-3;
  double lm_growth = 10.0;
  // L-BFGS history length.
  int lbfgs_memory = 10;
  // Differential evolution (rand/1/bin).
  int de_population = 40;
  double de_weight = 0.8;
  double de_crossover = 0.9;

  void validate() const {
    box.validate();
    if (max_evals < 1) throw std::domain_error("BaselineConfig: max_evals must be >= 1");
    if (de_population < 4) throw std::domain_error("BaselineConfig: DE population must be >= 4");
  }
};

struct MinimizeResult {
  Eigen::VectorXd best;
  double value = std::numeric_limits<double>::infinity();
  int evals = 0;
  bool converged = false;
  bool diverged = false;
};

using Objective = std::function<double(const Eigen::VectorXd&)>;
using Gradient = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using Residuals = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
using ResidualJacobian = std::function<Eigen::MatrixXd(const Eigen::VectorXd&)>;

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Objective evaluation with divergence absorbed into +inf and the budget
// counted. Every callback invocation costs one evaluation.
class EvalCounter {
 public:
  explicit EvalCounter(int budget) : budget_(budget) {}
  bool exhausted() const { return used_ >= budget_; }
  int used() const { return used_; }
  void charge() { ++used_; }

 private:
  int budget_;
  int used_ = 0;
};

inline double safe_objective(const Objective& f, const Eigen::VectorXd& x, EvalCounter& evals) {
  evals.charge();
  try {
    const double v = f(x);
    return std::isfinite(v) ? v : kInf;
  } catch (const DivergenceError&) {
    return kInf;
  }
}

inline MinimizeResult nelder_mead(const Objective& f, const BaselineConfig& cfg,
                                  const Eigen::VectorXd& x0) {
  const int d = cfg.box.dim();
  constexpr double alpha = 1.0, gamma = 2.0, rho = 0.5, sigma = 0.5;
  EvalCounter evals(cfg.max_evals);

  std::vector<Eigen::VectorXd> x(static_cast<std::size_t>(d) + 1);
  std::vector<double> fx(static_cast<std::size_t>(d) + 1);
  x[0] = cfg.box.clip(x0);
  for (int i = 0; i < d; ++i) {
    Eigen::VectorXd v = x[0];
    const double edge = cfg.nm_simplex_frac * (cfg.box.hi(i) - cfg.box.lo(i));
    v(i) = (v(i) + edge <= cfg.box.hi(i)) ? v(i) + edge : v(i) - edge;
    x[static_cast<std::size_t>(i) + 1] = v;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (evals.exhausted()) break;
    fx[i] = safe_objective(f, x[i], evals);
  }

  auto order = [&]() {
    std::vector<std::size_t> idx(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return fx[a] < fx[b];
    });
    std::vector<Eigen::VectorXd> x2(x.size());
    std::vector<double> f2(x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      x2[i] = x[idx[i]];
      f2[i] = fx[idx[i]];
    }
    x.swap(x2);
    fx.swap(f2);
  };

  bool converged = false;
  while (!evals.exhausted()) {
    order();
    double diameter = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) diameter = std::max(diameter, (x[i] - x[0]).norm());
    if (std::isfinite(fx[0]) && (fx.back() - fx[0] <= 1e-12 * (1.0 + std::abs(fx[0]))) &&
        diameter <= 1e-8 * (1.0 + x[0].norm())) {
      converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) centroid += x[i];
    centroid /= static_cast<double>(d);

    const Eigen::VectorXd xr = cfg.box.clip(centroid + alpha * (centroid - x.back()));
    const double fr = safe_objective(f, xr, evals);
    if (fr < fx[0]) {
      if (evals.exhausted()) {
        if (fr < fx.back()) { x.back() = xr; fx.back() = fr; }
        break;
      }
      const Eigen::VectorXd xe = cfg.box.clip(centroid + gamma * (xr - centroid));
      const double fe = safe_objective(f, xe, evals);
      if (fe < fr) { x.back() = xe; fx.back() = fe; }
      else { x.back() = xr; fx.back() = fr; }
    } else if (fr < fx[fx.size() - 2]) {
      x.back() = xr;
      fx.back() = fr;
    } else {
      const bool outside = fr < fx.back();
      const Eigen::VectorXd base = outside ? xr : x.back();
      const Eigen::VectorXd xc = cfg.box.clip(centroid + rho * (base - centroid));
      if (evals.exhausted()) break;
      const double fc = safe_objective(f, xc, evals);
      if (fc < (outside ? fr : fx.back())) {
        x.back() = xc;
        fx.back() = fc;
      } else {
        for (std::size_t i = 1; i < x.size(); ++i) {
          if (evals.exhausted()) break;
          x[i] = cfg.box.clip(x[0] + sigma * (x[i] - x[0]));
          fx[i] = safe_objective(f, x[i], evals);
        }
      }
    }
  }
  order();
  MinimizeResult res;
  res.best = x[0];
  res.value = fx[0];
  res.evals = evals.used();
  res.converged = converged;
  res.diverged = !std::isfinite(fx[0]);
  return res;
}

inline MinimizeResult levenberg_marquardt(const Residuals& residuals, const ResidualJacobian& jac,
                                          const BaselineConfig& cfg, const Eigen::VectorXd& x0) {
  EvalCounter evals(cfg.max_evals);
  Eigen::VectorXd p = cfg.box.clip(x0);

  auto eval_res = [&](const Eigen::VectorXd& q, Eigen::VectorXd& out) -> bool {
    evals.charge();
    try {
      out = residuals(q);
      return out.allFinite();
    } catch (const DivergenceError&) {
      return false;
    }
  };

  Eigen::VectorXd r;
  if (!eval_res(p, r)) {
    MinimizeResult res;
    res.best = p;
    res.evals = evals.used();
    res.diverged = true;
    return res;
  }
  double cost = r.squaredNorm();
  evals.charge();
  Eigen::MatrixXd j = jac(p);
  double lambda = cfg.lm_lambda0;
  bool converged = false;
  int rejected_in_a_row = 0;

  while (!evals.exhausted()) {
    const Eigen::VectorXd g = j.transpose() * r;
    if (g.lpNorm<Eigen::Infinity>() <= 1e-12) {
      converged = true;
      break;
    }
    Eigen::MatrixXd h = j.transpose() * j;
    for (int i = 0; i < h.rows(); ++i)
      h(i, i) += lambda * std::max(h(i, i), 1e-12);
    const Eigen::VectorXd step = h.ldlt().solve(-g);
    const Eigen::VectorXd cand = cfg.box.clip(p + step);

    Eigen::VectorXd r_new;
    const bool ok = eval_res(cand, r_new);
    const double cost_new = ok ? r_new.squaredNorm() : kInf;
    if (cost_new < cost) {
      const double reduction = (cost - cost_new) / std::max(cost, 1e-300);
      const double move = (cand - p).norm();
      p = cand;
      r = r_new;
      cost = cost_new;
      if (!evals.exhausted()) {
        evals.charge();
        j = jac(p);
      }
      lambda = std::max(lambda / cfg.lm_growth, 1e-14);
      rejected_in_a_row = 0;
      if (reduction < 1e-14 || move <= 1e-13 * (1.0 + p.norm())) {
        converged = true;
        break;
      }
    } else {
      lambda *= cfg.lm_growth;
      if (++rejected_in_a_row > 60 || lambda > 1e14) break;
    }
  }

  MinimizeResult res;
  res.best = p;
  res.value = cost;
  res.evals = evals.used();
  res.converged = converged;
  res.diverged = !std::isfinite(cost);
  return res;
}

inline MinimizeResult lbfgs(const Objective& f, const Gradient& grad, const BaselineConfig& cfg,
                            const Eigen::VectorXd& x0) {
  EvalCounter evals(cfg.max_evals);
  Eigen::VectorXd p = cfg.box.clip(x0);
  double fp = safe_objective(f, p, evals);

  auto eval_grad = [&](const Eigen::VectorXd& q, Eigen::VectorXd& out) -> bool {
    evals.charge();
    try {
      out = grad(q);
      return out.allFinite();
    } catch (const DivergenceError&) {
      return false;
    }
  };

  Eigen::VectorXd g;
  if (!std::isfinite(fp) || !eval_grad(p, g)) {
    MinimizeResult res;
    res.best = p;
    res.value = fp;
    res.evals = evals.used();
    res.diverged = true;
    return res;
  }

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;
  bool converged = false;
  bool diverged = false;

  while (!evals.exhausted()) {
    if (g.lpNorm<Eigen::Infinity>() <= 1e-10) {
      converged = true;
      break;
    }
    // two-loop recursion
    Eigen::VectorXd q = g;
    std::vector<double> alpha_hist(s_hist.size());
    for (int i = static_cast<int>(s_hist.size()) - 1; i >= 0; --i) {
      const auto idx = static_cast<std::size_t>(i);
      alpha_hist[idx] = rho_hist[idx] * s_hist[idx].dot(q);
      q -= alpha_hist[idx] * y_hist[idx];
    }
    if (!s_hist.empty()) {
      const auto& s_last = s_hist.back();
      const auto& y_last = y_hist.back();
      q *= s_last.dot(y_last) / y_last.squaredNorm();
    }
    for (std::size_t i = 0; i < s_hist.size(); ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha_hist[i] - beta) * s_hist[i];
    }
    Eigen::VectorXd dir = -q;
    if (dir.dot(g) > -1e-12 * dir.norm() * g.norm()) dir = -g;

    // backtracking Armijo with projection onto the box
    constexpr double c_armijo = 1e-4;
    double step = 1.0;
    Eigen::VectorXd cand;
    double f_cand = kInf;
    bool accepted = false;
    while (step > 1e-16 && !evals.exhausted()) {
      cand = cfg.box.clip(p + step * dir);
      f_cand = safe_objective(f, cand, evals);
      if (f_cand <= fp + c_armijo * g.dot(cand - p)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      diverged = !std::isfinite(f_cand) && !std::isfinite(fp);
      break;
    }

    Eigen::VectorXd g_new;
    if (evals.exhausted() || !eval_grad(cand, g_new)) {
      p = cand;
      fp = f_cand;
      break;
    }
    const Eigen::VectorXd s = cand - p;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * s.norm() * y.norm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > cfg.lbfgs_memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double improvement = fp - f_cand;
    p = cand;
    fp = f_cand;
    g = g_new;
    if (improvement <= 1e-16 * (1.0 + std::abs(fp)) && s.norm() <= 1e-13 * (1.0 + p.norm())) {
      converged = true;
      break;
    }
  }

  MinimizeResult res;
  res.best = p;
  res.value = fp;
  res.evals = evals.used();
  res.converged = converged;
  res.diverged = diverged || !std::isfinite(fp);
  return res;
}

inline MinimizeResult differential_evolution(const Objective& f, const BaselineConfig& cfg,
                                             const Eigen::VectorXd& x0) {
  const int d = cfg.box.dim();
  const int np = cfg.de_population;
  EvalCounter evals(cfg.max_evals);
  Rng rng(cfg.seed);

  std::vector<Eigen::VectorXd> pop(static_cast<std::size_t>(np));
  std::vector<double> fit(static_cast<std::size_t>(np), kInf);
  pop[0] = cfg.box.clip(x0);
  for (int i = 1; i < np; ++i) pop[static_cast<std::size_t>(i)] = cfg.box.sample(rng);
  for (int i = 0; i < np && !evals.exhausted(); ++i)
    fit[static_cast<std::size_t>(i)] = safe_objective(f, pop[static_cast<std::size_t>(i)], evals);

  while (!evals.exhausted()) {
    for (int i = 0; i < np && !evals.exhausted(); ++i) {
      int r1 = i, r2 = i, r3 = i;
      while (r1 == i) r1 = static_cast<int>(rng.below(static_cast<std::uint64_t>(np)));
      while (r2 == i || r2 == r1) r2 = static_cast<int>(rng.below(static_cast<std::uint64_t>(np)));
      while (r3 == i || r3 == r1 || r3 == r2)
        r3 = static_cast<int>(rng.below(static_cast<std::uint64_t>(np)));
      Eigen::VectorXd mutant =
          pop[static_cast<std::size_t>(r1)] +
          cfg.de_weight * (pop[static_cast<std::size_t>(r2)] - pop[static_cast<std::size_t>(r3)]);
      mutant = cfg.box.clip(mutant);
      Eigen::VectorXd trial = pop[static_cast<std::size_t>(i)];
      const int j_rand = static_cast<int>(rng.below(static_cast<std::uint64_t>(d)));
      for (int j = 0; j < d; ++j)
        if (j == j_rand || rng.uniform() < cfg.de_crossover) trial(j) = mutant(j);
      const double f_trial = safe_objective(f, trial, evals);
      if (f_trial <= fit[static_cast<std::size_t>(i)]) {
        pop[static_cast<std::size_t>(i)] = trial;
        fit[static_cast<std::size_t>(i)] = f_trial;
      }
    }
  }

  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i)
    if (fit[i] < fit[best]) best = i;
  MinimizeResult res;
  res.best = pop[best];
  res.value = fit[best];
  res.evals = evals.used();
  res.converged = std::isfinite(fit[best]);
  res.diverged = !std::isfinite(fit[best]);
  return res;
}

}  // namespace detail

// Runs the configured classical optimizer inside the admissible box.
// NM/DE need only the objective; L-BFGS needs the gradient; LM needs the
// residual vector and its Jacobian. Missing callbacks are contract errors.
inline MinimizeResult minimize(const Objective& objective, const Gradient& grad,
                               const Residuals& residuals, const ResidualJacobian& jac,
                               const BaselineConfig& config, const Eigen::VectorXd& x0) {
  config.validate();
  if (x0.size() != config.box.dim()) throw std::invalid_argument("minimize: x0 size mismatch");
  switch (config.method) {
    case BaselineMethod::NelderMead:
      if (!objective) throw std::invalid_argument("minimize: NM needs an objective");
      return detail::nelder_mead(objective, config, x0);
    case BaselineMethod::DifferentialEvolution:
      if (!objective) throw std::invalid_argument("minimize: DE needs an objective");
      return detail::differential_evolution(objective, config, x0);
    case BaselineMethod::LBfgs:
      if (!objective || !grad) throw std::invalid_argument("minimize: L-BFGS needs objective+grad");
      return detail::lbfgs(objective, grad, config, x0);
    case BaselineMethod::LevenbergMarquardt:
      if (!residuals || !jac)
        throw std::invalid_argument("minimize: LM needs residuals+jacobian");
      return detail::levenberg_marquardt(residuals, jac, config, x0);
  }
  throw std::invalid_argument("minimize: unknown method");
}

// One classical-optimizer trial on the unsmoothed (tau = 0) loss, packaged
// like a DePCoN TrialResult so the harness can aggregate both.
inline TrialResult run_baseline_trial(const OdeModel& model, const SampledSignal& input,
                                      const ObservationSet& obs, const Eigen::VectorXd& y0,
                                      const BaselineConfig& config, std::uint64_t seed) {
  BaselineConfig cfg = config;
  cfg.seed = seed;
  cfg.validate();

  const double h_target = input.dt / 4.0;
  const TimeGrid grid = grid_for_observations(input.duration(), obs.count(), h_target);

  Rng rng(seed);
  const Eigen::VectorXd x0 = cfg.box.sample(rng);

  const auto t_start = std::chrono::steady_clock::now();
  TrialResult result;
  result.method = to_string(cfg.method);
  result.seed = seed;

  double best_seen = std::numeric_limits<double>::infinity();
  auto track = [&](const Eigen::VectorXd& p, double value) {
    if (value < best_seen) {
      best_seen = value;
      result.loss_history.push_back(value);
      result.estimate_history.push_back(p);
      result.iter_seconds.push_back(
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());
    }
  };

  Objective obj = [&](const Eigen::VectorXd& p) {
    const double v = objective(model, p, input, Interp::NearestLeft, y0, grid, obs);
    track(p, v);
    return v;
  };
  Gradient grd = [&](const Eigen::VectorXd& p) {
    auto [v, g] = objective_with_gradient(model, p, input, Interp::NearestLeft, y0, grid, obs);
    track(p, v);
    return g;
  };
  Residuals res_fn = [&](const Eigen::VectorXd& p) {
    const Trajectory traj = integrate(model, p, input, Interp::NearestLeft, y0, grid);
    Eigen::VectorXd r;
    residuals_and_jacobian(traj, obs, r, nullptr);
    track(p, r.squaredNorm());
    return r;
  };
  ResidualJacobian jac_fn = [&](const Eigen::VectorXd& p) {
    const Trajectory traj =
        integrate_with_sensitivity(model, p, input, Interp::NearestLeft, y0, grid);
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    residuals_and_jacobian(traj, obs, r, &j);
    return j;
  };

  const MinimizeResult m = minimize(obj, grd, res_fn, jac_fn, cfg, x0);
  result.estimate = m.best;
  result.chain = {m.best};
  result.scales = {0.0};
  result.iterations = m.evals;
  result.function_evals = m.evals;
  result.final_grad_norm = std::numeric_limits<double>::quiet_NaN();
  result.reason = m.diverged ? StopReason::Divergence
                 : m.converged ? StopReason::Tolerance
                               : StopReason::MaxIterations;
  if (result.loss_history.empty()) {
    result.loss_history.push_back(m.value);
    result.estimate_history.push_back(m.best);
    result.iter_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count());
  }
  return result;
}

}  // namespace depcon
