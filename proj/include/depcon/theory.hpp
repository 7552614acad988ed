#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "depcon/baselines.hpp"
#include "depcon/depcon.hpp"
#include "depcon/models.hpp"
#include "depcon/neural.hpp"
#include "depcon/ode.hpp"
#include "depcon/rng.hpp"
#include "depcon/signal.hpp"

namespace depcon {

// One numerical check: swept values, the measured quantity per value,
// fitted constants, and named pass/fail assertions.
struct SweepReport {
  std::string name;
  std::vector<double> swept;
  std::vector<double> measured;
  std::map<std::string, double> fitted;
  std::vector<std::pair<std::string, bool>> checks;

  bool passed() const {
    for (const auto& [_, ok] : checks)
      if (!ok) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["swept"] = swept;
    j["measured"] = measured;
    j["fitted"] = fitted;
    j["checks"] = nlohmann::json::array();
    for (const auto& [label, ok] : checks) j["checks"].push_back({{"label", label}, {"pass", ok}});
    j["passed"] = passed();
    return j;
  }

  std::string to_markdown() const {
    std::ostringstream out;
    out.precision(6);
    out << "### " << name << "\n\n";
    out << "| swept | measured |\n|---|---|\n";
    for (std::size_t i = 0; i < swept.size(); ++i)
      out << "| " << swept[i] << " | " << (i < measured.size() ? measured[i] : 0.0) << " |\n";
    if (!fitted.empty()) {
      out << "\n";
      for (const auto& [k, v] : fitted) out << "- " << k << " = " << v << "\n";
    }
    out << "\n";
    for (const auto& [label, ok] : checks)
      out << "- [" << (ok ? "x" : " ") << "] " << label << "\n";
    out << "\n";
    return out.str();
  }
};

namespace theory_detail {

inline double kernel_l2_quadrature(double tau) {
  const double sigma = std::sqrt(2.0 * tau);
  const double half = 8.0 * sigma;
  const int n = 4000;
  const double dt = 2.0 * half / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double t = -half + dt * static_cast<double>(i);
    const double k = heat_kernel(tau, t);
    acc += (i == 0 || i == n) ? 0.5 * k * k : k * k;
  }
  return std::sqrt(acc * dt);
}

// Trapezoidal L2([0,T]) distance between two trajectories on the same grid.
inline double trajectory_l2_distance(const Trajectory& a, const Trajectory& b) {
  if (a.steps != b.steps || a.t_end != b.t_end)
    throw std::domain_error("trajectory_l2_distance: grids differ");
  double acc = 0.0;
  for (int k = 0; k <= a.steps; ++k) {
    const double sq = (a.states.row(k) - b.states.row(k)).squaredNorm();
    acc += (k == 0 || k == a.steps) ? 0.5 * sq : sq;
  }
  return std::sqrt(acc * a.h());
}

inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(std::max(y[i], 1e-300));
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Scale-wise LM oracle: minimize L_tau from a few perturbed starts, return
// the best minimizer found. Independent of the DePCoN training path.
inline Eigen::VectorXd lm_oracle(const OdeModel& model, const SampledSignal& input_tau,
                                 Interp interp, const ObservationSet& obs,
                                 const Eigen::VectorXd& y0, const TimeGrid& grid,
                                 const ParamBox& box, const std::vector<Eigen::VectorXd>& starts,
                                 double* best_value = nullptr) {
  BaselineConfig cfg;
  cfg.method = BaselineMethod::LevenbergMarquardt;
  cfg.box = box;
  cfg.max_evals = 400;
  Residuals res_fn = [&](const Eigen::VectorXd& p) {
    const Trajectory traj = integrate(model, p, input_tau, interp, y0, grid);
    Eigen::VectorXd r;
    residuals_and_jacobian(traj, obs, r, nullptr);
    return r;
  };
  ResidualJacobian jac_fn = [&](const Eigen::VectorXd& p) {
    const Trajectory traj = integrate_with_sensitivity(model, p, input_tau, interp, y0, grid);
    Eigen::VectorXd r;
    Eigen::MatrixXd j;
    residuals_and_jacobian(traj, obs, r, &j);
    return j;
  };
  MinimizeResult best;
  for (const auto& s : starts) {
    const MinimizeResult m = minimize({}, {}, res_fn, jac_fn, cfg, s);
    if (m.value < best.value) best = m;
  }
  if (best_value) *best_value = best.value;
  return best.best;
}

struct AdamRun {
  Eigen::VectorXd point;
  int iterations = 0;
  double grad_norm = 0.0;
  bool reached = false;
};

// Corrector reference: Adam on a single-scale loss until the gradient norm
// drops to tol. The learning rate halves after 200 iterations without a new
// best gradient norm so arbitrarily small tolerances stay reachable.
inline AdamRun adam_minimize(
    const std::function<std::pair<double, Eigen::VectorXd>(const Eigen::VectorXd&)>& value_grad,
    const Eigen::VectorXd& p0, const ParamBox& box, double grad_tol, int max_iters,
    double lr0 = 1e-2) {
  AdamRun run;
  run.point = box.clip(p0);
  AdamState st(static_cast<int>(p0.size()), lr0);
  double best_gnorm = std::numeric_limits<double>::infinity();
  int stall = 0;
  for (int it = 0; it < max_iters; ++it) {
    auto [value, grad] = value_grad(run.point);
    (void)value;
    const double gnorm = grad.norm();
    run.grad_norm = gnorm;
    run.iterations = it;
    if (gnorm <= grad_tol) {
      run.reached = true;
      return run;
    }
    if (gnorm < 0.999 * best_gnorm) {
      best_gnorm = gnorm;
      stall = 0;
    } else if (++stall >= 200) {
      st.lr *= 0.5;
      stall = 0;
      if (st.lr < 1e-14) return run;
    }
    adam_step(st, run.point, grad);
    run.point = box.clip(run.point);
  }
  return run;
}

}  // namespace theory_detail

// Corollary-style mollifier checks: ||S_tau - S|| decreasing to a small
// fraction of ||S||, plus ||K_tau||_{L2} ~ tau^{-1/4} via quadrature.
inline SweepReport check_mollifier_convergence(const SampledSignal& source,
                                               const std::vector<double>& taus) {
  if (taus.size() < 2) throw std::domain_error("check_mollifier_convergence: need >= 2 taus");
  for (std::size_t i = 1; i < taus.size(); ++i)
    if (!(taus[i] < taus[i - 1]) || !(taus[i] > 0.0))
      throw std::domain_error("check_mollifier_convergence: taus must decrease toward 0");

  SweepReport rep;
  rep.name = "mollifier-convergence";
  rep.swept = taus;
  const double source_norm = l2_norm(source);
  for (double tau : taus) rep.measured.push_back(l2_distance(smooth(source, tau), source));

  bool decreasing = true;
  for (std::size_t i = 1; i < rep.measured.size(); ++i)
    decreasing = decreasing && rep.measured[i] < rep.measured[i - 1];
  rep.checks.emplace_back("||S_tau - S|| strictly decreasing", decreasing);
  rep.checks.emplace_back("final distance < 0.05 * ||S||",
                          source_norm == 0.0 || rep.measured.back() < 0.05 * source_norm);

  // diffusion decay of the kernel norm
  const std::vector<double> norm_taus = {0.5, 1.0, 2.0, 4.0};
  double qmin = std::numeric_limits<double>::infinity(), qmax = 0.0;
  for (double tau : norm_taus) {
    const double q = theory_detail::kernel_l2_quadrature(tau) * std::pow(tau, 0.25);
    qmin = std::min(qmin, q);
    qmax = std::max(qmax, q);
  }
  rep.fitted["kernel_norm_tau_quarter_min"] = qmin;
  rep.fitted["kernel_norm_tau_quarter_max"] = qmax;
  rep.fitted["distance_loglog_slope"] = theory_detail::loglog_slope(taus, rep.measured);
  rep.checks.emplace_back("||K_tau|| * tau^{1/4} constant within 1%", qmax / qmin < 1.01);
  return rep;
}

// Lemma-style stability: the ratio ||y_tau1 - y_tau2|| / ||S_tau1 - S_tau2||
// stays bounded by one constant across scale pairs.
inline SweepReport check_trajectory_stability(const OdeModel& model, const Eigen::VectorXd& p,
                                              const SampledSignal& input,
                                              const std::vector<std::pair<double, double>>& pairs,
                                              const Eigen::VectorXd& y0, const TimeGrid& grid) {
  SweepReport rep;
  rep.name = "trajectory-stability";
  int skipped = 0;
  for (const auto& [tau1, tau2] : pairs) {
    const SampledSignal s1 = smooth(input, tau1);
    const SampledSignal s2 = smooth(input, tau2);
    const double sig_dist = l2_distance(s1, s2);
    if (sig_dist == 0.0) {
      ++skipped;
      continue;
    }
    try {
      const Trajectory y1 = integrate(model, p, s1,
                                      tau1 == 0.0 ? Interp::NearestLeft : Interp::Linear, y0, grid);
      const Trajectory y2 = integrate(model, p, s2,
                                      tau2 == 0.0 ? Interp::NearestLeft : Interp::Linear, y0, grid);
      rep.swept.push_back(tau1);
      rep.measured.push_back(theory_detail::trajectory_l2_distance(y1, y2) / sig_dist);
    } catch (const DivergenceError&) {
      ++skipped;
    }
  }
  rep.fitted["skipped_pairs"] = skipped;
  bool finite = !rep.measured.empty();
  double rmin = std::numeric_limits<double>::infinity(), rmax = 0.0;
  for (double r : rep.measured) {
    finite = finite && std::isfinite(r);
    rmin = std::min(rmin, r);
    rmax = std::max(rmax, r);
  }
  rep.fitted["ratio_min"] = rmin;
  rep.fitted["ratio_max"] = rmax;
  rep.checks.emplace_back("all ratios finite", finite);
  rep.checks.emplace_back("max ratio / min ratio < 50", finite && rmax / rmin < 50.0);
  return rep;
}

// Theorem-style minimizer convergence: scale-wise LM minimizers approach
// the generating parameters as tau -> 0, at a rate compatible with
// ||p_tau - p_o|| = O(delta_tau^{1/2}).
inline SweepReport check_minimizer_convergence(const OdeModel& model, const SampledSignal& input,
                                               const ObservationSet& obs,
                                               const std::vector<double>& taus,
                                               const Eigen::VectorXd& truth,
                                               const Eigen::VectorXd& y0, const TimeGrid& grid,
                                               std::uint64_t seed = 20260809) {
  for (std::size_t i = 1; i < taus.size(); ++i)
    if (!(taus[i] < taus[i - 1]))
      throw std::domain_error("check_minimizer_convergence: taus must be decreasing");

  SweepReport rep;
  rep.name = "minimizer-convergence";
  rep.swept = taus;
  const ParamBox box = ParamBox::around(truth);
  Rng rng(seed);

  std::vector<Eigen::VectorXd> starts;
  for (int j = 0; j < 3; ++j) {
    Eigen::VectorXd s = truth;
    for (int i = 0; i < s.size(); ++i) s(i) *= 1.0 + rng.uniform(-0.3, 0.3);
    starts.push_back(box.clip(s));
  }

  std::vector<double> deltas;  // delta_tau per tau > 0
  std::vector<double> dists_pos;
  const int n_box_samples = 100;
  Rng lhs_rng = rng.fork(7);
  const auto unit = latin_hypercube(lhs_rng, n_box_samples, static_cast<int>(truth.size()));
  std::vector<Eigen::VectorXd> box_samples;
  for (const auto& u : unit) {
    Eigen::VectorXd p(truth.size());
    for (int i = 0; i < p.size(); ++i)
      p(i) = box.lo(i) + u[static_cast<std::size_t>(i)] * (box.hi(i) - box.lo(i));
    box_samples.push_back(p);
  }
  std::vector<double> sqrt_loss_raw(box_samples.size(), 0.0);
  for (std::size_t i = 0; i < box_samples.size(); ++i) {
    try {
      sqrt_loss_raw[i] =
          std::sqrt(objective(model, box_samples[i], input, Interp::NearestLeft, y0, grid, obs));
    } catch (const DivergenceError&) {
      sqrt_loss_raw[i] = std::numeric_limits<double>::quiet_NaN();
    }
  }

  for (double tau : taus) {
    const SampledSignal s_tau = smooth(input, tau);
    const Interp interp = tau == 0.0 ? Interp::NearestLeft : Interp::Linear;
    const Eigen::VectorXd p_tau =
        theory_detail::lm_oracle(model, s_tau, interp, obs, y0, grid, box, starts);
    const double dist = (p_tau - truth).norm();
    rep.measured.push_back(dist);
    if (tau > 0.0) {
      double delta = 0.0;
      for (std::size_t i = 0; i < box_samples.size(); ++i) {
        if (!std::isfinite(sqrt_loss_raw[i])) continue;
        try {
          const double st = std::sqrt(objective(model, box_samples[i], s_tau, interp, y0, grid, obs));
          delta = std::max(delta, std::abs(st - sqrt_loss_raw[i]));
        } catch (const DivergenceError&) {
        }
      }
      deltas.push_back(delta);
      dists_pos.push_back(dist);
    }
  }

  bool decreasing = true;
  for (std::size_t i = 1; i < rep.measured.size(); ++i)
    decreasing = decreasing && rep.measured[i] < rep.measured[i - 1];
  rep.checks.emplace_back("||p_tau - p_o|| strictly decreasing", decreasing);
  rep.checks.emplace_back("final distance < 0.02 * ||p_o||",
                          rep.measured.back() < 0.02 * truth.norm());

  bool delta_monotone = true;
  for (std::size_t i = 1; i < deltas.size(); ++i)
    delta_monotone = delta_monotone && deltas[i] <= deltas[i - 1] * (1.0 + 1e-9);
  rep.checks.emplace_back("delta_tau non-increasing as tau -> 0", delta_monotone);

  const double slope = theory_detail::loglog_slope(deltas, dists_pos);
  rep.fitted["dist_vs_delta_loglog_slope"] = slope;
  for (std::size_t i = 0; i < deltas.size(); ++i)
    rep.fitted["delta_tau_" + std::to_string(taus[i])] = deltas[i];
  rep.checks.emplace_back("log-log slope vs delta_tau >= 0.4", slope >= 0.4);
  return rep;
}

// Corrector-error scaling: run Adam on one scale to each tolerance and
// compare against a tight-tolerance reference minimizer.
inline SweepReport check_corrector_error_scaling(const OdeModel& model,
                                                 const SampledSignal& input,
                                                 const ObservationSet& obs, double tau,
                                                 const std::vector<double>& epsilons,
                                                 const Eigen::VectorXd& truth,
                                                 const Eigen::VectorXd& y0, const TimeGrid& grid,
                                                 std::uint64_t seed = 20260809) {
  for (std::size_t i = 1; i < epsilons.size(); ++i)
    if (!(epsilons[i] < epsilons[i - 1]))
      throw std::domain_error("check_corrector_error_scaling: epsilons must be decreasing");
  if (!(tau > 0.0)) throw std::domain_error("check_corrector_error_scaling: tau must be > 0");

  SweepReport rep;
  rep.name = "corrector-error-scaling";
  rep.swept = epsilons;

  const ParamBox box = ParamBox::around(truth);
  const SampledSignal s_tau = smooth(input, tau);
  auto value_grad = [&](const Eigen::VectorXd& p) {
    return objective_with_gradient(model, p, s_tau, Interp::Linear, y0, grid, obs);
  };

  Rng rng(seed);
  Eigen::VectorXd p0 = truth;
  for (int i = 0; i < p0.size(); ++i) p0(i) *= 1.0 + rng.uniform(-0.3, 0.3);
  p0 = box.clip(p0);

  // tight-tolerance reference: Adam to 1e-8, then LM polish
  const theory_detail::AdamRun tight =
      theory_detail::adam_minimize(value_grad, p0, box, 1e-8, 200000);
  const Eigen::VectorXd p_star = theory_detail::lm_oracle(model, s_tau, Interp::Linear, obs, y0,
                                                          grid, box, {tight.point, truth});

  bool all_reached = true;
  for (double eps : epsilons) {
    const theory_detail::AdamRun run =
        theory_detail::adam_minimize(value_grad, p0, box, eps, 200000);
    all_reached = all_reached && run.reached;
    rep.measured.push_back((run.point - p_star).norm());
  }

  rep.checks.emplace_back("every tolerance reached", all_reached);
  bool decreasing = true;
  for (std::size_t i = 1; i < rep.measured.size(); ++i)
    decreasing = decreasing && rep.measured[i] < rep.measured[i - 1];
  rep.checks.emplace_back("error strictly decreasing in tolerance", decreasing);

  const double slope = theory_detail::loglog_slope(epsilons, rep.measured);
  rep.fitted["error_vs_eps_loglog_slope"] = slope;
  double c_fit = 0.0;
  bool bounded = true;
  for (std::size_t i = 0; i < epsilons.size(); ++i) c_fit = std::max(c_fit, rep.measured[i] / epsilons[i]);
  for (std::size_t i = 0; i < epsilons.size(); ++i)
    bounded = bounded && rep.measured[i] <= c_fit * epsilons[i] * (1.0 + 1e-12);
  rep.fitted["fitted_kappa"] = c_fit;
  rep.checks.emplace_back("error bounded by fitted c * eps", bounded);
  rep.checks.emplace_back("log-log slope >= 0.8", slope >= 0.8);
  return rep;
}

// Context for the one-step predictor-corrector bound: a finished training
// run (net + its chain) plus everything needed to recompute scale losses.
struct OneStepContext {
  const PredictorNet* net = nullptr;
  const ScaleHierarchy* hierarchy = nullptr;
  std::vector<Eigen::VectorXd> chain;  // chain order: entry k at scale N-k
  ParamBox box;
  Eigen::VectorXd y0;
  TimeGrid grid;
};

// Checks ||e_{n-1}|| <= kappa*eps + L*||e_n|| + ||beta_n|| at scale index n,
// with L the layer-wise spectral norm product (an upper bound; the sampled
// pairwise estimate is reported alongside) and kappa from a finite-difference
// Hessian of the scale loss.
inline SweepReport check_one_step_bound(const OdeModel& model, const ObservationSet& obs,
                                        const OneStepContext& ctx, int scale_n,
                                        std::uint64_t seed = 20260809) {
  if (!ctx.net || !ctx.hierarchy) throw std::invalid_argument("check_one_step_bound: null context");
  const int n_scales = ctx.hierarchy->grid_size;
  if (scale_n < 1 || scale_n > n_scales)
    throw std::domain_error("check_one_step_bound: scale index out of range");
  if (static_cast<int>(ctx.chain.size()) != n_scales + 1)
    throw std::invalid_argument("check_one_step_bound: chain length mismatch");

  SweepReport rep;
  rep.name = "one-step-bound (n=" + std::to_string(scale_n) + ")";

  const auto& sig_n = ctx.hierarchy->smoothed[static_cast<std::size_t>(scale_n)];
  const auto& sig_nm1 = ctx.hierarchy->smoothed[static_cast<std::size_t>(scale_n - 1)];
  const Interp interp_n = scale_n == 0 ? Interp::NearestLeft : Interp::Linear;
  const Interp interp_nm1 = scale_n - 1 == 0 ? Interp::NearestLeft : Interp::Linear;

  const Eigen::VectorXd& p_hat_n = ctx.chain[static_cast<std::size_t>(n_scales - scale_n)];
  const Eigen::VectorXd& p_hat_nm1 = ctx.chain[static_cast<std::size_t>(n_scales - scale_n + 1)];

  Rng rng(seed);
  std::vector<Eigen::VectorXd> starts = {p_hat_n, p_hat_nm1};
  {
    Eigen::VectorXd s = p_hat_nm1;
    for (int i = 0; i < s.size(); ++i) s(i) *= 1.0 + rng.uniform(-0.1, 0.1);
    starts.push_back(ctx.box.clip(s));
  }
  const Eigen::VectorXd p_star_n =
      theory_detail::lm_oracle(model, sig_n, interp_n, obs, ctx.y0, ctx.grid, ctx.box, starts);
  const Eigen::VectorXd p_star_nm1 =
      theory_detail::lm_oracle(model, sig_nm1, interp_nm1, obs, ctx.y0, ctx.grid, ctx.box, starts);

  const double e_n = (p_hat_n - p_star_n).norm();
  const double e_nm1 = (p_hat_nm1 - p_star_nm1).norm();
  const double beta = (predict_physical(*ctx.net, ctx.box, p_star_n) - p_star_nm1).norm();

  // Lipschitz constant of the piecewise-affine predictor between physical
  // parameter vectors: spectral-norm product with the box scaling absorbed
  // into the first and last layers. An upper bound; exact constants are
  // NP-hard and sampling only gives a lower estimate, so the inequality
  // uses the product.
  const Eigen::VectorXd halfwidth = 0.5 * (ctx.box.hi - ctx.box.lo);
  double lip_upper = 1.0;
  const int n_layers = ctx.net->num_layers();
  for (int l = 0; l < n_layers; ++l) {
    Eigen::MatrixXd w = ctx.net->weights[static_cast<std::size_t>(l)];
    if (l == 0) w = w * halfwidth.cwiseInverse().asDiagonal();
    if (l == n_layers - 1) w = halfwidth.asDiagonal() * w;
    lip_upper *= Eigen::JacobiSVD<Eigen::MatrixXd>(w).singularValues()(0);
  }
  double lip_sampled = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Eigen::VectorXd a = ctx.box.sample(rng);
    const Eigen::VectorXd b = ctx.box.sample(rng);
    const double dn = (a - b).norm();
    if (dn > 1e-12)
      lip_sampled = std::max(lip_sampled, (predict_physical(*ctx.net, ctx.box, a) -
                                           predict_physical(*ctx.net, ctx.box, b))
                                                  .norm() /
                                              dn);
  }

  // effective corrector tolerance at level n-1: the measured gradient norm
  auto grad_at = [&](const Eigen::VectorXd& p) {
    return objective_with_gradient(model, p, sig_nm1, interp_nm1, ctx.y0, ctx.grid, obs).second;
  };
  const double eps_nm1 = grad_at(p_hat_nm1).norm();

  // kappa: inverse spectral norm of a finite-difference Hessian of L_{n-1}
  const int d = static_cast<int>(p_hat_nm1.size());
  Eigen::MatrixXd hess(d, d);
  for (int c = 0; c < d; ++c) {
    const double step = 1e-5 * std::max(1.0, std::abs(p_hat_nm1(c)));
    Eigen::VectorXd pp = p_hat_nm1, pm = p_hat_nm1;
    pp(c) += step;
    pm(c) -= step;
    hess.col(c) = (grad_at(pp) - grad_at(pm)) / (2.0 * step);
  }
  hess = 0.5 * (hess + hess.transpose()).eval();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(hess).singularValues();
  const double kappa = 1.0 / std::max(sv(sv.size() - 1), 1e-300);

  const double lhs = e_nm1;
  const double rhs = kappa * eps_nm1 + lip_upper * e_n + beta;
  rep.swept = {static_cast<double>(scale_n)};
  rep.measured = {lhs};
  rep.fitted["e_n"] = e_n;
  rep.fitted["e_n_minus_1"] = lhs;
  rep.fitted["beta_n"] = beta;
  rep.fitted["lipschitz_upper"] = lip_upper;
  rep.fitted["lipschitz_sampled"] = lip_sampled;
  rep.fitted["kappa_n_minus_1"] = kappa;
  rep.fitted["eps_n_minus_1"] = eps_nm1;
  rep.fitted["bound_rhs"] = rhs;
  rep.checks.emplace_back("one-step bound holds", lhs <= rhs);
  rep.checks.emplace_back("sampled Lipschitz <= spectral product",
                          lip_sampled <= lip_upper * (1.0 + 1e-9));
  return rep;
}

inline void save_reports_json(const std::vector<SweepReport>& reports, const std::string& path) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : reports) j.push_back(r.to_json());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_reports_json: cannot open " + path);
  out << j.dump(2) << "\n";
}

inline void save_reports_markdown(const std::vector<SweepReport>& reports,
                                  const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_reports_markdown: cannot open " + path);
  out << "# Numerical verification\n\n";
  for (const auto& r : reports) out << r.to_markdown();
}

}  // namespace depcon
