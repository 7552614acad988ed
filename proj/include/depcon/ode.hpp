#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "depcon/rng.hpp"
#include "depcon/signal.hpp"

namespace depcon {

// A benchmark system dy/dt = F(y, p, s) with analytic Jacobians. The
// observation mask lists the state indices that are compared against data;
// latent states stay out of the loss.
struct OdeModel {
  std::string name;
  int state_dim = 0;
  int param_dim = 0;
  std::vector<int> observed;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, double, Eigen::VectorXd&)> rhs;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, double, Eigen::MatrixXd&)> jac_y;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, double, Eigen::MatrixXd&)> jac_p;
  std::function<void(const Eigen::VectorXd&, const Eigen::VectorXd&, double, Eigen::VectorXd&)> jac_s;
};

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(double t_bad)
      : std::runtime_error("integration diverged at t = " + std::to_string(t_bad)),
        t_bad_(t_bad) {}
  double first_bad_time() const { return t_bad_; }

 private:
  double t_bad_;
};

// Uniform grid on [0, T]. Built so that observation times are exact grid
// points; see grid_for_observations.
struct TimeGrid {
  double t_end = 0.0;
  int steps = 0;
  double h() const { return t_end / static_cast<double>(steps); }
  double time(int k) const { return t_end * static_cast<double>(k) / static_cast<double>(steps); }
};

// Smallest uniform grid whose step is <= h_target and whose points contain
// the n_obs uniformly spaced observation times on [0, T].
inline TimeGrid grid_for_observations(double t_end, int n_obs, double h_target) {
  if (!(t_end > 0.0)) throw std::domain_error("grid_for_observations: T must be > 0");
  if (n_obs < 2) throw std::domain_error("grid_for_observations: need at least 2 observations");
  if (!(h_target > 0.0)) throw std::domain_error("grid_for_observations: h_target must be > 0");
  const double spacing = t_end / static_cast<double>(n_obs - 1);
  const int per_obs = std::max(1, static_cast<int>(std::ceil(spacing / h_target - 1e-12)));
  return TimeGrid{t_end, (n_obs - 1) * per_obs};
}

struct Trajectory {
  double t_end = 0.0;
  int steps = 0;
  Eigen::MatrixXd states;  // (steps+1) x d_y, one row per grid time
  Eigen::MatrixXd sens;    // (steps+1) x (d_y*d_p); Z(i,j) at column i*d_p+j

  bool has_sensitivity() const { return sens.size() > 0; }
  double h() const { return t_end / static_cast<double>(steps); }
  double time(int k) const { return t_end * static_cast<double>(k) / static_cast<double>(steps); }

  Eigen::MatrixXd sensitivity_at(int k, int d_y, int d_p) const {
    Eigen::MatrixXd z(d_y, d_p);
    for (int i = 0; i < d_y; ++i)
      for (int j = 0; j < d_p; ++j) z(i, j) = sens(k, i * d_p + j);
    return z;
  }
};

namespace detail {

// Signal samples at the RK4 stage times t_k, t_k + h/2, t_k + h, looked up
// once per integration instead of per stage.
inline std::vector<double> half_grid_samples(const SampledSignal& input, Interp interp,
                                             const TimeGrid& grid) {
  std::vector<double> s(static_cast<std::size_t>(2 * grid.steps + 1));
  const double hh = grid.h() / 2.0;
  for (int j = 0; j <= 2 * grid.steps; ++j)
    s[static_cast<std::size_t>(j)] = input.eval(hh * static_cast<double>(j), interp);
  return s;
}

}  // namespace detail

// Classical fixed-step RK4. Deterministic for fixed inputs; any non-finite
// state aborts with DivergenceError carrying the first bad time.
inline Trajectory integrate(const OdeModel& model, const Eigen::VectorXd& p,
                            const SampledSignal& input, Interp interp,
                            const Eigen::VectorXd& y0, const TimeGrid& grid) {
  if (p.size() != model.param_dim) throw std::invalid_argument("integrate: param size mismatch");
  if (y0.size() != model.state_dim) throw std::invalid_argument("integrate: state size mismatch");

  const int d = model.state_dim;
  const double h = grid.h();
  const std::vector<double> s = detail::half_grid_samples(input, interp, grid);

  Trajectory traj;
  traj.t_end = grid.t_end;
  traj.steps = grid.steps;
  traj.states.resize(grid.steps + 1, d);

  Eigen::VectorXd y = y0;
  Eigen::VectorXd k1(d), k2(d), k3(d), k4(d), tmp(d);
  traj.states.row(0) = y.transpose();
  for (int k = 0; k < grid.steps; ++k) {
    const double s0 = s[static_cast<std::size_t>(2 * k)];
    const double sh = s[static_cast<std::size_t>(2 * k + 1)];
    const double s1 = s[static_cast<std::size_t>(2 * k + 2)];
    model.rhs(y, p, s0, k1);
    tmp = y + (0.5 * h) * k1;
    model.rhs(tmp, p, sh, k2);
    tmp = y + (0.5 * h) * k2;
    model.rhs(tmp, p, sh, k3);
    tmp = y + h * k3;
    model.rhs(tmp, p, s1, k4);
    y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!y.allFinite()) throw DivergenceError(grid.time(k + 1));
    traj.states.row(k + 1) = y.transpose();
  }
  return traj;
}

// RK4 on the augmented system (y, Z) with the forward sensitivity equation
//   dZ/dt = dF/dy * Z + dF/dp,  Z(0) = 0.
inline Trajectory integrate_with_sensitivity(const OdeModel& model, const Eigen::VectorXd& p,
                                             const SampledSignal& input, Interp interp,
                                             const Eigen::VectorXd& y0, const TimeGrid& grid) {
  if (!model.jac_y || !model.jac_p)
    throw std::invalid_argument("integrate_with_sensitivity: model Jacobians missing");
  if (p.size() != model.param_dim)
    throw std::invalid_argument("integrate_with_sensitivity: param size mismatch");
  if (y0.size() != model.state_dim)
    throw std::invalid_argument("integrate_with_sensitivity: state size mismatch");

  const int d = model.state_dim;
  const int q = model.param_dim;
  const double h = grid.h();
  const std::vector<double> s = detail::half_grid_samples(input, interp, grid);

  Trajectory traj;
  traj.t_end = grid.t_end;
  traj.steps = grid.steps;
  traj.states.resize(grid.steps + 1, d);
  traj.sens.resize(grid.steps + 1, d * q);

  Eigen::VectorXd y = y0;
  Eigen::MatrixXd z = Eigen::MatrixXd::Zero(d, q);
  Eigen::VectorXd ky1(d), ky2(d), ky3(d), ky4(d), ytmp(d);
  Eigen::MatrixXd kz1(d, q), kz2(d, q), kz3(d, q), kz4(d, q), ztmp(d, q);
  Eigen::MatrixXd jy(d, d), jp(d, q);

  auto stage = [&](const Eigen::VectorXd& yy, const Eigen::MatrixXd& zz, double ss,
                   Eigen::VectorXd& ky, Eigen::MatrixXd& kz) {
    model.rhs(yy, p, ss, ky);
    model.jac_y(yy, p, ss, jy);
    model.jac_p(yy, p, ss, jp);
    kz.noalias() = jy * zz;
    kz += jp;
  };

  auto store = [&](int row) {
    traj.states.row(row) = y.transpose();
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < q; ++j) traj.sens(row, i * q + j) = z(i, j);
  };

  store(0);
  for (int k = 0; k < grid.steps; ++k) {
    const double s0 = s[static_cast<std::size_t>(2 * k)];
    const double sh = s[static_cast<std::size_t>(2 * k + 1)];
    const double s1 = s[static_cast<std::size_t>(2 * k + 2)];
    stage(y, z, s0, ky1, kz1);
    ytmp = y + (0.5 * h) * ky1;
    ztmp = z + (0.5 * h) * kz1;
    stage(ytmp, ztmp, sh, ky2, kz2);
    ytmp = y + (0.5 * h) * ky2;
    ztmp = z + (0.5 * h) * kz2;
    stage(ytmp, ztmp, sh, ky3, kz3);
    ytmp = y + h * ky3;
    ztmp = z + h * kz3;
    stage(ytmp, ztmp, s1, ky4, kz4);
    y += (h / 6.0) * (ky1 + 2.0 * ky2 + 2.0 * ky3 + ky4);
    z += (h / 6.0) * (kz1 + 2.0 * kz2 + 2.0 * kz3 + kz4);
    if (!y.allFinite() || !z.allFinite()) throw DivergenceError(grid.time(k + 1));
    store(k + 1);
  }
  return traj;
}

// Observed values at a strict subset of the integration grid times.
struct ObservationSet {
  std::vector<double> times;
  Eigen::MatrixXd values;    // n_obs x observed.size()
  std::vector<int> observed; // state indices, same convention as OdeModel
  double noise_sd = 0.0;

  int count() const { return static_cast<int>(times.size()); }
};

namespace detail {
inline int grid_index_of(const Trajectory& traj, double t) {
  const double h = traj.h();
  const auto k = static_cast<int>(std::llround(t / h));
  if (k < 0 || k > traj.steps || std::abs(traj.time(k) - t) > 1e-9 * std::max(1.0, std::abs(t)))
    throw std::domain_error("observation time not on the trajectory grid");
  return k;
}
}  // namespace detail

// (1/N_o) sum_i || y(t_i) - y_o(t_i) ||^2 over the observation mask.
inline double loss(const Trajectory& traj, const ObservationSet& obs) {
  if (obs.count() < 1) throw std::domain_error("loss: empty observation set");
  double acc = 0.0;
  for (int i = 0; i < obs.count(); ++i) {
    const int k = detail::grid_index_of(traj, obs.times[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < obs.observed.size(); ++j) {
      const double r = traj.states(k, obs.observed[j]) - obs.values(i, static_cast<int>(j));
      acc += r * r;
    }
  }
  return acc / static_cast<double>(obs.count());
}

// grad_p L = (2/N_o) sum_i Z(t_i)^T (y(t_i) - y_o(t_i)), restricted to the
// observed components.
inline Eigen::VectorXd loss_gradient(const Trajectory& traj, const ObservationSet& obs) {
  if (!traj.has_sensitivity())
    throw std::invalid_argument("loss_gradient: trajectory has no sensitivities");
  const int d_y = static_cast<int>(traj.states.cols());
  const int d_p = static_cast<int>(traj.sens.cols()) / d_y;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d_p);
  for (int i = 0; i < obs.count(); ++i) {
    const int k = detail::grid_index_of(traj, obs.times[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < obs.observed.size(); ++j) {
      const int row = obs.observed[j];
      const double r = traj.states(k, row) - obs.values(i, static_cast<int>(j));
      for (int c = 0; c < d_p; ++c) g(c) += traj.sens(k, row * d_p + c) * r;
    }
  }
  return g * (2.0 / static_cast<double>(obs.count()));
}

// Loss of the model at p under the given input; integrate + loss in one call.
inline double objective(const OdeModel& model, const Eigen::VectorXd& p,
                        const SampledSignal& input, Interp interp, const Eigen::VectorXd& y0,
                        const TimeGrid& grid, const ObservationSet& obs) {
  return loss(integrate(model, p, input, interp, y0, grid), obs);
}

inline std::pair<double, Eigen::VectorXd> objective_with_gradient(
    const OdeModel& model, const Eigen::VectorXd& p, const SampledSignal& input, Interp interp,
    const Eigen::VectorXd& y0, const TimeGrid& grid, const ObservationSet& obs) {
  const Trajectory traj = integrate_with_sensitivity(model, p, input, interp, y0, grid);
  return {loss(traj, obs), loss_gradient(traj, obs)};
}

// Residual vector and Jacobian of the same loss in least-squares form,
// r_i = (y - y_o)/sqrt(N_o) so that ||r||^2 == loss. Used by LM.
inline void residuals_and_jacobian(const Trajectory& traj, const ObservationSet& obs,
                                   Eigen::VectorXd& r, Eigen::MatrixXd* jac) {
  const int d_y = static_cast<int>(traj.states.cols());
  const int d_p = traj.has_sensitivity() ? static_cast<int>(traj.sens.cols()) / d_y : 0;
  const int m = obs.count() * static_cast<int>(obs.observed.size());
  const double w = 1.0 / std::sqrt(static_cast<double>(obs.count()));
  r.resize(m);
  if (jac) jac->resize(m, d_p);
  int row_out = 0;
  for (int i = 0; i < obs.count(); ++i) {
    const int k = detail::grid_index_of(traj, obs.times[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < obs.observed.size(); ++j, ++row_out) {
      const int row = obs.observed[j];
      r(row_out) = w * (traj.states(k, row) - obs.values(i, static_cast<int>(j)));
      if (jac)
        for (int c = 0; c < d_p; ++c) (*jac)(row_out, c) = w * traj.sens(k, row * d_p + c);
    }
  }
}

// Verifies the model's analytic Jacobians against central finite differences
// at random points drawn from the given boxes.
inline void check_jacobians(const OdeModel& model, Rng& rng, int n_points,
                            const Eigen::VectorXd& y_lo, const Eigen::VectorXd& y_hi,
                            const Eigen::VectorXd& p_lo, const Eigen::VectorXd& p_hi,
                            double s_lo, double s_hi, double tol = 1e-5) {
  const int d = model.state_dim;
  const int q = model.param_dim;
  Eigen::VectorXd y(d), p(q), fp(d), fm(d), js(d);
  Eigen::MatrixXd jy(d, d), jp(d, q);
  auto rel_err = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    return (a - b).norm() / std::max(1.0, b.norm());
  };
  for (int t = 0; t < n_points; ++t) {
    for (int i = 0; i < d; ++i) y(i) = rng.uniform(y_lo(i), y_hi(i));
    for (int i = 0; i < q; ++i) p(i) = rng.uniform(p_lo(i), p_hi(i));
    const double s = rng.uniform(s_lo, s_hi);

    model.jac_y(y, p, s, jy);
    Eigen::MatrixXd fd_y(d, d);
    for (int c = 0; c < d; ++c) {
      const double eps = 1e-6 * std::max(1.0, std::abs(y(c)));
      Eigen::VectorXd yp = y, ym = y;
      yp(c) += eps;
      ym(c) -= eps;
      model.rhs(yp, p, s, fp);
      model.rhs(ym, p, s, fm);
      fd_y.col(c) = (fp - fm) / (2.0 * eps);
    }
    if (rel_err(jy, fd_y) > tol)
      throw std::runtime_error(model.name + ": jac_y disagrees with finite differences");

    model.jac_p(y, p, s, jp);
    Eigen::MatrixXd fd_p(d, q);
    for (int c = 0; c < q; ++c) {
      const double eps = 1e-6 * std::max(1.0, std::abs(p(c)));
      Eigen::VectorXd pp = p, pm = p;
      pp(c) += eps;
      pm(c) -= eps;
      model.rhs(y, pp, s, fp);
      model.rhs(y, pm, s, fm);
      fd_p.col(c) = (fp - fm) / (2.0 * eps);
    }
    if (rel_err(jp, fd_p) > tol)
      throw std::runtime_error(model.name + ": jac_p disagrees with finite differences");

    if (model.jac_s) {
      model.jac_s(y, p, s, js);
      const double eps = 1e-6 * std::max(1.0, std::abs(s));
      model.rhs(y, p, s + eps, fp);
      model.rhs(y, p, s - eps, fm);
      const Eigen::VectorXd fd_s = (fp - fm) / (2.0 * eps);
      if (rel_err(js, fd_s) > tol)
        throw std::runtime_error(model.name + ": jac_s disagrees with finite differences");
    }
  }
}

// CSV dumps for debugging and plot emission.
inline void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trajectory_csv: cannot open " + path);
  out.precision(17);
  const int d_y = static_cast<int>(traj.states.cols());
  const int zcols = static_cast<int>(traj.sens.cols());
  out << "t";
  for (int j = 0; j < d_y; ++j) out << ",y" << (j + 1);
  if (zcols > 0) {
    const int d_p = zcols / d_y;
    for (int i = 0; i < d_y; ++i)
      for (int j = 0; j < d_p; ++j) out << ",z_" << (i + 1) << (j + 1);
  }
  out << "\n";
  for (int k = 0; k <= traj.steps; ++k) {
    out << traj.time(k);
    for (int j = 0; j < d_y; ++j) out << "," << traj.states(k, j);
    for (int j = 0; j < zcols; ++j) out << "," << traj.sens(k, j);
    out << "\n";
  }
}

inline void save_observations_csv(const ObservationSet& obs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_observations_csv: cannot open " + path);
  out.precision(17);
  out << "t";
  for (int j : obs.observed) out << ",y" << (j + 1);
  out << "\n";
  for (int i = 0; i < obs.count(); ++i) {
    out << obs.times[static_cast<std::size_t>(i)];
    for (int j = 0; j < static_cast<int>(obs.observed.size()); ++j) out << "," << obs.values(i, j);
    out << "\n";
  }
}

}  // namespace depcon
