#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "depcon/ode.hpp"
#include "depcon/rng.hpp"
#include "depcon/signal.hpp"

namespace depcon {

// Modified Lotka-Volterra with the forcing applied with opposite sign to
// prey and predator:
//   dy1/dt = p1*y1 - p2*y1*y2 + S(t)
//   dy2/dt = -p3*y2 + p4*y1*y2 - S(t)
// Parameters (p1..p4) = (prey growth, predation, predator death, conversion).
inline OdeModel lv_model() {
  OdeModel m;
  m.name = "lotka-volterra";
  m.state_dim = 2;
  m.param_dim = 4;
  m.observed = {0, 1};
  m.rhs = [](const Eigen::VectorXd& y, const Eigen::VectorXd& p, double s, Eigen::VectorXd& f) {
    f(0) = p(0) * y(0) - p(1) * y(0) * y(1) + s;
    f(1) = -p(2) * y(1) + p(3) * y(0) * y(1) - s;
  };
  m.jac_y = [](const Eigen::VectorXd& y, const Eigen::VectorXd& p, double, Eigen::MatrixXd& j) {
    j(0, 0) = p(0) - p(1) * y(1);
    j(0, 1) = -p(1) * y(0);
    j(1, 0) = p(3) * y(1);
    j(1, 1) = -p(2) + p(3) * y(0);
  };
  m.jac_p = [](const Eigen::VectorXd& y, const Eigen::VectorXd&, double, Eigen::MatrixXd& j) {
    j.setZero();
    j(0, 0) = y(0);
    j(0, 1) = -y(0) * y(1);
    j(1, 2) = -y(1);
    j(1, 3) = y(0) * y(1);
  };
  m.jac_s = [](const Eigen::VectorXd&, const Eigen::VectorXd&, double, Eigen::VectorXd& j) {
    j(0) = 1.0;
    j(1) = -1.0;
  };
  return m;
}

// Process-L constants of the photic drive; overridable but fixed defaults.
struct CircadianConstants {
  double alpha0 = 0.05;
  double beta = 0.0075;
  double s0 = 9500.0;
  double q = 0.5;
};

// Circadian pacemaker with a latent photoreceptor state. State order is
// (n, y1, y2); only the oscillator pair (y1, y2) is observed. Light S(t)
// drives the system through alpha(S) = alpha0*(S/S0)^q and
//   B = G * alpha * (1-n) * (1-0.4*y1) * (1-0.4*y2)
//   dn/dt  = 60 * (alpha*(1-n) - beta*n)
//   dy1/dt = (pi/12) * (y2 + B)
//   dy2/dt = (pi/12) * (gamma*(y2 - 4*y2^3/3) - y1*((24/(0.99669*tau_c))^2 + k*B))
// Parameters (tau_c, gamma, G, k) = (intrinsic period, stiffness, photic
// gain, coupling strength).
inline OdeModel circadian_model(const CircadianConstants& cc = {}) {
  constexpr double c = std::numbers::pi / 12.0;
  OdeModel m;
  m.name = "circadian";
  m.state_dim = 3;
  m.param_dim = 4;
  m.observed = {1, 2};
  m.rhs = [cc](const Eigen::VectorXd& y, const Eigen::VectorXd& p, double s, Eigen::VectorXd& f) {
    const double n = y(0), y1 = y(1), y2 = y(2);
    const double tau_c = p(0), gamma = p(1), big_g = p(2), k = p(3);
    const double alpha = s > 0.0 ? cc.alpha0 * std::pow(s / cc.s0, cc.q) : 0.0;
    const double drive = alpha * (1.0 - n);
    const double b = big_g * drive * (1.0 - 0.4 * y1) * (1.0 - 0.4 * y2);
    const double omega = std::pow(24.0 / (0.99669 * tau_c), 2.0);
    f(0) = 60.0 * (drive - cc.beta * n);
    f(1) = c * (y2 + b);
    f(2) = c * (gamma * (y2 - 4.0 * y2 * y2 * y2 / 3.0) - y1 * (omega + k * b));
  };
  m.jac_y = [cc](const Eigen::VectorXd& y, const Eigen::VectorXd& p, double s, Eigen::MatrixXd& j) {
    const double n = y(0), y1 = y(1), y2 = y(2);
    const double tau_c = p(0), gamma = p(1), big_g = p(2), k = p(3);
    const double alpha = s > 0.0 ? cc.alpha0 * std::pow(s / cc.s0, cc.q) : 0.0;
    const double drive = alpha * (1.0 - n);
    const double b = big_g * drive * (1.0 - 0.4 * y1) * (1.0 - 0.4 * y2);
    const double db_dn = -big_g * alpha * (1.0 - 0.4 * y1) * (1.0 - 0.4 * y2);
    const double db_dy1 = -0.4 * big_g * drive * (1.0 - 0.4 * y2);
    const double db_dy2 = -0.4 * big_g * drive * (1.0 - 0.4 * y1);
    const double omega = std::pow(24.0 / (0.99669 * tau_c), 2.0);
    j(0, 0) = -60.0 * (alpha + cc.beta);
    j(0, 1) = 0.0;
    j(0, 2) = 0.0;
    j(1, 0) = c * db_dn;
    j(1, 1) = c * db_dy1;
    j(1, 2) = c * (1.0 + db_dy2);
    j(2, 0) = -c * y1 * k * db_dn;
    j(2, 1) = -c * (omega + k * b) - c * y1 * k * db_dy1;
    j(2, 2) = c * (gamma * (1.0 - 4.0 * y2 * y2) - y1 * k * db_dy2);
  };
  m.jac_p = [cc](const Eigen::VectorXd& y, const Eigen::VectorXd& p, double s, Eigen::MatrixXd& j) {
    const double n = y(0), y1 = y(1), y2 = y(2);
    const double tau_c = p(0), k = p(3);
    const double alpha = s > 0.0 ? cc.alpha0 * std::pow(s / cc.s0, cc.q) : 0.0;
    const double drive = alpha * (1.0 - n);
    const double db_dg = drive * (1.0 - 0.4 * y1) * (1.0 - 0.4 * y2);
    const double b = p(2) * db_dg;
    const double domega = -2.0 * std::pow(24.0 / 0.99669, 2.0) / (tau_c * tau_c * tau_c);
    j.setZero();
    j(1, 2) = c * db_dg;
    j(2, 0) = -c * y1 * domega;
    j(2, 1) = c * (y2 - 4.0 * y2 * y2 * y2 / 3.0);
    j(2, 2) = -c * y1 * k * db_dg;
    j(2, 3) = -c * y1 * b;
  };
  m.jac_s = [cc](const Eigen::VectorXd& y, const Eigen::VectorXd& p, double s, Eigen::VectorXd& j) {
    const double n = y(0), y1 = y(1), y2 = y(2);
    const double big_g = p(2), k = p(3);
    // d(alpha)/ds = q*alpha/s; singular at s = 0, where alpha == 0: take 0.
    const double dalpha = s > 0.0 ? cc.q * cc.alpha0 * std::pow(s / cc.s0, cc.q) / s : 0.0;
    const double db_ds = big_g * dalpha * (1.0 - n) * (1.0 - 0.4 * y1) * (1.0 - 0.4 * y2);
    j(0) = 60.0 * dalpha * (1.0 - n);
    j(1) = c * db_ds;
    j(2) = -c * y1 * k * db_ds;
  };
  return m;
}

inline Eigen::VectorXd lv_true_params() { return Eigen::Vector4d(2.0, 0.5, 1.0, 1.0); }
inline Eigen::VectorXd circadian_true_params() { return Eigen::Vector4d(24.0, 0.23, 20.0, 0.55); }
inline Eigen::VectorXd lv_default_y0() { return Eigen::Vector2d(1.0, 2.0); }
inline Eigen::VectorXd circadian_default_y0() { return Eigen::Vector3d(0.5, 1.0, 0.0); }

// Square-wave light schedule. Each period starts with the lights on for
// on_fraction of the period; jitter_h shifts each window start by a
// seeded uniform offset in [-jitter_h, jitter_h].
struct LightSchedule {
  double period_h = 24.0;
  double on_fraction = 0.5;
  double lux = 250.0;
  double jitter_h = 0.0;
  std::uint64_t seed = 0;
};

inline SampledSignal make_light_schedule(const LightSchedule& sched, double t_end, double dt) {
  if (!(t_end > 0.0)) throw std::domain_error("make_light_schedule: T must be > 0");
  if (!(sched.on_fraction > 0.0 && sched.on_fraction < 1.0))
    throw std::domain_error("make_light_schedule: on_fraction must be in (0, 1)");
  if (sched.lux < 0.0) throw std::domain_error("make_light_schedule: lux must be >= 0");
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
  const int n_windows = static_cast<int>(std::ceil(t_end / sched.period_h));
  Rng rng(sched.seed);
  std::vector<double> onsets(static_cast<std::size_t>(n_windows));
  std::vector<double> offsets(static_cast<std::size_t>(n_windows));
  for (int w = 0; w < n_windows; ++w) {
    const double jitter = sched.jitter_h > 0.0 ? rng.uniform(-sched.jitter_h, sched.jitter_h) : 0.0;
    onsets[static_cast<std::size_t>(w)] = static_cast<double>(w) * sched.period_h + jitter;
    offsets[static_cast<std::size_t>(w)] =
        onsets[static_cast<std::size_t>(w)] + sched.on_fraction * sched.period_h;
  }
  SampledSignal s;
  s.t0 = 0.0;
  s.dt = dt;
  s.values.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * static_cast<double>(i);
    for (int w = 0; w < n_windows; ++w)
      if (t >= onsets[static_cast<std::size_t>(w)] && t < offsets[static_cast<std::size_t>(w)]) {
        s.values[i] = sched.lux;
        break;
      }
  }
  return s;
}

// Train of rectangular pulses with seeded random onsets; the discontinuous
// forcing for the Lotka-Volterra benchmark.
inline SampledSignal make_pulse_train(double t_end, double dt, int n_pulses, double amplitude,
                                      double width, std::uint64_t seed) {
  if (!(t_end > 0.0)) throw std::domain_error("make_pulse_train: T must be > 0");
  if (n_pulses < 1) throw std::domain_error("make_pulse_train: need at least one pulse");
  Rng rng(seed);
  std::vector<double> onsets(static_cast<std::size_t>(n_pulses));
  for (auto& o : onsets) o = rng.uniform(0.0, t_end - width);
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
  SampledSignal s;
  s.t0 = 0.0;
  s.dt = dt;
  s.values.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * static_cast<double>(i);
    for (double o : onsets)
      if (t >= o && t < o + width) {
        s.values[i] = amplitude;
        break;
      }
  }
  return s;
}

// Integrates the model at the true parameters and samples n_obs uniformly
// spaced grid times, optionally adding i.i.d. Gaussian noise to the
// observed components.
inline ObservationSet generate_observations(const OdeModel& model, const Eigen::VectorXd& true_p,
                                            const SampledSignal& input, Interp interp,
                                            const Eigen::VectorXd& y0, const TimeGrid& grid,
                                            int n_obs, double noise_sd, std::uint64_t seed) {
  if (n_obs < 2) throw std::domain_error("generate_observations: need at least 2 observations");
  if (grid.steps % (n_obs - 1) != 0)
    throw std::domain_error("generate_observations: grid does not contain the observation times");
  const Trajectory traj = integrate(model, true_p, input, interp, y0, grid);
  const int per_obs = grid.steps / (n_obs - 1);
  Rng rng(seed);
  ObservationSet obs;
  obs.observed = model.observed;
  obs.noise_sd = noise_sd;
  obs.times.resize(static_cast<std::size_t>(n_obs));
  obs.values.resize(n_obs, static_cast<int>(model.observed.size()));
  for (int i = 0; i < n_obs; ++i) {
    const int k = i * per_obs;
    obs.times[static_cast<std::size_t>(i)] = grid.time(k);
    for (std::size_t j = 0; j < model.observed.size(); ++j) {
      double v = traj.states(k, model.observed[j]);
      if (noise_sd > 0.0) v += noise_sd * rng.normal();
      obs.values(i, static_cast<int>(j)) = v;
    }
  }
  return obs;
}

}  // namespace depcon
