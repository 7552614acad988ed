#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "depcon/models.hpp"
#include "depcon/ode.hpp"
#include "depcon/rng.hpp"

using namespace depcon;
using Catch::Approx;

namespace {

SampledSignal constant_signal(double value, double t_end, double dt) {
  SampledSignal s;
  s.dt = dt;
  s.values.assign(static_cast<std::size_t>(std::llround(t_end / dt)) + 1, value);
  return s;
}

// mean gap between upward zero crossings of state component `comp`,
// measured after t_start to skip the transient
double oscillation_period(const Trajectory& traj, int comp, double t_start) {
  std::vector<double> crossings;
  for (int k = 1; k <= traj.steps; ++k) {
    const double t = traj.time(k);
    if (t < t_start) continue;
    const double a = traj.states(k - 1, comp);
    const double b = traj.states(k, comp);
    if (a <= 0.0 && b > 0.0) {
      const double frac = -a / (b - a);
      crossings.push_back(traj.time(k - 1) + frac * traj.h());
    }
  }
  REQUIRE(crossings.size() >= 3);
  return (crossings.back() - crossings.front()) / static_cast<double>(crossings.size() - 1);
}

}  // namespace

TEST_CASE("LV right-hand side fixed points and forcing signs") {
  const OdeModel lv = lv_model();
  Eigen::VectorXd f(2);
  const Eigen::Vector4d p(2.0, 0.5, 1.0, 1.0);

  lv.rhs(Eigen::Vector2d(1.0, 4.0), p, 0.0, f);
  CHECK(f(0) == 0.0);
  CHECK(f(1) == 0.0);

  lv.rhs(Eigen::Vector2d(0.0, 0.0), p, 1.0, f);
  CHECK(f(0) == 1.0);
  CHECK(f(1) == -1.0);
}

TEST_CASE("LV jacobian at the equilibrium matches finite differences") {
  const OdeModel lv = lv_model();
  const Eigen::Vector4d p(2.0, 0.5, 1.0, 1.0);
  const Eigen::Vector2d y(1.0, 4.0);
  Eigen::MatrixXd jy(2, 2);
  lv.jac_y(y, p, 0.0, jy);
  Eigen::VectorXd fp(2), fm(2);
  for (int c = 0; c < 2; ++c) {
    Eigen::Vector2d yp = y, ym = y;
    const double eps = 1e-6;
    yp(c) += eps;
    ym(c) -= eps;
    lv.rhs(yp, p, 0.0, fp);
    lv.rhs(ym, p, 0.0, fm);
    for (int r = 0; r < 2; ++r) CHECK(jy(r, c) == Approx((fp(r) - fm(r)) / (2 * eps)).margin(1e-6));
  }
}

TEST_CASE("circadian dark condition decouples the oscillator") {
  const OdeModel circ = circadian_model();
  const Eigen::Vector4d p = circadian_true_params();
  Eigen::VectorXd f(3);
  const Eigen::Vector3d y(0.37, 0.8, -0.2);
  circ.rhs(y, p, 0.0, f);
  // alpha = 0 at S = 0, so B = 0 and dn/dt = -60*beta*n
  CHECK(f(0) == Approx(-60.0 * 0.0075 * 0.37).epsilon(1e-12));
  CHECK(f(1) == Approx((std::numbers::pi / 12.0) * y(2)).epsilon(1e-12));
}

TEST_CASE("both shipped models pass the jacobian self-check at 50 points") {
  Rng rng(123);
  {
    OdeModel lv = lv_model();
    const Eigen::Vector2d y_lo(0.1, 0.1), y_hi(4.0, 6.0);
    const Eigen::Vector4d p_lo = lv_true_params() / 4.0, p_hi = 4.0 * lv_true_params();
    CHECK_NOTHROW(check_jacobians(lv, rng, 50, y_lo, y_hi, p_lo, p_hi, 0.0, 1.0));
  }
  {
    OdeModel circ = circadian_model();
    const Eigen::Vector3d y_lo(0.05, -1.2, -1.2), y_hi(0.95, 1.2, 1.2);
    const Eigen::Vector4d p_lo = circadian_true_params() / 4.0,
                          p_hi = 4.0 * circadian_true_params();
    // S bounded away from 0 where the photic drive has its sqrt kink
    CHECK_NOTHROW(check_jacobians(circ, rng, 50, y_lo, y_hi, p_lo, p_hi, 50.0, 5000.0));
  }
}

TEST_CASE("circadian free-running period tracks tau_c") {
  const OdeModel circ = circadian_model();
  const Eigen::Vector4d p = circadian_true_params();
  const SampledSignal dark = constant_signal(0.0, 240.0, 0.1);
  const Trajectory traj =
      integrate(circ, p, dark, Interp::NearestLeft, circadian_default_y0(), TimeGrid{240.0, 9600});
  const double period = oscillation_period(traj, 1, 48.0);
  CHECK(period == Approx(24.0).epsilon(0.05));
}

TEST_CASE("circadian entrains to a 24h light schedule") {
  const OdeModel circ = circadian_model();
  const Eigen::Vector4d p = circadian_true_params();
  LightSchedule sched;
  const SampledSignal light = make_light_schedule(sched, 480.0, 0.1);
  const Trajectory traj = integrate(circ, p, light, Interp::NearestLeft, circadian_default_y0(),
                                    TimeGrid{480.0, 19200});
  const double period = oscillation_period(traj, 1, 240.0);
  CHECK(period == Approx(24.0).margin(0.5));
}

TEST_CASE("light schedule construction") {
  LightSchedule sched;
  sched.period_h = 24.0;
  sched.on_fraction = 0.5;
  sched.lux = 250.0;
  const SampledSignal s = make_light_schedule(sched, 144.0, 0.1);

  SECTION("values are only 0 or lux") {
    for (double v : s.values) CHECK((v == 0.0 || v == 250.0));
  }

  SECTION("exactly 6 on-windows of 12 h") {
    int transitions_up = 0;
    double on_time = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
      if (s.values[i] == 250.0 && s.values[i - 1] == 0.0) ++transitions_up;
      if (s.values[i] == 250.0) on_time += s.dt;
    }
    if (s.values[0] == 250.0) ++transitions_up;
    CHECK(transitions_up == 6);
    CHECK(on_time == Approx(6.0 * 12.0).margin(6 * 2 * 0.1));
  }

  SECTION("jittered schedules are deterministic per seed") {
    LightSchedule j1 = sched, j2 = sched;
    j1.jitter_h = j2.jitter_h = 1.0;
    j1.seed = j2.seed = 99;
    CHECK(make_light_schedule(j1, 144.0, 0.1).values == make_light_schedule(j2, 144.0, 0.1).values);
    LightSchedule j3 = j1;
    j3.seed = 100;
    CHECK(make_light_schedule(j3, 144.0, 0.1).values != make_light_schedule(j1, 144.0, 0.1).values);
  }

  SECTION("invalid settings are rejected") {
    LightSchedule bad = sched;
    bad.on_fraction = 1.0;
    CHECK_THROWS_AS(make_light_schedule(bad, 144.0, 0.1), std::domain_error);
    bad = sched;
    bad.lux = -1.0;
    CHECK_THROWS_AS(make_light_schedule(bad, 144.0, 0.1), std::domain_error);
  }
}

TEST_CASE("pulse train construction is seeded and rectangular") {
  const SampledSignal a = make_pulse_train(10.0, 0.02, 6, 1.0, 0.5, 7);
  const SampledSignal b = make_pulse_train(10.0, 0.02, 6, 1.0, 0.5, 7);
  CHECK(a.values == b.values);
  for (double v : a.values) CHECK((v == 0.0 || v == 1.0));
  double on = 0.0;
  for (double v : a.values) on += v * a.dt;
  CHECK(on > 0.0);
  CHECK(on <= 6 * 0.5 + 0.1);
}

TEST_CASE("generate_observations") {
  const OdeModel circ = circadian_model();
  const Eigen::Vector4d p = circadian_true_params();
  const SampledSignal light = make_light_schedule({}, 144.0, 0.1);
  const TimeGrid grid = grid_for_observations(144.0, 80, 0.025);

  SECTION("observation spacing is T / (N_o - 1)") {
    const ObservationSet obs = generate_observations(circ, p, light, Interp::NearestLeft,
                                                     circadian_default_y0(), grid, 80, 0.0, 3);
    REQUIRE(obs.count() == 80);
    CHECK(obs.times[1] - obs.times[0] == Approx(144.0 / 79.0).epsilon(1e-12));
    CHECK(obs.observed == std::vector<int>{1, 2});
  }

  SECTION("noiseless observations reproduce the trajectory exactly") {
    const ObservationSet obs = generate_observations(circ, p, light, Interp::NearestLeft,
                                                     circadian_default_y0(), grid, 80, 0.0, 3);
    const Trajectory traj =
        integrate(circ, p, light, Interp::NearestLeft, circadian_default_y0(), grid);
    CHECK(loss(traj, obs) == 0.0);
  }

  SECTION("fixed seed reproducibility with noise") {
    const ObservationSet a = generate_observations(circ, p, light, Interp::NearestLeft,
                                                   circadian_default_y0(), grid, 80, 0.05, 3);
    const ObservationSet b = generate_observations(circ, p, light, Interp::NearestLeft,
                                                   circadian_default_y0(), grid, 80, 0.05, 3);
    CHECK(a.values == b.values);
    const ObservationSet c = generate_observations(circ, p, light, Interp::NearestLeft,
                                                   circadian_default_y0(), grid, 80, 0.05, 4);
    CHECK(a.values != c.values);
  }
}

TEST_CASE("LV trajectories kink at the pulse edges") {
  const OdeModel lv = lv_model();
  const Eigen::Vector4d p = lv_true_params();
  const Eigen::Vector2d y0(1.0, 2.0);
  const SampledSignal s = make_pulse_train(10.0, 0.02, 5, 1.0, 0.5, 11);
  const TimeGrid grid{10.0, 2000};
  const Trajectory traj = integrate(lv, p, s, Interp::NearestLeft, y0, grid);

  // slope changes of dy/dt between consecutive grid points, split into
  // steps that contain a forcing discontinuity and steps that do not
  Eigen::VectorXd f_prev(2), f_next(2);
  std::vector<double> at_jumps, elsewhere;
  for (int k = 0; k + 1 <= traj.steps; ++k) {
    const double s0 = s.eval(traj.time(k), Interp::NearestLeft);
    const double s1 = s.eval(traj.time(k + 1), Interp::NearestLeft);
    lv.rhs(traj.states.row(k).transpose(), p, s0, f_prev);
    lv.rhs(traj.states.row(k + 1).transpose(), p, s1, f_next);
    const double change = (f_next - f_prev).norm();
    if (std::abs(s1 - s0) > 0.5)
      at_jumps.push_back(change);
    else
      elsewhere.push_back(change);
  }
  REQUIRE(!at_jumps.empty());
  std::sort(elsewhere.begin(), elsewhere.end());
  const double median_elsewhere = elsewhere[elsewhere.size() / 2];
  const double max_jump = *std::max_element(at_jumps.begin(), at_jumps.end());
  CHECK(max_jump > 10.0 * median_elsewhere);
}
