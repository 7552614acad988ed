#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>

#include "depcon/rng.hpp"
#include "depcon/signal.hpp"

using namespace depcon;
using Catch::Approx;

namespace {

SampledSignal unit_step(double t_end, double dt) {
  SampledSignal s;
  s.t0 = 0.0;
  s.dt = dt;
  s.values.assign(static_cast<std::size_t>(std::llround(t_end / dt)) + 1, 1.0);
  return s;
}

SampledSignal square_wave_pm1(double t_end, double dt, double period) {
  SampledSignal s;
  s.t0 = 0.0;
  s.dt = dt;
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt)) + 1;
  s.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * static_cast<double>(i);
    s.values[i] = std::fmod(t, period) < period / 2.0 ? 1.0 : -1.0;
  }
  return s;
}

// Closed form for the heat-kernel convolution of the indicator of [0, T].
double step_erf_oracle(double t, double t_end, double tau) {
  const double a = 2.0 * std::sqrt(tau);
  return 0.5 * (std::erf((t_end - t) / a) + std::erf(t / a));
}

// Direct quadrature of the convolution integral, independent of the
// implementation's truncated renormalized taps.
double convolution_quadrature(const SampledSignal& src, double tau, double t) {
  const double sigma = std::sqrt(2.0 * tau);
  const double half = 8.0 * sigma;
  const double ds = std::min(src.dt, sigma / 50.0);
  const auto n = static_cast<int>(std::ceil(2.0 * half / ds));
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double s = t - half + 2.0 * half * static_cast<double>(i) / n;
    const double v = heat_kernel(tau, t - s) * src.eval(s, Interp::NearestLeft);
    acc += (i == 0 || i == n) ? 0.5 * v : v;
  }
  return acc * 2.0 * half / n;
}

}  // namespace

TEST_CASE("heat kernel values and symmetry") {
  CHECK(heat_kernel(1.0 / (4.0 * std::numbers::pi), 0.0) == Approx(1.0).epsilon(1e-14));
  CHECK(heat_kernel(0.25, 0.0) == Approx(1.0 / std::sqrt(std::numbers::pi)).epsilon(1e-12));

  Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const double tau = rng.uniform(1e-3, 10.0);
    // stay inside ~10 sigma so exp() cannot underflow to zero
    const double t = rng.uniform(-1.0, 1.0) * 10.0 * std::sqrt(tau);
    CHECK(heat_kernel(tau, t) == heat_kernel(tau, -t));
    CHECK(heat_kernel(tau, t) > 0.0);
  }
  CHECK_THROWS_AS(heat_kernel(0.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(heat_kernel(-1.0, 1.0), std::domain_error);
}

TEST_CASE("kernel weights have unit mass") {
  Rng rng(12);
  for (int i = 0; i < 50; ++i) {
    const double tau = rng.uniform(0.01, 10.0);
    const double dt = rng.uniform(0.001, 0.1);
    const auto w = kernel_weights(tau, dt);
    double mass = 0.0;
    for (double v : w) mass += v;
    CHECK(std::abs(mass - 1.0) <= 1e-12);
  }
}

TEST_CASE("smooth at tau = 0 is the identity") {
  SampledSignal s = square_wave_pm1(4.0, 0.01, 2.0);
  const SampledSignal out = smooth(s, 0.0);
  REQUIRE(out.values == s.values);
  CHECK_THROWS_AS(smooth(s, -0.1), std::domain_error);
}

TEST_CASE("smoothed unit step matches the erf closed form") {
  const SampledSignal s = unit_step(100.0, 0.01);
  const SampledSignal st = smooth(s, 1.0);

  // interior: constant preserved by the renormalized taps
  const auto mid = static_cast<std::size_t>(std::llround(50.0 / 0.01));
  CHECK(std::abs(st.values[mid] - 1.0) <= 1e-6);

  // at the jump the discrete sum sees the full t = 0 sample, which offsets
  // the continuous value 1/2 by about K_tau(0)*dt/2 = 1.4e-3
  CHECK(std::abs(st.values[0] - step_erf_oracle(0.0, 100.0, 1.0)) <= 2e-3);
  CHECK(step_erf_oracle(0.0, 100.0, 1.0) == Approx(0.5).margin(1e-12));

  // a few interior points against the closed form
  for (double t : {0.5, 1.0, 2.0, 5.0, 98.0, 99.5}) {
    const auto i = static_cast<std::size_t>(std::llround(t / 0.01));
    CHECK(st.values[i] == Approx(step_erf_oracle(t, 100.0, 1.0)).margin(2e-3));
  }
}

TEST_CASE("square wave flattens monotonically with tau") {
  const SampledSignal s = square_wave_pm1(20.0, 0.01, 2.0);
  double prev_impl = 2.0, prev_oracle = 2.0;
  for (double tau : {0.1, 1.0, 10.0}) {
    const SampledSignal st = smooth(s, tau);
    double impl_max = 0.0, oracle_max = 0.0;
    for (std::size_t i = 0; i < st.size(); i += 25) {
      impl_max = std::max(impl_max, std::abs(st.values[i]));
      oracle_max =
          std::max(oracle_max, std::abs(convolution_quadrature(s, tau, s.dt * static_cast<double>(i))));
    }
    CHECK(impl_max < prev_impl);
    CHECK(oracle_max < prev_oracle);
    CHECK(impl_max == Approx(oracle_max).epsilon(0.03).margin(5e-3));
    prev_impl = impl_max;
    prev_oracle = oracle_max;
  }
}

TEST_CASE("build_hierarchy lays out the scale grid") {
  const SampledSignal s = unit_step(10.0, 0.01);
  const ScaleHierarchy h = build_hierarchy(s, 4, 1.0);
  REQUIRE(h.scales == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  REQUIRE(h.smoothed.size() == 5);
  CHECK(h.smoothed[0].values == s.values);
  for (std::size_t i = 1; i < h.scales.size(); ++i) CHECK(h.scales[i] > h.scales[i - 1]);

  const ScaleHierarchy h1 = build_hierarchy(s, 1, 0.7);
  CHECK(h1.scales == std::vector<double>{0.0, 0.7});

  CHECK_THROWS_AS(build_hierarchy(s, 0, 1.0), std::domain_error);
  CHECK_THROWS_AS(build_hierarchy(s, 4, 0.0), std::domain_error);
}

TEST_CASE("l2_distance on the sample grid") {
  SampledSignal ones = unit_step(1.0, 1e-3);
  SampledSignal zeros = ones;
  for (double& v : zeros.values) v = 0.0;
  CHECK(l2_distance(ones, ones) == 0.0);
  CHECK(l2_distance(ones, zeros) == Approx(1.0).margin(1e-3));

  SampledSignal other = ones;
  other.dt = 2e-3;
  CHECK_THROWS_AS(l2_distance(ones, other), std::domain_error);
}

TEST_CASE("approach to identity: ||S_tau - S|| decreases with tau") {
  const SampledSignal s = unit_step(100.0, 0.01);
  double prev = 1e300;
  for (double tau : {1.0, 0.1, 0.01}) {
    const double d = l2_distance(smooth(s, tau), s);

    // erf oracle for the same distance, by fine quadrature of the closed form
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      const double t = s.dt * static_cast<double>(i);
      const double diff = step_erf_oracle(t, 100.0, tau) - 1.0;
      acc += ((i == 0 || i + 1 == s.size()) ? 0.5 : 1.0) * diff * diff;
    }
    const double oracle = std::sqrt(acc * s.dt);

    CHECK(d < prev);
    CHECK(d == Approx(oracle).epsilon(0.05).margin(1e-4));
    prev = d;
  }
}

TEST_CASE("approximate identity over halvings of tau") {
  const SampledSignal s = unit_step(100.0, 0.01);
  double prev = 1e300;
  double tau = 1.0;
  for (int i = 0; i < 11; ++i) {  // 1 down to 1/1024
    const double d = l2_distance(smooth(s, tau), s);
    CHECK(d < prev);
    prev = d;
    tau /= 2.0;
  }
}

TEST_CASE("kernel L2 norm decays like tau^{-1/4}") {
  // quadrature of K_tau^2 against the analytic (8*pi*tau)^{-1/4}
  auto norm_by_quadrature = [](double tau) {
    const double sigma = std::sqrt(2.0 * tau);
    const double half = 8.0 * sigma;
    const int n = 20000;
    double acc = 0.0;
    for (int i = 0; i <= n; ++i) {
      const double t = -half + 2.0 * half * static_cast<double>(i) / n;
      const double k = heat_kernel(tau, t);
      acc += (i == 0 || i == n) ? 0.5 * k * k : k * k;
    }
    return std::sqrt(acc * 2.0 * half / n);
  };
  double qmin = 1e300, qmax = 0.0;
  for (double tau : {0.5, 1.0, 2.0, 4.0}) {
    const double q = norm_by_quadrature(tau) * std::pow(tau, 0.25);
    CHECK(norm_by_quadrature(tau) ==
          Approx(std::pow(8.0 * std::numbers::pi * tau, -0.25)).epsilon(1e-6));
    qmin = std::min(qmin, q);
    qmax = std::max(qmax, q);
  }
  CHECK(qmax / qmin < 1.01);
}

TEST_CASE("smoothness proxy: second differences shrink with tau") {
  const SampledSignal s = square_wave_pm1(20.0, 0.01, 2.0);
  double prev = 1e300;
  for (double tau : {0.0, 0.01, 0.1, 1.0}) {
    const SampledSignal st = smooth(s, tau);
    double max_dd = 0.0;
    for (std::size_t i = 1; i + 1 < st.size(); ++i)
      max_dd = std::max(max_dd,
                        std::abs(st.values[i + 1] - 2.0 * st.values[i] + st.values[i - 1]));
    CHECK(max_dd <= prev);
    prev = max_dd;
  }
}

TEST_CASE("signal CSV round trip and validation") {
  const auto dir = std::filesystem::temp_directory_path() / "depcon_signal_test";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "sig.csv").string();

  SampledSignal s = square_wave_pm1(4.0, 0.05, 2.0);
  s.t0 = 1.5;
  save_signal_csv(s, path);
  const SampledSignal back = load_signal_csv(path);
  CHECK(back.t0 == Approx(s.t0));
  CHECK(back.dt == Approx(s.dt));
  REQUIRE(back.values.size() == s.values.size());
  for (std::size_t i = 0; i < s.values.size(); ++i) CHECK(back.values[i] == s.values[i]);

  const std::string bad = (dir / "bad.csv").string();
  {
    std::ofstream out(bad);
    out << "t,value\n0,1\n0.1,1\n0.25,1\n";
  }
  CHECK_THROWS_WITH(load_signal_csv(bad), Catch::Matchers::ContainsSubstring("non-uniform"));
}

TEST_CASE("zero extension outside the sampled window") {
  SampledSignal s = unit_step(1.0, 0.1);
  CHECK(s.eval(-0.01) == 0.0);
  CHECK(s.eval(1.01) == 0.0);
  CHECK(s.eval(0.55, Interp::Linear) == Approx(1.0));
  CHECK(s.eval(0.55, Interp::NearestLeft) == 1.0);
}
