#pragma once

#include <cmath>
#include <cstddef>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace depcon {

// How a sampled signal is read between grid points. NearestLeft keeps
// discontinuities crisp (used at tau = 0); Linear suits smoothed signals.
enum class Interp { NearestLeft, Linear };

// Scalar exogenous input on a uniform time grid; identically zero outside
// [t0, t0 + (len-1)*dt].
struct SampledSignal {
  double t0 = 0.0;
  double dt = 0.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double t_end() const { return t0 + dt * static_cast<double>(values.size() - 1); }
  double duration() const { return dt * static_cast<double>(values.size() - 1); }

  void validate() const {
    if (!(dt > 0.0)) throw std::domain_error("SampledSignal: dt must be > 0");
    if (values.size() < 2) throw std::domain_error("SampledSignal: need at least 2 samples");
    for (double v : values)
      if (!std::isfinite(v)) throw std::domain_error("SampledSignal: non-finite sample");
  }

  double eval(double t, Interp mode = Interp::Linear) const {
    const double x = (t - t0) / dt;
    const double last = static_cast<double>(values.size() - 1);
    if (x < 0.0 || x > last) return 0.0;
    if (x >= last) return values.back();
    const auto i = static_cast<std::size_t>(x);
    if (mode == Interp::NearestLeft) return values[i];
    const double frac = x - static_cast<double>(i);
    return values[i] + frac * (values[i + 1] - values[i]);
  }
};

inline double heat_kernel(double tau, double t) {
  if (!(tau > 0.0)) throw std::domain_error("heat_kernel: tau must be > 0");
  return std::exp(-t * t / (4.0 * tau)) / std::sqrt(4.0 * std::numbers::pi * tau);
}

// Kernel taps on the sample grid, truncated at |t| <= 6*sigma with
// sigma = sqrt(2*tau), renormalized to unit sum so convolution with a
// constant reproduces the constant away from the boundary.
inline std::vector<double> kernel_weights(double tau, double dt) {
  if (!(tau > 0.0)) throw std::domain_error("kernel_weights: tau must be > 0");
  if (!(dt > 0.0)) throw std::domain_error("kernel_weights: dt must be > 0");
  const double sigma = std::sqrt(2.0 * tau);
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(6.0 * sigma / dt));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double mass = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = heat_kernel(tau, static_cast<double>(k) * dt);
    w[static_cast<std::size_t>(k + radius)] = v;
    mass += v;
  }
  for (double& v : w) v /= mass;
  return w;
}

inline SampledSignal smooth(const SampledSignal& source, double tau) {
  source.validate();
  if (tau < 0.0) throw std::domain_error("smooth: tau must be >= 0");
  if (tau == 0.0) return source;

  const std::vector<double> w = kernel_weights(tau, source.dt);
  const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
  const auto n = static_cast<std::ptrdiff_t>(source.size());

  SampledSignal out;
  out.t0 = source.t0;
  out.dt = source.dt;
  out.values.assign(source.size(), 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const std::ptrdiff_t klo = std::max<std::ptrdiff_t>(-radius, i - (n - 1));
    const std::ptrdiff_t khi = std::min<std::ptrdiff_t>(radius, i);
    for (std::ptrdiff_t k = klo; k <= khi; ++k)
      acc += w[static_cast<std::size_t>(k + radius)] * source.values[static_cast<std::size_t>(i - k)];
    out.values[static_cast<std::size_t>(i)] = acc;
  }
  return out;
}

// Ordered smoothing scales tau_n = tau_max * n / N with the per-scale
// smoothed signals; smoothed[0] is the untouched source.
struct ScaleHierarchy {
  double tau_max = 0.0;
  int grid_size = 0;  // N
  std::vector<double> scales;            // N+1 entries, scales[0] = 0
  std::vector<SampledSignal> smoothed;   // N+1 entries on the source grid
};

inline ScaleHierarchy build_hierarchy(const SampledSignal& source, int n_scales, double tau_max) {
  source.validate();
  if (n_scales < 1) throw std::domain_error("build_hierarchy: N must be >= 1");
  if (!(tau_max > 0.0)) throw std::domain_error("build_hierarchy: tau_max must be > 0");
  ScaleHierarchy h;
  h.tau_max = tau_max;
  h.grid_size = n_scales;
  h.scales.reserve(static_cast<std::size_t>(n_scales) + 1);
  h.smoothed.reserve(static_cast<std::size_t>(n_scales) + 1);
  for (int n = 0; n <= n_scales; ++n) {
    const double tau = tau_max * static_cast<double>(n) / static_cast<double>(n_scales);
    h.scales.push_back(tau);
    h.smoothed.push_back(smooth(source, tau));
  }
  return h;
}

namespace detail {
inline void require_same_grid(const SampledSignal& a, const SampledSignal& b) {
  const double scale = std::max({1.0, std::abs(a.t0), std::abs(a.dt)});
  if (a.size() != b.size() || std::abs(a.t0 - b.t0) > 1e-9 * scale ||
      std::abs(a.dt - b.dt) > 1e-9 * scale)
    throw std::domain_error("signal grids do not match");
}
}  // namespace detail

// Trapezoidal approximation of the L2([t0, t_end]) distance.
inline double l2_distance(const SampledSignal& a, const SampledSignal& b) {
  a.validate();
  b.validate();
  detail::require_same_grid(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    const double sq = d * d;
    acc += (i == 0 || i + 1 == a.size()) ? 0.5 * sq : sq;
  }
  return std::sqrt(acc * a.dt);
}

inline double l2_norm(const SampledSignal& a) {
  SampledSignal zero = a;
  for (double& v : zero.values) v = 0.0;
  return l2_distance(a, zero);
}

// Two-column CSV (time,value) with a one-line header. The loader checks
// uniform spacing to 1e-9 relative tolerance.
inline void save_signal_csv(const SampledSignal& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_signal_csv: cannot open " + path);
  out.precision(17);
  out << "t,value\n";
  for (std::size_t i = 0; i < s.size(); ++i)
    out << s.t0 + s.dt * static_cast<double>(i) << "," << s.values[i] << "\n";
}

inline SampledSignal load_signal_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_signal_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("load_signal_csv: empty file");
  std::vector<double> times;
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tf, vf;
    if (!std::getline(row, tf, ',') || !std::getline(row, vf, ','))
      throw std::runtime_error("load_signal_csv: malformed row: " + line);
    times.push_back(std::stod(tf));
    values.push_back(std::stod(vf));
  }
  if (times.size() < 2) throw std::runtime_error("load_signal_csv: need at least 2 samples");
  const double dt = times[1] - times[0];
  if (!(dt > 0.0)) throw std::runtime_error("load_signal_csv: non-increasing time column");
  for (std::size_t i = 1; i < times.size(); ++i) {
    const double step = times[i] - times[i - 1];
    if (std::abs(step - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw std::runtime_error("load_signal_csv: non-uniform spacing");
  }
  SampledSignal s{times[0], dt, std::move(values)};
  s.validate();
  return s;
}

}  // namespace depcon
