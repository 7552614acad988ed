#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "depcon/rng.hpp"

namespace depcon {

// Fully connected predictor d_p -> 64 -> 32 -> 16 -> d_p, ReLU on the
// hidden layers, identity output. Maps the parameter estimate at one
// smoothing scale to the estimate at the next finer scale.
struct PredictorNet {
  std::vector<int> layer_sizes;           // {d_p, 64, 32, 16, d_p}
  std::vector<Eigen::MatrixXd> weights;   // weights[l]: sizes[l+1] x sizes[l]
  std::vector<Eigen::VectorXd> biases;

  int num_layers() const { return static_cast<int>(weights.size()); }
  int input_dim() const { return layer_sizes.front(); }

  int param_count() const {
    int n = 0;
    for (int l = 0; l < num_layers(); ++l)
      n += static_cast<int>(weights[static_cast<std::size_t>(l)].size() +
                            biases[static_cast<std::size_t>(l)].size());
    return n;
  }

  Eigen::VectorXd flatten_params() const {
    Eigen::VectorXd out(param_count());
    int at = 0;
    for (int l = 0; l < num_layers(); ++l) {
      const auto& w = weights[static_cast<std::size_t>(l)];
      const auto& b = biases[static_cast<std::size_t>(l)];
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) out(at++) = w(r, c);
      for (int r = 0; r < b.size(); ++r) out(at++) = b(r);
    }
    return out;
  }

  void set_params(const Eigen::VectorXd& flat) {
    if (flat.size() != param_count())
      throw std::invalid_argument("PredictorNet::set_params: size mismatch");
    int at = 0;
    for (int l = 0; l < num_layers(); ++l) {
      auto& w = weights[static_cast<std::size_t>(l)];
      auto& b = biases[static_cast<std::size_t>(l)];
      for (int r = 0; r < w.rows(); ++r)
        for (int c = 0; c < w.cols(); ++c) w(r, c) = flat(at++);
      for (int r = 0; r < b.size(); ++r) b(r) = flat(at++);
    }
  }
};

// Kaiming-uniform hidden layers, zero biases; the output layer is scaled
// down by 100x so the untrained chain collapses near zero instead of
// amplifying initialization noise.
inline PredictorNet init_predictor(std::uint64_t seed, int d_p) {
  if (d_p < 1) throw std::invalid_argument("init_predictor: d_p must be >= 1");
  PredictorNet net;
  net.layer_sizes = {d_p, 64, 32, 16, d_p};
  Rng rng(seed);
  const int n_layers = static_cast<int>(net.layer_sizes.size()) - 1;
  for (int l = 0; l < n_layers; ++l) {
    const int fan_in = net.layer_sizes[static_cast<std::size_t>(l)];
    const int fan_out = net.layer_sizes[static_cast<std::size_t>(l) + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    Eigen::MatrixXd w(fan_out, fan_in);
    for (int r = 0; r < fan_out; ++r)
      for (int c = 0; c < fan_in; ++c) w(r, c) = rng.uniform(-bound, bound);
    if (l == n_layers - 1) w *= 0.01;
    net.weights.push_back(std::move(w));
    net.biases.push_back(Eigen::VectorXd::Zero(fan_out));
  }
  return net;
}

inline Eigen::VectorXd forward(const PredictorNet& net, const Eigen::VectorXd& p) {
  if (p.size() != net.input_dim()) throw std::invalid_argument("forward: input size mismatch");
  Eigen::VectorXd a = p;
  for (int l = 0; l < net.num_layers(); ++l) {
    Eigen::VectorXd z = net.weights[static_cast<std::size_t>(l)] * a +
                        net.biases[static_cast<std::size_t>(l)];
    a = (l + 1 < net.num_layers()) ? z.cwiseMax(0.0).eval() : z;
  }
  return a;
}

// Record of one chain rollout: per application, the input and every layer
// pre-activation. Enough to run exact vector-Jacobian products backward.
struct ChainTape {
  struct Application {
    Eigen::VectorXd input;
    std::vector<Eigen::VectorXd> preacts;  // one per layer; last is the output
  };
  std::vector<Application> steps;
};

struct ChainResult {
  std::vector<Eigen::VectorXd> chain;  // N+1 entries; chain[0] is the input
  ChainTape tape;
};

// chain[k] = f_theta(chain[k-1]) for k = 1..N. chain[0] is the coarsest
// scale estimate; chain[N] the tau = 0 readout.
inline ChainResult forward_chain(const PredictorNet& net, const Eigen::VectorXd& p_top, int n) {
  if (n < 1) throw std::invalid_argument("forward_chain: N must be >= 1");
  ChainResult res;
  res.chain.reserve(static_cast<std::size_t>(n) + 1);
  res.chain.push_back(p_top);
  res.tape.steps.resize(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    auto& step = res.tape.steps[static_cast<std::size_t>(k)];
    step.input = res.chain.back();
    step.preacts.resize(static_cast<std::size_t>(net.num_layers()));
    Eigen::VectorXd a = step.input;
    for (int l = 0; l < net.num_layers(); ++l) {
      step.preacts[static_cast<std::size_t>(l)] =
          net.weights[static_cast<std::size_t>(l)] * a + net.biases[static_cast<std::size_t>(l)];
      a = (l + 1 < net.num_layers())
              ? step.preacts[static_cast<std::size_t>(l)].cwiseMax(0.0).eval()
              : step.preacts[static_cast<std::size_t>(l)];
    }
    res.chain.push_back(a);
  }
  return res;
}

// Recomputes application k's output from the taped input. Bit-exact with
// the original rollout since the op order is identical.
inline Eigen::VectorXd replay(const PredictorNet& net, const ChainTape& tape, int k) {
  return forward(net, tape.steps[static_cast<std::size_t>(k)].input);
}

struct ChainGradients {
  std::vector<Eigen::MatrixXd> grad_weights;
  std::vector<Eigen::VectorXd> grad_biases;
  Eigen::VectorXd grad_input;  // w.r.t. the chain's top entry p_{tau_N}

  Eigen::VectorXd flatten_theta() const {
    int n = 0;
    for (std::size_t l = 0; l < grad_weights.size(); ++l)
      n += static_cast<int>(grad_weights[l].size() + grad_biases[l].size());
    Eigen::VectorXd out(n);
    int at = 0;
    for (std::size_t l = 0; l < grad_weights.size(); ++l) {
      for (int r = 0; r < grad_weights[l].rows(); ++r)
        for (int c = 0; c < grad_weights[l].cols(); ++c) out(at++) = grad_weights[l](r, c);
      for (int r = 0; r < grad_biases[l].size(); ++r) out(at++) = grad_biases[l](r);
    }
    return out;
  }
};

// Reverse sweep through the whole chain. cotangents[k] is the loss
// gradient w.r.t. chain entry k; the result is the total gradient of
// sum_k <cotangents[k], chain[k]> w.r.t. theta and the top entry.
// ReLU subgradient at exactly zero is taken as zero.
inline ChainGradients backward_chain(const PredictorNet& net, const ChainTape& tape,
                                     const std::vector<Eigen::VectorXd>& cotangents) {
  const int n = static_cast<int>(tape.steps.size());
  if (static_cast<int>(cotangents.size()) != n + 1)
    throw std::invalid_argument("backward_chain: need one cotangent per chain entry");
  for (const auto& c : cotangents)
    if (c.size() != net.input_dim())
      throw std::invalid_argument("backward_chain: cotangent size mismatch");

  ChainGradients g;
  g.grad_weights.reserve(static_cast<std::size_t>(net.num_layers()));
  g.grad_biases.reserve(static_cast<std::size_t>(net.num_layers()));
  for (int l = 0; l < net.num_layers(); ++l) {
    g.grad_weights.emplace_back(
        Eigen::MatrixXd::Zero(net.weights[static_cast<std::size_t>(l)].rows(),
                              net.weights[static_cast<std::size_t>(l)].cols()));
    g.grad_biases.emplace_back(
        Eigen::VectorXd::Zero(net.biases[static_cast<std::size_t>(l)].size()));
  }

  Eigen::VectorXd bar = cotangents[static_cast<std::size_t>(n)];
  for (int k = n - 1; k >= 0; --k) {
    const auto& step = tape.steps[static_cast<std::size_t>(k)];
    if (step.input.size() != net.input_dim())
      throw std::invalid_argument("backward_chain: tape does not match the net");
    Eigen::VectorXd delta = bar;  // gradient w.r.t. the output pre-activation
    for (int l = net.num_layers() - 1; l >= 0; --l) {
      const Eigen::VectorXd a_in =
          (l == 0) ? step.input
                   : step.preacts[static_cast<std::size_t>(l) - 1].cwiseMax(0.0).eval();
      g.grad_weights[static_cast<std::size_t>(l)].noalias() += delta * a_in.transpose();
      g.grad_biases[static_cast<std::size_t>(l)] += delta;
      Eigen::VectorXd up = net.weights[static_cast<std::size_t>(l)].transpose() * delta;
      if (l > 0) {
        const auto& z = step.preacts[static_cast<std::size_t>(l) - 1];
        delta = (z.array() > 0.0).select(up, 0.0);
      } else {
        bar = up;
      }
    }
    bar += cotangents[static_cast<std::size_t>(k)];
  }
  g.grad_input = bar;
  return g;
}

// Checkpoint: little-endian binary, uint32 layer-size header followed by
// the flat f64 parameter vector. Reload is bit-exact.
inline void save_checkpoint(const PredictorNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
  const auto n_sizes = static_cast<std::uint32_t>(net.layer_sizes.size());
  out.write(reinterpret_cast<const char*>(&n_sizes), sizeof(n_sizes));
  for (int s : net.layer_sizes) {
    const auto v = static_cast<std::uint32_t>(s);
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
  }
  const Eigen::VectorXd flat = net.flatten_params();
  out.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(flat.size())));
  if (!out) throw std::runtime_error("save_checkpoint: write failed");
}

inline PredictorNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
  std::uint32_t n_sizes = 0;
  in.read(reinterpret_cast<char*>(&n_sizes), sizeof(n_sizes));
  if (!in || n_sizes < 2) throw std::runtime_error("load_checkpoint: bad header");
  PredictorNet net;
  net.layer_sizes.resize(n_sizes);
  for (auto& s : net.layer_sizes) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    s = static_cast<int>(v);
  }
  for (std::size_t l = 0; l + 1 < net.layer_sizes.size(); ++l) {
    net.weights.emplace_back(Eigen::MatrixXd::Zero(net.layer_sizes[l + 1], net.layer_sizes[l]));
    net.biases.emplace_back(Eigen::VectorXd::Zero(net.layer_sizes[l + 1]));
  }
  Eigen::VectorXd flat(net.param_count());
  in.read(reinterpret_cast<char*>(flat.data()),
          static_cast<std::streamsize>(sizeof(double) * static_cast<std::size_t>(flat.size())));
  if (!in) throw std::runtime_error("load_checkpoint: truncated parameter block");
  net.set_params(flat);
  return net;
}

// Bias-corrected Adam.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long step = 0;
  Eigen::VectorXd m;
  Eigen::VectorXd v;

  AdamState() = default;
  AdamState(int size, double lr_) : lr(lr_), m(Eigen::VectorXd::Zero(size)),
                                    v(Eigen::VectorXd::Zero(size)) {}
};

inline void adam_step(AdamState& st, Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (st.m.size() == 0) {
    st.m = Eigen::VectorXd::Zero(params.size());
    st.v = Eigen::VectorXd::Zero(params.size());
  }
  if (params.size() != grad.size() || params.size() != st.m.size())
    throw std::invalid_argument("adam_step: size mismatch");
  st.step += 1;
  st.m = st.beta1 * st.m + (1.0 - st.beta1) * grad;
  st.v = st.beta2 * st.v + (1.0 - st.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  params -= (st.lr / c1) * st.m.cwiseQuotient(((st.v / c2).cwiseSqrt().array() + st.eps).matrix());
}

}  // namespace depcon
