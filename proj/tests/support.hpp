#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "infext/autodiff.hpp"
#include "infext/gradcheck.hpp"
#include "infext/metrics.hpp"
#include "infext/networks.hpp"
#include "infext/signal.hpp"

namespace testing {

using infext::Index;

inline Eigen::VectorXd random_vector(Index n, unsigned seed, double scale = 1.0) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal(rng);
  return v;
}

inline infext::TensorD random_tensor(infext::Shape shape, unsigned seed, double scale = 1.0) {
  const Index n = infext::numel(shape);
  return infext::TensorD(std::move(shape), random_vector(n, seed, scale));
}

// Values bounded away from zero, for ops with a kink or pole there.
inline infext::TensorD away_from_zero(infext::Shape shape, unsigned seed, double lo = 0.2) {
  infext::TensorD t = random_tensor(std::move(shape), seed);
  for (Index i = 0; i < t.size(); ++i) {
    t[i] = (t[i] >= 0 ? 1.0 : -1.0) * (lo + std::abs(t[i]));
  }
  return t;
}

// O(n m) linear convolution.
inline Eigen::VectorXd direct_convolve(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(a.size() + b.size() - 1);
  for (Index i = 0; i < a.size(); ++i) {
    for (Index j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// Area under a band-limited pulse: the DC gain of the taps.
inline double pulse_area(const Eigen::VectorXd& taps) { return taps.sum(); }

// Position of the maximum of the band-limited reconstruction sum h[n] sinc(t - n),
// searched at 1e-3 sample resolution around the largest tap.
inline double bandlimited_peak(const Eigen::VectorXd& taps) {
  Index k = 0;
  taps.cwiseAbs().maxCoeff(&k);
  auto value = [&](double t) {
    double s = 0;
    for (Index n = std::max<Index>(0, k - 40); n < std::min<Index>(taps.size(), k + 40); ++n) {
      const double x = t - static_cast<double>(n);
      s += taps[n] * (std::abs(x) < 1e-12 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x));
    }
    return s;
  };
  double best_t = static_cast<double>(k), best_v = value(best_t);
  for (double t = k - 1.0; t <= k + 1.0; t += 1e-3) {
    const double v = value(t);
    if (v > best_v) best_v = v, best_t = t;
  }
  return best_t;
}

// Loss that touches every output element with a distinct weight.
template <typename S>
infext::Var<S> weighted_sum(infext::Var<S> y, unsigned seed) {
  infext::Tensor<S> w = random_tensor(y.shape(), seed).template cast<S>();
  return infext::ad::sum(infext::ad::mul(y, y.tape->constant(std::move(w))));
}

// Crude XML well-formedness check: balanced, properly nested tags.
inline bool xml_well_formed(const std::string& text) {
  std::vector<std::string> stack;
  std::size_t pos = 0;
  bool root_seen = false;
  while ((pos = text.find('<', pos)) != std::string::npos) {
    const std::size_t end = text.find('>', pos);
    if (end == std::string::npos) return false;
    std::string tag = text.substr(pos + 1, end - pos - 1);
    pos = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    if (tag[0] == '/') {
      const std::string name = tag.substr(1);
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
      continue;
    }
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (stack.empty()) {
      if (root_seen) return false;
      root_seen = true;
    }
    if (!self_closing) stack.push_back(name);
  }
  return root_seen && stack.empty();
}

// True when f throws an exception whose message contains `needle`.
template <typename F>
bool throws_containing(F&& f, const std::string& needle) {
  try {
    f();
  } catch (const std::exception& e) {
    return std::string(e.what()).find(needle) != std::string::npos;
  }
  return false;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(read_file(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> row;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) row.push_back(cell);
    rows.push_back(std::move(row));
  }
  return rows;
}

// A few-hundred-parameter model for end-to-end checks.
inline infext::ModelConfig tiny_model(infext::Arch arch, bool causal, infext::Fusion fusion) {
  infext::ModelConfig c;
  c.arch = arch;
  c.causal = causal;
  c.fusion = fusion;
  c.sample_rate = 8000;
  c.encoder = {8, 4, 4};
  c.tcn = {3, 4, 3, 2, 1};
  c.dprnn = {3, 4, 3, 1};
  return c;
}

// Max relative error between tape gradients of -SDR(target, model output)
// and central differences, over every parameter element. The target is the
// current estimate plus noise of equal RMS, which keeps the loss at a
// moderate SDR; a unit-scale target against a near-silent initial estimate
// shrinks every gradient toward the finite-difference noise floor.
inline double model_grad_check(const infext::ModelParams<double>& params,
                               const infext::ModelConfig& cfg, const infext::Waveform& mixture,
                               const infext::Waveform& reference, unsigned noise_seed,
                               double h = 1e-5) {
  using namespace infext;
  const Waveform base = infer(params, cfg, mixture, reference);
  const double rms = std::sqrt(base.samples.squaredNorm() / double(base.size()));
  const TensorD target_t({base.size()},
                         Eigen::VectorXd(base.samples + rms * random_vector(base.size(), noise_seed)));
  auto loss_of = [&](const ModelParams<double>& p, std::vector<TensorD>* grads) {
    Tape<double> tape;
    BoundParams<double> bound(tape, p, grads != nullptr);
    const auto out = model_forward(bound, cfg, mixture, reference);
    Var<double> loss = sdr_loss(target_t, out.estimate);
    if (grads) {
      tape.backward(loss);
      for (const auto& v : bound.vars()) grads->push_back(tape.grad(v));
    }
    return loss.value().item();
  };
  std::vector<TensorD> grads;
  loss_of(params, &grads);
  ModelParams<double> probe = params;
  double worst = 0;
  for (std::size_t i = 0; i < probe.size(); ++i) {
    for (Index k = 0; k < probe.tensor(i).size(); ++k) {
      const double orig = probe.tensor(i)[k];
      probe.tensor(i)[k] = orig + h;
      const double up = loss_of(probe, nullptr);
      probe.tensor(i)[k] = orig - h;
      const double down = loss_of(probe, nullptr);
      probe.tensor(i)[k] = orig;
      const double numeric = (up - down) / (2 * h);
      const double a = grads[i][k];
      worst = std::max(worst, std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8}));
    }
  }
  return worst;
}

}  // namespace testing
