#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "infext/autodiff.hpp"

namespace infext {

// Max relative error between reverse-mode and central-difference gradients
// of a scalar function f at x: |a - n| / max(|a|, |n|, 1e-8).
inline double grad_check(
    const std::function<Var<double>(Tape<double>&, Var<double>)>& f,
    const TensorD& x, double h = 1e-5) {
  TensorD analytic;
  {
    Tape<double> tape;
    Var<double> v = tape.variable(x);
    tape.backward(f(tape, v));
    analytic = tape.grad(v);
  }
  auto eval = [&](const TensorD& at) {
    Tape<double> tape;
    return f(tape, tape.constant(at)).value().item();
  };
  double worst = 0.0;
  TensorD probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = eval(probe);
    probe[i] = orig - h;
    const double down = eval(probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2 * h);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace infext
