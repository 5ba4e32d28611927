#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "infext/tensor.hpp"

namespace infext {

template <typename Scalar>
class Tape;

// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<Scalar>& value() const;
  const Shape& shape() const { return value().shape(); }
  Index dim(int axis) const { return value().dim(axis); }
  Index size() const { return value().size(); }
};

// Reverse-mode gradient tape. Nodes are appended in execution order, which is
// a topological order by construction; backward() walks it once in reverse.
template <typename Scalar>
class Tape {
 public:
  using TensorT = Tensor<Scalar>;
  // Receives the gradient of the node's output and accumulates into the
  // gradients of its inputs through Tape::accumulate / grad_buffer.
  using Pullback = std::function<void(Tape&, const TensorT& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<Scalar> variable(TensorT value, bool requires_grad = true);
  Var<Scalar> constant(TensorT value) { return variable(std::move(value), false); }

  const TensorT& value(int id) const { return nodes_.at(id).value; }
  const TensorT& value(Var<Scalar> v) const { return value(v.id); }

  bool requires_grad(int id) const { return nodes_.at(id).requires_grad; }
  bool requires_grad(Var<Scalar> v) const { return requires_grad(v.id); }

  // Gradient of the last backward() loss with respect to v; zeros if v did not
  // influence the loss.
  TensorT grad(Var<Scalar> v) const;

  void backward(Var<Scalar> loss);
  bool backward_done() const { return backward_done_; }

  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var<Scalar> record(TensorT value, std::span<const Var<Scalar>> inputs,
                     Pullback pullback);
  TensorT& grad_buffer(int id);

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    bool has_grad = false;
    bool requires_grad = false;
    Pullback pullback;
  };

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

template <typename Scalar>
const Tensor<Scalar>& Var<Scalar>::value() const {
  return tape->value(id);
}

struct Conv1dOptions {
  Index stride = 1;
  Index dilation = 1;
  Index groups = 1;
  Index pad_left = 0;
  Index pad_right = 0;
};

namespace ad {

// Element-wise arithmetic with trailing-aligned broadcasting: an operand of
// size 1 along an axis is repeated, and its gradient is sum-reduced back.
template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
template <typename S> Var<S> mul(Var<S> a, Var<S> b);

template <typename S> Var<S> scale(Var<S> x, S factor);
template <typename S> Var<S> add_scalar(Var<S> x, S offset);

// (m x k) . (k x n)
template <typename S> Var<S> matmul(Var<S> a, Var<S> b);

// x: (C_in x T), weight: (C_out x C_in/groups x K), bias: (C_out) or invalid.
template <typename S>
Var<S> conv1d(Var<S> x, Var<S> weight, Var<S> bias, const Conv1dOptions& opt);

// x: (C_in x T), weight: (C_in x C_out x K) -> (C_out x (T-1)*stride + K).
template <typename S>
Var<S> conv_transpose1d(Var<S> x, Var<S> weight, Index stride);

template <typename S> Var<S> relu(Var<S> x);
// slope has size 1 (shared) or x.dim(0) (per channel).
template <typename S> Var<S> prelu(Var<S> x, Var<S> slope);
template <typename S> Var<S> sigmoid(Var<S> x);
template <typename S> Var<S> tanh(Var<S> x);
template <typename S> Var<S> sqrt(Var<S> x);
template <typename S> Var<S> reciprocal(Var<S> x);
template <typename S> Var<S> log(Var<S> x);
template <typename S> Var<S> square(Var<S> x);

// Reductions keep the reduced axis with extent 1; the all-axes forms return a
// rank-0 scalar.
template <typename S> Var<S> sum(Var<S> x);
template <typename S> Var<S> sum(Var<S> x, int axis);
template <typename S> Var<S> mean(Var<S> x);
template <typename S> Var<S> mean(Var<S> x, int axis);

// Mean along the last axis computed as first + mean(x - first). Exact when all
// entries along the axis are equal.
template <typename S> Var<S> shifted_mean_last(Var<S> x);

template <typename S> Var<S> concat(std::span<const Var<S>> parts, int axis);
template <typename S> Var<S> slice(Var<S> x, int axis, Index begin, Index end);
template <typename S> Var<S> pad(Var<S> x, int axis, Index before, Index after);
template <typename S> Var<S> transpose(Var<S> x);
template <typename S> Var<S> permute(Var<S> x, std::vector<int> perm);
template <typename S> Var<S> reshape(Var<S> x, Shape shape);

// (C x T) -> (C x size x chunks): overlapping segments with the given hop, the
// tail right-padded with zeros so every frame lands in a segment.
template <typename S> Var<S> chunk(Var<S> x, Index size, Index hop);
// Inverse layout of chunk(): overlap-adds segments back into (C x length).
template <typename S> Var<S> unchunk(Var<S> x, Index hop, Index length);

// x: (C x P). Position p is normalized with mean/variance over every channel
// of all positions q with keys[q] <= keys[p]. Equal keys everywhere gives
// global statistics; keys 0..P-1 gives cumulative (causal) statistics.
template <typename S>
Var<S> cumulative_normalize(Var<S> x, std::span<const Index> keys, S eps);

// Single-direction LSTM over x: (F x steps x batch) -> (H x steps x batch).
// w_ih: (4H x F), w_hh: (4H x H), bias: (4H); gate order i, f, g, o.
template <typename S>
Var<S> lstm_seq(Var<S> x, Var<S> w_ih, Var<S> w_hh, Var<S> bias,
                bool reverse);

template <typename S>
struct LstmState {
  Var<S> h;
  Var<S> c;
};

// One LSTM step composed from primitives. x: (F x B), h/c: (H x B).
template <typename S>
LstmState<S> lstm_cell(Var<S> x, LstmState<S> state, Var<S> w_ih, Var<S> w_hh,
                       Var<S> bias);

}  // namespace ad

template <typename S> Var<S> operator+(Var<S> a, Var<S> b) { return ad::add(a, b); }
template <typename S> Var<S> operator-(Var<S> a, Var<S> b) { return ad::sub(a, b); }
template <typename S> Var<S> operator*(Var<S> a, Var<S> b) { return ad::mul(a, b); }

Shape broadcast_shape(const Shape& a, const Shape& b);

}  // namespace infext
