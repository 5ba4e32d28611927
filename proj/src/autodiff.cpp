#include "infext/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace infext {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const Index da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const Index db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument("cannot broadcast " + to_string(a) +
                                  " with " + to_string(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tape

template <typename S>
Var<S> Tape<S>::variable(TensorT value, bool requires_grad) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  nodes_.push_back(std::move(node));
  return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename S>
Var<S> Tape<S>::record(TensorT value, std::span<const Var<S>> inputs,
                       Pullback pullback) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape != this) throw std::logic_error("mixing vars of different tapes");
    needs = needs || nodes_[in.id].requires_grad;
  }
  Node node;
  node.value = std::move(value);
  node.requires_grad = needs;
  if (needs) node.pullback = std::move(pullback);
  nodes_.push_back(std::move(node));
  return Var<S>{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename S>
typename Tape<S>::TensorT& Tape<S>::grad_buffer(int id) {
  Node& node = nodes_.at(id);
  if (!node.has_grad) {
    node.grad = TensorT(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename S>
typename Tape<S>::TensorT Tape<S>::grad(Var<S> v) const {
  const Node& node = nodes_.at(v.id);
  if (node.has_grad) return node.grad;
  return TensorT(node.value.shape());
}

template <typename S>
void Tape<S>::backward(Var<S> loss) {
  if (backward_done_) {
    throw std::logic_error("backward already ran on this tape");
  }
  if (loss.tape != this) throw std::logic_error("loss belongs to another tape");
  if (value(loss).size() != 1) {
    throw std::invalid_argument("backward needs a scalar loss, got shape " +
                                to_string(value(loss).shape()));
  }
  backward_done_ = true;
  grad_buffer(loss.id).vec().setOnes();
  for (int i = loss.id; i >= 0; --i) {
    Node& node = nodes_[i];
    if (!node.has_grad || !node.pullback) continue;
    node.pullback(*this, node.grad);
  }
}

template class Tape<float>;
template class Tape<double>;

namespace ad {
namespace {

template <typename S>
using TensorT = Tensor<S>;

template <typename S>
Tape<S>& tape_of(Var<S> v) {
  if (!v.valid()) throw std::invalid_argument("invalid var");
  return *v.tape;
}

template <typename S>
bool wants(Tape<S>& t, Var<S> v) {
  return v.valid() && t.requires_grad(v);
}

template <typename S, std::size_t N>
Var<S> record(Tape<S>& t, TensorT<S> value, const Var<S> (&inputs)[N],
              typename Tape<S>::Pullback pb) {
  return t.record(std::move(value), std::span<const Var<S>>(inputs, N),
                  std::move(pb));
}

std::vector<Index> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t r = out.size();
  std::vector<Index> strides(r, 0);
  Index stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t i_in = in.size() - 1 - k;
    const std::size_t i_out = r - 1 - k;
    strides[i_out] = (in[i_in] == 1 && out[i_out] != 1) ? 0 : stride;
    stride *= in[i_in];
  }
  return strides;
}

template <typename F>
void for_each_broadcast(const Shape& out, const std::vector<Index>& sa,
                        const std::vector<Index>& sb, F&& f) {
  const int r = static_cast<int>(out.size());
  if (numel(out) == 0) return;
  if (r == 0) {
    f(0, 0, 0);
    return;
  }
  const Index last = out[r - 1];
  const Index la = sa[r - 1];
  const Index lb = sb[r - 1];
  std::vector<Index> idx(r, 0);
  Index o = 0, oa = 0, ob = 0;
  while (true) {
    for (Index k = 0; k < last; ++k) f(o + k, oa + k * la, ob + k * lb);
    o += last;
    int ax = r - 2;
    while (ax >= 0) {
      ++idx[ax];
      oa += sa[ax];
      ob += sb[ax];
      if (idx[ax] < out[ax]) break;
      oa -= sa[ax] * out[ax];
      ob -= sb[ax] * out[ax];
      idx[ax] = 0;
      --ax;
    }
    if (ax < 0) break;
  }
}

struct AxisSplit {
  Index outer = 1;
  Index n = 1;
  Index inner = 1;
};

AxisSplit split_axis(const Shape& shape, int axis) {
  AxisSplit s;
  for (int i = 0; i < axis; ++i) s.outer *= shape[i];
  s.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

int norm_axis(const Shape& shape, int axis) {
  const int r = static_cast<int>(shape.size());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw std::out_of_range("axis " + std::to_string(axis) +
                            " out of range for " + to_string(shape));
  }
  return a;
}

// kind: 0 add, 1 sub, 2 mul
template <typename S>
Var<S> binary(Var<S> a, Var<S> b, int kind) {
  Tape<S>& t = tape_of(a);
  const TensorT<S>& va = t.value(a);
  const TensorT<S>& vb = t.value(b);
  if (va.shape() == vb.shape()) {
    TensorT<S> out(va.shape());
    if (kind == 0) out.vec() = va.vec() + vb.vec();
    else if (kind == 1) out.vec() = va.vec() - vb.vec();
    else out.vec() = va.vec().cwiseProduct(vb.vec());
    return record(t, std::move(out), {a, b},
                  [a, b, kind](Tape<S>& tp, const TensorT<S>& g) {
                    if (tp.requires_grad(a)) {
                      auto& ga = tp.grad_buffer(a.id).vec();
                      if (kind == 2) ga += g.vec().cwiseProduct(tp.value(b).vec());
                      else ga += g.vec();
                    }
                    if (tp.requires_grad(b)) {
                      auto& gb = tp.grad_buffer(b.id).vec();
                      if (kind == 0) gb += g.vec();
                      else if (kind == 1) gb -= g.vec();
                      else gb += g.vec().cwiseProduct(tp.value(a).vec());
                    }
                  });
  }
  Shape out_shape;
  try {
    out_shape = broadcast_shape(va.shape(), vb.shape());
  } catch (const std::invalid_argument&) {
    static const char* names[] = {"add", "sub", "mul"};
    throw std::invalid_argument(std::string(names[kind]) + ": shape mismatch " +
                                to_string(va.shape()) + " vs " +
                                to_string(vb.shape()));
  }
  const auto sa = broadcast_strides(va.shape(), out_shape);
  const auto sb = broadcast_strides(vb.shape(), out_shape);
  TensorT<S> out(out_shape);
  S* po = out.data();
  const S* pa = va.data();
  const S* pb = vb.data();
  for_each_broadcast(out_shape, sa, sb, [&](Index o, Index ia, Index ib) {
    if (kind == 0) po[o] = pa[ia] + pb[ib];
    else if (kind == 1) po[o] = pa[ia] - pb[ib];
    else po[o] = pa[ia] * pb[ib];
  });
  return record(
      t, std::move(out), {a, b},
      [a, b, kind, out_shape, sa, sb](Tape<S>& tp, const TensorT<S>& g) {
        const S* pg = g.data();
        const S* xa = tp.value(a).data();
        const S* xb = tp.value(b).data();
        if (tp.requires_grad(a)) {
          S* ga = tp.grad_buffer(a.id).data();
          for_each_broadcast(out_shape, sa, sb, [&](Index o, Index ia, Index ib) {
            ga[ia] += kind == 2 ? pg[o] * xb[ib] : pg[o];
          });
        }
        if (tp.requires_grad(b)) {
          S* gb = tp.grad_buffer(b.id).data();
          for_each_broadcast(out_shape, sa, sb, [&](Index o, Index ia, Index ib) {
            if (kind == 0) gb[ib] += pg[o];
            else if (kind == 1) gb[ib] -= pg[o];
            else gb[ib] += pg[o] * xa[ia];
          });
        }
      });
}

// Element-wise unary op; dfdx receives (x, y) and returns dy/dx.
template <typename S, typename F, typename D>
Var<S> unary(Var<S> x, F f, D dfdx) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  TensorT<S> out(vx.shape());
  const S* px = vx.data();
  S* po = out.data();
  for (Index i = 0; i < vx.size(); ++i) po[i] = f(px[i]);
  const int self = static_cast<int>(t.size());
  return record(t, std::move(out), {x},
                [x, self, dfdx](Tape<S>& tp, const TensorT<S>& g) {
                  const S* xs = tp.value(x).data();
                  const S* ys = tp.value(self).data();
                  const S* gs = g.data();
                  S* gx = tp.grad_buffer(x.id).data();
                  for (Index i = 0; i < g.size(); ++i) {
                    gx[i] += gs[i] * dfdx(xs[i], ys[i]);
                  }
                });
}

}  // namespace

template <typename S> Var<S> add(Var<S> a, Var<S> b) { return binary(a, b, 0); }
template <typename S> Var<S> sub(Var<S> a, Var<S> b) { return binary(a, b, 1); }
template <typename S> Var<S> mul(Var<S> a, Var<S> b) { return binary(a, b, 2); }

template <typename S>
Var<S> scale(Var<S> x, S factor) {
  Tape<S>& t = tape_of(x);
  TensorT<S> out(t.value(x).shape());
  out.vec() = t.value(x).vec() * factor;
  return record(t, std::move(out), {x},
                [x, factor](Tape<S>& tp, const TensorT<S>& g) {
                  tp.grad_buffer(x.id).vec() += g.vec() * factor;
                });
}

template <typename S>
Var<S> add_scalar(Var<S> x, S offset) {
  Tape<S>& t = tape_of(x);
  TensorT<S> out(t.value(x).shape());
  out.vec() = t.value(x).vec().array() + offset;
  return record(t, std::move(out), {x}, [x](Tape<S>& tp, const TensorT<S>& g) {
    tp.grad_buffer(x.id).vec() += g.vec();
  });
}

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  Tape<S>& t = tape_of(a);
  const TensorT<S>& va = t.value(a);
  const TensorT<S>& vb = t.value(b);
  if (va.rank() != 2 || vb.rank() != 2 || va.dim(1) != vb.dim(0)) {
    throw std::invalid_argument("matmul: shape mismatch " + to_string(va.shape()) +
                                " . " + to_string(vb.shape()));
  }
  TensorT<S> out({va.dim(0), vb.dim(1)});
  out.matrix().noalias() = va.matrix() * vb.matrix();
  return record(t, std::move(out), {a, b}, [a, b](Tape<S>& tp, const TensorT<S>& g) {
    if (tp.requires_grad(a)) {
      tp.grad_buffer(a.id).matrix().noalias() +=
          g.matrix() * tp.value(b).matrix().transpose();
    }
    if (tp.requires_grad(b)) {
      tp.grad_buffer(b.id).matrix().noalias() +=
          tp.value(a).matrix().transpose() * g.matrix();
    }
  });
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic>;

template <typename S>
using RowMat = typename Tensor<S>::RowMatrix;

// cols((c*K + k), t) = x(group_offset + c, t*stride + k*dilation - pad_left)
template <typename S>
void im2col(const TensorT<S>& x, Index c0, Index cin_g, Index K,
            const Conv1dOptions& o, Index t_out, RowMat<S>& cols) {
  const Index T = x.dim(1);
  cols.setZero(cin_g * K, t_out);
  for (Index c = 0; c < cin_g; ++c) {
    const S* row = x.data() + (c0 + c) * T;
    for (Index k = 0; k < K; ++k) {
      S* dst = cols.data() + (c * K + k) * t_out;
      const Index off = k * o.dilation - o.pad_left;
      for (Index tt = 0; tt < t_out; ++tt) {
        const Index src = tt * o.stride + off;
        if (src >= 0 && src < T) dst[tt] = row[src];
      }
    }
  }
}

template <typename S>
void col2im_add(const RowMat<S>& cols, Index c0, Index cin_g, Index K,
                const Conv1dOptions& o, Index t_out, TensorT<S>& dx) {
  const Index T = dx.dim(1);
  for (Index c = 0; c < cin_g; ++c) {
    S* row = dx.data() + (c0 + c) * T;
    for (Index k = 0; k < K; ++k) {
      const S* src = cols.data() + (c * K + k) * t_out;
      const Index off = k * o.dilation - o.pad_left;
      for (Index tt = 0; tt < t_out; ++tt) {
        const Index dst = tt * o.stride + off;
        if (dst >= 0 && dst < T) row[dst] += src[tt];
      }
    }
  }
}

}  // namespace

template <typename S>
Var<S> conv1d(Var<S> x, Var<S> weight, Var<S> bias, const Conv1dOptions& o) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const TensorT<S>& vw = t.value(weight);
  auto fail = [&](const std::string& why) {
    return std::invalid_argument("conv1d: " + why + " (input " +
                                 to_string(vx.shape()) + ", weight " +
                                 to_string(vw.shape()) + ")");
  };
  if (vx.rank() != 2 || vw.rank() != 3) throw fail("expects rank-2 input, rank-3 weight");
  if (o.stride < 1 || o.dilation < 1 || o.groups < 1 || o.pad_left < 0 ||
      o.pad_right < 0) {
    throw fail("invalid options");
  }
  const Index cin = vx.dim(0);
  const Index T = vx.dim(1);
  const Index cout = vw.dim(0);
  const Index K = vw.dim(2);
  const Index G = o.groups;
  if (cin % G != 0 || cout % G != 0 || vw.dim(1) != cin / G) throw fail("channel/group mismatch");
  if (bias.valid() && (t.value(bias).rank() != 1 || t.value(bias).dim(0) != cout)) {
    throw fail("bias shape " + to_string(t.value(bias).shape()));
  }
  const Index span = o.dilation * (K - 1) + 1;
  const Index padded = T + o.pad_left + o.pad_right;
  if (padded < span) throw fail("input shorter than kernel span");
  const Index t_out = (padded - span) / o.stride + 1;
  const Index cin_g = cin / G;
  const Index cout_g = cout / G;

  TensorT<S> out({cout, t_out});
  const bool depthwise = G == cin && cin == cout;
  if (depthwise) {
    for (Index c = 0; c < cin; ++c) {
      const S* xr = vx.data() + c * T;
      const S* wr = vw.data() + c * K;
      S* orow = out.data() + c * t_out;
      for (Index k = 0; k < K; ++k) {
        const Index off = k * o.dilation - o.pad_left;
        const S wk = wr[k];
        const Index lo = std::max<Index>(0, (-off + o.stride - 1) / o.stride);
        const Index hi = std::min<Index>(t_out, (T - off + o.stride - 1) / o.stride);
        for (Index tt = lo; tt < hi; ++tt) orow[tt] += wk * xr[tt * o.stride + off];
      }
    }
  } else if (K == 1 && o.stride == 1 && o.pad_left == 0 && o.pad_right == 0 && G == 1) {
    out.matrix().noalias() = vw.matrix(cout, cin) * vx.matrix();
  } else {
    RowMat<S> cols;
    for (Index g = 0; g < G; ++g) {
      im2col(vx, g * cin_g, cin_g, K, o, t_out, cols);
      out.matrix().middleRows(g * cout_g, cout_g).noalias() =
          vw.matrix(cout, cin_g * K).middleRows(g * cout_g, cout_g) * cols;
    }
  }
  if (bias.valid()) {
    out.matrix().colwise() += t.value(bias).vec();
  }

  return t.record(
      std::move(out), std::vector<Var<S>>{x, weight, bias.valid() ? bias : x},
      [x, weight, bias, o, cin, cout, K, G, T, t_out, cin_g, cout_g,
       depthwise](Tape<S>& tp, const TensorT<S>& g) {
        const TensorT<S>& vx = tp.value(x);
        const TensorT<S>& vw = tp.value(weight);
        if (bias.valid() && tp.requires_grad(bias)) {
          tp.grad_buffer(bias.id).vec() += g.matrix().rowwise().sum();
        }
        const bool gx = tp.requires_grad(x);
        const bool gw = tp.requires_grad(weight);
        if (depthwise) {
          S* dx = gx ? tp.grad_buffer(x.id).data() : nullptr;
          S* dw = gw ? tp.grad_buffer(weight.id).data() : nullptr;
          for (Index c = 0; c < cin; ++c) {
            const S* xr = vx.data() + c * T;
            const S* wr = vw.data() + c * K;
            const S* gr = g.data() + c * t_out;
            for (Index k = 0; k < K; ++k) {
              const Index off = k * o.dilation - o.pad_left;
              const Index lo = std::max<Index>(0, (-off + o.stride - 1) / o.stride);
              const Index hi = std::min<Index>(t_out, (T - off + o.stride - 1) / o.stride);
              S acc = 0;
              for (Index tt = lo; tt < hi; ++tt) {
                const Index src = tt * o.stride + off;
                if (dx) dx[c * T + src] += wr[k] * gr[tt];
                acc += gr[tt] * xr[src];
              }
              if (dw) dw[c * K + k] += acc;
            }
          }
          return;
        }
        if (K == 1 && o.stride == 1 && o.pad_left == 0 && o.pad_right == 0 && G == 1) {
          if (gw) {
            tp.grad_buffer(weight.id).matrix(cout, cin).noalias() +=
                g.matrix() * vx.matrix().transpose();
          }
          if (gx) {
            tp.grad_buffer(x.id).matrix().noalias() +=
                vw.matrix(cout, cin).transpose() * g.matrix();
          }
          return;
        }
        RowMat<S> cols;
        RowMat<S> dcols;
        for (Index gi = 0; gi < G; ++gi) {
          const auto gblock = g.matrix().middleRows(gi * cout_g, cout_g);
          if (gw) {
            im2col(vx, gi * cin_g, cin_g, K, o, t_out, cols);
            tp.grad_buffer(weight.id)
                .matrix(cout, cin_g * K)
                .middleRows(gi * cout_g, cout_g)
                .noalias() += gblock * cols.transpose();
          }
          if (gx) {
            dcols.noalias() =
                vw.matrix(cout, cin_g * K).middleRows(gi * cout_g, cout_g).transpose() *
                gblock;
            col2im_add(dcols, gi * cin_g, cin_g, K, o, t_out, tp.grad_buffer(x.id));
          }
        }
      });
}

template <typename S>
Var<S> conv_transpose1d(Var<S> x, Var<S> weight, Index stride) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const TensorT<S>& vw = t.value(weight);
  if (vx.rank() != 2 || vw.rank() != 3 || vw.dim(0) != vx.dim(0) || stride < 1) {
    throw std::invalid_argument("conv_transpose1d: shape mismatch (input " +
                                to_string(vx.shape()) + ", weight " +
                                to_string(vw.shape()) + ")");
  }
  const Index cin = vx.dim(0);
  const Index T = vx.dim(1);
  const Index cout = vw.dim(1);
  const Index K = vw.dim(2);
  const Index len = (T - 1) * stride + K;
  RowMat<S> cols = vw.matrix(cin, cout * K).transpose() * vx.matrix();
  TensorT<S> out({cout, len});
  for (Index co = 0; co < cout; ++co) {
    S* orow = out.data() + co * len;
    for (Index k = 0; k < K; ++k) {
      const S* c = cols.data() + (co * K + k) * T;
      for (Index tt = 0; tt < T; ++tt) orow[tt * stride + k] += c[tt];
    }
  }
  return record(t, std::move(out), {x, weight},
                [x, weight, stride, cin, cout, K, T, len](Tape<S>& tp,
                                                          const TensorT<S>& g) {
                  RowMat<S> dcols(cout * K, T);
                  for (Index co = 0; co < cout; ++co) {
                    const S* grow = g.data() + co * len;
                    for (Index k = 0; k < K; ++k) {
                      S* d = dcols.data() + (co * K + k) * T;
                      for (Index tt = 0; tt < T; ++tt) d[tt] = grow[tt * stride + k];
                    }
                  }
                  if (tp.requires_grad(x)) {
                    tp.grad_buffer(x.id).matrix().noalias() +=
                        tp.value(weight).matrix(cin, cout * K) * dcols;
                  }
                  if (tp.requires_grad(weight)) {
                    tp.grad_buffer(weight.id).matrix(cin, cout * K).noalias() +=
                        tp.value(x).matrix() * dcols.transpose();
                  }
                });
}

template <typename S>
Var<S> relu(Var<S> x) {
  return unary(
      x, [](S v) { return v < S(0) ? S(0) : v; },  // NaN passes through
      [](S v, S) { return v > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> prelu(Var<S> x, Var<S> slope) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const TensorT<S>& va = t.value(slope);
  const Index channels = vx.rank() > 0 ? vx.dim(0) : 1;
  if (va.size() != 1 && va.size() != channels) {
    throw std::invalid_argument("prelu: slope shape " + to_string(va.shape()) +
                                " does not fit input " + to_string(vx.shape()));
  }
  const Index per = channels > 0 ? vx.size() / channels : 0;
  const bool shared = va.size() == 1;
  TensorT<S> out(vx.shape());
  for (Index c = 0; c < channels; ++c) {
    const S a = va[shared ? 0 : c];
    for (Index i = c * per; i < (c + 1) * per; ++i) {
      out[i] = vx[i] > S(0) ? vx[i] : a * vx[i];
    }
  }
  return record(t, std::move(out), {x, slope},
                [x, slope, channels, per, shared](Tape<S>& tp, const TensorT<S>& g) {
                  const TensorT<S>& vx = tp.value(x);
                  const TensorT<S>& va = tp.value(slope);
                  S* dx = tp.requires_grad(x) ? tp.grad_buffer(x.id).data() : nullptr;
                  S* da = tp.requires_grad(slope) ? tp.grad_buffer(slope.id).data() : nullptr;
                  for (Index c = 0; c < channels; ++c) {
                    const S a = va[shared ? 0 : c];
                    S acc = 0;
                    for (Index i = c * per; i < (c + 1) * per; ++i) {
                      if (vx[i] > S(0)) {
                        if (dx) dx[i] += g[i];
                      } else {
                        if (dx) dx[i] += a * g[i];
                        acc += vx[i] * g[i];
                      }
                    }
                    if (da) da[shared ? 0 : c] += acc;
                  }
                });
}

template <typename S>
Var<S> sigmoid(Var<S> x) {
  return unary(
      x, [](S v) { return S(1) / (S(1) + std::exp(-v)); },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> tanh(Var<S> x) {
  return unary(x, [](S v) { return std::tanh(v); },
               [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> sqrt(Var<S> x) {
  return unary(x, [](S v) { return std::sqrt(v); },
               [](S, S y) { return S(0.5) / y; });
}

template <typename S>
Var<S> reciprocal(Var<S> x) {
  return unary(x, [](S v) { return S(1) / v; }, [](S, S y) { return -y * y; });
}

template <typename S>
Var<S> log(Var<S> x) {
  return unary(x, [](S v) { return std::log(v); }, [](S v, S) { return S(1) / v; });
}

template <typename S>
Var<S> square(Var<S> x) {
  return unary(x, [](S v) { return v * v; }, [](S v, S) { return S(2) * v; });
}

template <typename S>
Var<S> sum(Var<S> x) {
  Tape<S>& t = tape_of(x);
  auto out = TensorT<S>::scalar(t.value(x).vec().sum());
  return record(t, std::move(out), {x}, [x](Tape<S>& tp, const TensorT<S>& g) {
    tp.grad_buffer(x.id).vec().array() += g[0];
  });
}

template <typename S>
Var<S> mean(Var<S> x) {
  const Index n = tape_of(x).value(x).size();
  if (n == 0) throw std::invalid_argument("mean of empty tensor");
  return scale(sum(x), S(1) / S(n));
}

template <typename S>
Var<S> sum(Var<S> x, int axis) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const int ax = norm_axis(vx.shape(), axis);
  const AxisSplit sp = split_axis(vx.shape(), ax);
  Shape os = vx.shape();
  os[ax] = 1;
  TensorT<S> out(os);
  for (Index a = 0; a < sp.outer; ++a) {
    for (Index k = 0; k < sp.n; ++k) {
      const S* src = vx.data() + (a * sp.n + k) * sp.inner;
      S* dst = out.data() + a * sp.inner;
      for (Index i = 0; i < sp.inner; ++i) dst[i] += src[i];
    }
  }
  return record(t, std::move(out), {x}, [x, sp](Tape<S>& tp, const TensorT<S>& g) {
    S* dx = tp.grad_buffer(x.id).data();
    for (Index a = 0; a < sp.outer; ++a) {
      for (Index k = 0; k < sp.n; ++k) {
        S* dst = dx + (a * sp.n + k) * sp.inner;
        const S* src = g.data() + a * sp.inner;
        for (Index i = 0; i < sp.inner; ++i) dst[i] += src[i];
      }
    }
  });
}

template <typename S>
Var<S> mean(Var<S> x, int axis) {
  const TensorT<S>& vx = tape_of(x).value(x);
  const Index n = vx.dim(norm_axis(vx.shape(), axis));
  if (n == 0) throw std::invalid_argument("mean over empty axis");
  return scale(sum(x, axis), S(1) / S(n));
}

template <typename S>
Var<S> shifted_mean_last(Var<S> x) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  if (vx.rank() == 0 || vx.dim(-1) == 0) {
    throw std::invalid_argument("shifted_mean_last: empty last axis in " +
                                to_string(vx.shape()));
  }
  const Index n = vx.dim(-1);
  const Index rows = vx.size() / n;
  Shape os = vx.shape();
  os.back() = 1;
  TensorT<S> out(os);
  for (Index r = 0; r < rows; ++r) {
    const S* src = vx.data() + r * n;
    S dev = 0;
    for (Index k = 0; k < n; ++k) dev += src[k] - src[0];
    out[r] = src[0] + dev / S(n);
  }
  return record(t, std::move(out), {x}, [x, n, rows](Tape<S>& tp, const TensorT<S>& g) {
    S* dx = tp.grad_buffer(x.id).data();
    for (Index r = 0; r < rows; ++r) {
      const S share = g[r] / S(n);
      for (Index k = 0; k < n; ++k) dx[r * n + k] += share;
    }
  });
}

template <typename S>
Var<S> concat(std::span<const Var<S>> parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat of nothing");
  Tape<S>& t = tape_of(parts[0]);
  const Shape& ref = t.value(parts[0]).shape();
  const int ax = norm_axis(ref, axis);
  Shape os = ref;
  os[ax] = 0;
  std::vector<Index> sizes;
  for (const auto& p : parts) {
    const Shape& s = t.value(p).shape();
    bool ok = s.size() == ref.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) {
      if (static_cast<int>(i) != ax && s[i] != ref[i]) ok = false;
    }
    if (!ok) {
      throw std::invalid_argument("concat: shape mismatch " + to_string(ref) +
                                  " vs " + to_string(s));
    }
    sizes.push_back(s[ax]);
    os[ax] += s[ax];
  }
  const AxisSplit sp = split_axis(os, ax);
  TensorT<S> out(os);
  Index offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const TensorT<S>& v = t.value(parts[pi]);
    const Index chunk = sizes[pi] * sp.inner;
    for (Index a = 0; a < sp.outer; ++a) {
      std::copy_n(v.data() + a * chunk, chunk,
                  out.data() + a * sp.n * sp.inner + offset * sp.inner);
    }
    offset += sizes[pi];
  }
  std::vector<Var<S>> inputs(parts.begin(), parts.end());
  return t.record(std::move(out), inputs,
                  [inputs, sizes, sp](Tape<S>& tp, const TensorT<S>& g) {
                    Index offset = 0;
                    for (std::size_t pi = 0; pi < inputs.size(); ++pi) {
                      const Index chunk = sizes[pi] * sp.inner;
                      if (tp.requires_grad(inputs[pi])) {
                        S* dx = tp.grad_buffer(inputs[pi].id).data();
                        for (Index a = 0; a < sp.outer; ++a) {
                          const S* src = g.data() + a * sp.n * sp.inner + offset * sp.inner;
                          for (Index i = 0; i < chunk; ++i) dx[a * chunk + i] += src[i];
                        }
                      }
                      offset += sizes[pi];
                    }
                  });
}

template <typename S>
Var<S> slice(Var<S> x, int axis, Index begin, Index end) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const int ax = norm_axis(vx.shape(), axis);
  if (begin < 0 || end < begin || end > vx.dim(ax)) {
    throw std::out_of_range("slice [" + std::to_string(begin) + ", " +
                            std::to_string(end) + ") out of range for " +
                            to_string(vx.shape()));
  }
  const AxisSplit sp = split_axis(vx.shape(), ax);
  Shape os = vx.shape();
  os[ax] = end - begin;
  TensorT<S> out(os);
  const Index chunk = (end - begin) * sp.inner;
  for (Index a = 0; a < sp.outer; ++a) {
    std::copy_n(vx.data() + (a * sp.n + begin) * sp.inner, chunk, out.data() + a * chunk);
  }
  return record(t, std::move(out), {x},
                [x, sp, begin, chunk](Tape<S>& tp, const TensorT<S>& g) {
                  S* dx = tp.grad_buffer(x.id).data();
                  for (Index a = 0; a < sp.outer; ++a) {
                    S* dst = dx + (a * sp.n + begin) * sp.inner;
                    const S* src = g.data() + a * chunk;
                    for (Index i = 0; i < chunk; ++i) dst[i] += src[i];
                  }
                });
}

template <typename S>
Var<S> pad(Var<S> x, int axis, Index before, Index after) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const int ax = norm_axis(vx.shape(), axis);
  if (before < 0 || after < 0) throw std::invalid_argument("pad: negative amount");
  const AxisSplit sp = split_axis(vx.shape(), ax);
  Shape os = vx.shape();
  os[ax] += before + after;
  const Index n_out = os[ax];
  TensorT<S> out(os);
  const Index chunk = sp.n * sp.inner;
  for (Index a = 0; a < sp.outer; ++a) {
    std::copy_n(vx.data() + a * chunk, chunk,
                out.data() + (a * n_out + before) * sp.inner);
  }
  return record(t, std::move(out), {x},
                [x, sp, before, n_out, chunk](Tape<S>& tp, const TensorT<S>& g) {
                  S* dx = tp.grad_buffer(x.id).data();
                  for (Index a = 0; a < sp.outer; ++a) {
                    const S* src = g.data() + (a * n_out + before) * sp.inner;
                    for (Index i = 0; i < chunk; ++i) dx[a * chunk + i] += src[i];
                  }
                });
}

template <typename S>
Var<S> transpose(Var<S> x) {
  if (tape_of(x).value(x).rank() != 2) {
    throw std::invalid_argument("transpose needs rank 2, got " +
                                to_string(tape_of(x).value(x).shape()));
  }
  return permute(x, {1, 0});
}

template <typename S>
Var<S> permute(Var<S> x, std::vector<int> perm) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const int r = vx.rank();
  std::vector<int> check = perm;
  std::sort(check.begin(), check.end());
  bool ok = static_cast<int>(perm.size()) == r;
  for (int i = 0; ok && i < r; ++i) ok = check[i] == i;
  if (!ok) throw std::invalid_argument("permute: invalid permutation for " + to_string(vx.shape()));
  Shape os(r);
  std::vector<Index> in_strides(r, 1);
  for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * vx.shape()[i + 1];
  std::vector<Index> src_strides(r);
  for (int i = 0; i < r; ++i) {
    os[i] = vx.shape()[perm[i]];
    src_strides[i] = in_strides[perm[i]];
  }
  const std::vector<Index> zero(r, 0);
  TensorT<S> out(os);
  const S* px = vx.data();
  S* po = out.data();
  if (r == 0) {
    po[0] = px[0];
  } else {
    for_each_broadcast(os, src_strides, zero,
                       [&](Index o, Index i, Index) { po[o] = px[i]; });
  }
  return record(t, std::move(out), {x},
                [x, os, src_strides, zero](Tape<S>& tp, const TensorT<S>& g) {
                  S* dx = tp.grad_buffer(x.id).data();
                  const S* pg = g.data();
                  if (os.empty()) {
                    dx[0] += pg[0];
                    return;
                  }
                  for_each_broadcast(os, src_strides, zero,
                                     [&](Index o, Index i, Index) { dx[i] += pg[o]; });
                });
}

template <typename S>
Var<S> reshape(Var<S> x, Shape shape) {
  Tape<S>& t = tape_of(x);
  TensorT<S> out = t.value(x).reshaped(std::move(shape));
  return record(t, std::move(out), {x}, [x](Tape<S>& tp, const TensorT<S>& g) {
    tp.grad_buffer(x.id).vec() += g.vec();
  });
}

template <typename S>
Var<S> chunk(Var<S> x, Index size, Index hop) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  if (vx.rank() != 2 || size < 1 || hop < 1 || hop > size) {
    throw std::invalid_argument("chunk: bad arguments for " + to_string(vx.shape()));
  }
  const Index C = vx.dim(0);
  const Index T = vx.dim(1);
  const Index n = T <= size ? 1 : (T - size + hop - 1) / hop + 1;
  TensorT<S> out({C, size, n});
  for (Index c = 0; c < C; ++c) {
    for (Index k = 0; k < size; ++k) {
      for (Index s = 0; s < n; ++s) {
        const Index src = s * hop + k;
        if (src < T) out[(c * size + k) * n + s] = vx[c * T + src];
      }
    }
  }
  return record(t, std::move(out), {x},
                [x, C, T, size, hop, n](Tape<S>& tp, const TensorT<S>& g) {
                  S* dx = tp.grad_buffer(x.id).data();
                  for (Index c = 0; c < C; ++c) {
                    for (Index k = 0; k < size; ++k) {
                      for (Index s = 0; s < n; ++s) {
                        const Index src = s * hop + k;
                        if (src < T) dx[c * T + src] += g[(c * size + k) * n + s];
                      }
                    }
                  }
                });
}

template <typename S>
Var<S> unchunk(Var<S> x, Index hop, Index length) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  if (vx.rank() != 3 || hop < 1 || length < 0) {
    throw std::invalid_argument("unchunk: bad arguments for " + to_string(vx.shape()));
  }
  const Index C = vx.dim(0);
  const Index size = vx.dim(1);
  const Index n = vx.dim(2);
  TensorT<S> out({C, length});
  for (Index c = 0; c < C; ++c) {
    for (Index k = 0; k < size; ++k) {
      for (Index s = 0; s < n; ++s) {
        const Index dst = s * hop + k;
        if (dst < length) out[c * length + dst] += vx[(c * size + k) * n + s];
      }
    }
  }
  return record(t, std::move(out), {x},
                [x, C, size, n, hop, length](Tape<S>& tp, const TensorT<S>& g) {
                  S* dx = tp.grad_buffer(x.id).data();
                  for (Index c = 0; c < C; ++c) {
                    for (Index k = 0; k < size; ++k) {
                      for (Index s = 0; s < n; ++s) {
                        const Index dst = s * hop + k;
                        if (dst < length) dx[(c * size + k) * n + s] += g[c * length + dst];
                      }
                    }
                  }
                });
}

template <typename S>
Var<S> cumulative_normalize(Var<S> x, std::span<const Index> keys, S eps) {
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  if (vx.rank() != 2 || static_cast<Index>(keys.size()) != vx.dim(1) || vx.dim(1) == 0) {
    throw std::invalid_argument("cumulative_normalize: input " + to_string(vx.shape()) +
                                " with " + std::to_string(keys.size()) + " keys");
  }
  const Index C = vx.dim(0);
  const Index P = vx.dim(1);
  // Positions sorted by key, grouped by equal key.
  std::vector<Index> order(P);
  std::iota(order.begin(), order.end(), Index(0));
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return keys[a] < keys[b]; });
  std::vector<Index> group_of(P);
  std::vector<Index> group_begin;
  for (Index i = 0; i < P; ++i) {
    if (i == 0 || keys[order[i]] != keys[order[i - 1]]) group_begin.push_back(i);
    group_of[order[i]] = static_cast<Index>(group_begin.size()) - 1;
  }
  const Index G = static_cast<Index>(group_begin.size());
  group_begin.push_back(P);

  auto col_sums = [&](Index p, double& s1, double& s2) {
    for (Index c = 0; c < C; ++c) {
      const double v = vx[c * P + p];
      s1 += v;
      s2 += v * v;
    }
  };
  std::vector<double> mu(G), inv(G), count(G);
  double s1 = 0, s2 = 0, n = 0;
  for (Index gi = 0; gi < G; ++gi) {
    for (Index i = group_begin[gi]; i < group_begin[gi + 1]; ++i) {
      col_sums(order[i], s1, s2);
      n += static_cast<double>(C);
    }
    mu[gi] = s1 / n;
    const double var = std::max(0.0, s2 / n - mu[gi] * mu[gi]);
    inv[gi] = 1.0 / std::sqrt(var + static_cast<double>(eps));
    count[gi] = n;
  }
  TensorT<S> out(vx.shape());
  for (Index c = 0; c < C; ++c) {
    for (Index p = 0; p < P; ++p) {
      const Index gi = group_of[p];
      out[c * P + p] = static_cast<S>((vx[c * P + p] - mu[gi]) * inv[gi]);
    }
  }
  return record(
      t, std::move(out), {x},
      [x, C, P, G, order, group_of, group_begin, mu, inv, count](Tape<S>& tp,
                                                                 const TensorT<S>& g) {
        const TensorT<S>& vx = tp.value(x);
        std::vector<double> d1(G), d2(G);
        for (Index gi = 0; gi < G; ++gi) {
          double a = 0, b = 0;
          for (Index i = group_begin[gi]; i < group_begin[gi + 1]; ++i) {
            const Index p = order[i];
            for (Index c = 0; c < C; ++c) {
              const double gv = g[c * P + p];
              a += gv;
              b += gv * (vx[c * P + p] - mu[gi]);
            }
          }
          const double dmu = -inv[gi] * a;
          const double dvar = -0.5 * inv[gi] * inv[gi] * inv[gi] * b;
          d1[gi] = dmu / count[gi] - 2.0 * mu[gi] * dvar / count[gi];
          d2[gi] = dvar / count[gi];
        }
        // Suffix sums: an input at group h feeds the statistics of groups >= h.
        for (Index gi = G - 2; gi >= 0; --gi) {
          d1[gi] += d1[gi + 1];
          d2[gi] += d2[gi + 1];
        }
        S* dx = tp.grad_buffer(x.id).data();
        for (Index c = 0; c < C; ++c) {
          for (Index p = 0; p < P; ++p) {
            const Index gi = group_of[p];
            const double v = vx[c * P + p];
            dx[c * P + p] += static_cast<S>(g[c * P + p] * inv[gi] + d1[gi] + 2.0 * v * d2[gi]);
          }
        }
      });
}

namespace {

template <typename S>
struct LstmCache {
  using M = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  M gates;   // (4H x steps*B) post-activation i, f, g, o
  M cell;    // (H x steps*B)
  M tanh_c;  // (H x steps*B)
  M h_prev;  // (H x steps*B)
};

}  // namespace

template <typename S>
Var<S> lstm_seq(Var<S> x, Var<S> w_ih, Var<S> w_hh, Var<S> bias, bool reverse) {
  using M = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  Tape<S>& t = tape_of(x);
  const TensorT<S>& vx = t.value(x);
  const TensorT<S>& wi = t.value(w_ih);
  const TensorT<S>& wh = t.value(w_hh);
  const TensorT<S>& vb = t.value(bias);
  if (vx.rank() != 3 || wi.rank() != 2 || wh.rank() != 2 || vb.rank() != 1) {
    throw std::invalid_argument("lstm_seq: rank mismatch (input " + to_string(vx.shape()) +
                                ")");
  }
  const Index F = vx.dim(0);
  const Index steps = vx.dim(1);
  const Index B = vx.dim(2);
  const Index H = wh.dim(1);
  if (wi.dim(0) != 4 * H || wi.dim(1) != F || wh.dim(0) != 4 * H || vb.dim(0) != 4 * H) {
    throw std::invalid_argument("lstm_seq: parameter shapes w_ih " + to_string(wi.shape()) +
                                ", w_hh " + to_string(wh.shape()) + ", bias " +
                                to_string(vb.shape()) + " do not fit input " +
                                to_string(vx.shape()));
  }
  auto cache = std::make_shared<LstmCache<S>>();
  M zin = wi.matrix() * vx.matrix(F, steps * B);
  zin.colwise() += vb.vec();
  cache->gates.resize(4 * H, steps * B);
  cache->cell.resize(H, steps * B);
  cache->tanh_c.resize(H, steps * B);
  cache->h_prev.resize(H, steps * B);
  TensorT<S> out({H, steps, B});
  auto out_m = out.matrix(H, steps * B);
  M h = M::Zero(H, B);
  M c = M::Zero(H, B);
  M z(4 * H, B);
  for (Index i = 0; i < steps; ++i) {
    const Index s = reverse ? steps - 1 - i : i;
    const Index col = s * B;
    cache->h_prev.middleCols(col, B) = h;
    z.noalias() = wh.matrix() * h;
    z += zin.middleCols(col, B);
    auto gi = z.topRows(H).array();
    z.topRows(H) = (S(1) + (-gi).exp()).inverse().matrix();
    auto gf = z.middleRows(H, H).array();
    z.middleRows(H, H) = (S(1) + (-gf).exp()).inverse().matrix();
    z.middleRows(2 * H, H) = z.middleRows(2 * H, H).array().tanh().matrix();
    auto go = z.bottomRows(H).array();
    z.bottomRows(H) = (S(1) + (-go).exp()).inverse().matrix();
    c = z.middleRows(H, H).cwiseProduct(c) + z.topRows(H).cwiseProduct(z.middleRows(2 * H, H));
    cache->cell.middleCols(col, B) = c;
    cache->tanh_c.middleCols(col, B) = c.array().tanh().matrix();
    h = z.bottomRows(H).cwiseProduct(cache->tanh_c.middleCols(col, B));
    cache->gates.middleCols(col, B) = z;
    out_m.middleCols(col, B) = h;
  }
  return record(
      t, std::move(out), {x, w_ih, w_hh, bias},
      [x, w_ih, w_hh, bias, cache, F, steps, B, H, reverse](Tape<S>& tp,
                                                             const TensorT<S>& g) {
        const auto gm = g.matrix(H, steps * B);
        const auto whm = tp.value(w_hh).matrix();
        M dz_all(4 * H, steps * B);
        M dh_next = M::Zero(H, B);
        M dc_next = M::Zero(H, B);
        M dz(4 * H, B);
        for (Index i = steps - 1; i >= 0; --i) {
          const Index s = reverse ? steps - 1 - i : i;
          const Index col = s * B;
          const auto gates = cache->gates.middleCols(col, B);
          const auto ig = gates.topRows(H).array();
          const auto fg = gates.middleRows(H, H).array();
          const auto gg = gates.middleRows(2 * H, H).array();
          const auto og = gates.bottomRows(H).array();
          const auto tc = cache->tanh_c.middleCols(col, B).array();
          // c_prev is the cell of the previously processed step.
          M c_prev = M::Zero(H, B);
          if (i > 0) {
            const Index sp = reverse ? steps - i : i - 1;
            c_prev = cache->cell.middleCols(sp * B, B);
          }
          const M dh = gm.middleCols(col, B) + dh_next;
          const M dc = dc_next.array() + dh.array() * og * (S(1) - tc * tc);
          dz.topRows(H) = (dc.array() * gg * ig * (S(1) - ig)).matrix();
          dz.middleRows(H, H) = (dc.array() * c_prev.array() * fg * (S(1) - fg)).matrix();
          dz.middleRows(2 * H, H) = (dc.array() * ig * (S(1) - gg * gg)).matrix();
          dz.bottomRows(H) = (dh.array() * tc * og * (S(1) - og)).matrix();
          dc_next = (dc.array() * fg).matrix();
          dh_next.noalias() = whm.transpose() * dz;
          dz_all.middleCols(col, B) = dz;
        }
        if (tp.requires_grad(w_ih)) {
          tp.grad_buffer(w_ih.id).matrix().noalias() +=
              dz_all * tp.value(x).matrix(F, steps * B).transpose();
        }
        if (tp.requires_grad(w_hh)) {
          tp.grad_buffer(w_hh.id).matrix().noalias() += dz_all * cache->h_prev.transpose();
        }
        if (tp.requires_grad(bias)) {
          tp.grad_buffer(bias.id).vec() += dz_all.rowwise().sum();
        }
        if (tp.requires_grad(x)) {
          tp.grad_buffer(x.id).matrix(F, steps * B).noalias() +=
              tp.value(w_ih).matrix().transpose() * dz_all;
        }
      });
}

template <typename S>
LstmState<S> lstm_cell(Var<S> x, LstmState<S> state, Var<S> w_ih, Var<S> w_hh,
                       Var<S> bias) {
  const Index hidden = state.h.dim(0);
  if (w_ih.dim(0) != 4 * hidden || w_hh.dim(0) != 4 * hidden ||
      w_hh.dim(1) != hidden || bias.size() != 4 * hidden) {
    throw std::invalid_argument("lstm_cell: parameter shapes do not match hidden size " +
                                std::to_string(hidden));
  }
  Var<S> z = add(add(matmul(w_ih, x), matmul(w_hh, state.h)),
                 reshape(bias, Shape{4 * hidden, 1}));
  Var<S> i = sigmoid(slice(z, 0, 0, hidden));
  Var<S> f = sigmoid(slice(z, 0, hidden, 2 * hidden));
  Var<S> g = tanh(slice(z, 0, 2 * hidden, 3 * hidden));
  Var<S> o = sigmoid(slice(z, 0, 3 * hidden, 4 * hidden));
  Var<S> c = add(mul(f, state.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

#define INFEXT_INSTANTIATE(S)                                                   \
  template Var<S> add(Var<S>, Var<S>);                                          \
  template Var<S> sub(Var<S>, Var<S>);                                          \
  template Var<S> mul(Var<S>, Var<S>);                                          \
  template Var<S> scale(Var<S>, S);                                             \
  template Var<S> add_scalar(Var<S>, S);                                        \
  template Var<S> matmul(Var<S>, Var<S>);                                       \
  template Var<S> conv1d(Var<S>, Var<S>, Var<S>, const Conv1dOptions&);         \
  template Var<S> conv_transpose1d(Var<S>, Var<S>, Index);                      \
  template Var<S> relu(Var<S>);                                                 \
  template Var<S> prelu(Var<S>, Var<S>);                                        \
  template Var<S> sigmoid(Var<S>);                                              \
  template Var<S> tanh(Var<S>);                                                 \
  template Var<S> sqrt(Var<S>);                                                 \
  template Var<S> reciprocal(Var<S>);                                           \
  template Var<S> log(Var<S>);                                                  \
  template Var<S> square(Var<S>);                                               \
  template Var<S> sum(Var<S>);                                                  \
  template Var<S> sum(Var<S>, int);                                             \
  template Var<S> mean(Var<S>);                                                 \
  template Var<S> mean(Var<S>, int);                                            \
  template Var<S> shifted_mean_last(Var<S>);                                    \
  template Var<S> concat(std::span<const Var<S>>, int);                         \
  template Var<S> slice(Var<S>, int, Index, Index);                             \
  template Var<S> pad(Var<S>, int, Index, Index);                               \
  template Var<S> transpose(Var<S>);                                            \
  template Var<S> permute(Var<S>, std::vector<int>);                            \
  template Var<S> reshape(Var<S>, Shape);                                       \
  template Var<S> chunk(Var<S>, Index, Index);                                  \
  template Var<S> unchunk(Var<S>, Index, Index);                                \
  template Var<S> cumulative_normalize(Var<S>, std::span<const Index>, S);      \
  template Var<S> lstm_seq(Var<S>, Var<S>, Var<S>, Var<S>, bool);                \
  template LstmState<S> lstm_cell(Var<S>, LstmState<S>, Var<S>, Var<S>, Var<S>);

INFEXT_INSTANTIATE(float)
INFEXT_INSTANTIATE(double)

#undef INFEXT_INSTANTIATE

}  // namespace ad
}  // namespace infext
