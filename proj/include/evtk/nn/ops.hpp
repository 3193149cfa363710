// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations. Each op computes its forward value eagerly and
// records a backward closure through make_result().
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "evtk/core/rng.hpp"
#include "evtk/nn/autograd.hpp"

namespace evtk::nn {

namespace detail {

inline void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

inline void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.value().rank() != rank)
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " + shape_str(a.shape()));
}

template <typename F, typename D>
Var unary(const Var& x, F f, D df) {
  Tensor y(x.shape());
  const auto xs = x.value().data();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(xs[i]);
  return make_result(std::move(y), {x}, [df](Node& n) {
    Tensor* gx = input_grad(n, 0);
    if (!gx) return;
    const auto& xv = n.inputs[0]->value;
    for (std::size_t i = 0; i < n.value.size(); ++i) (*gx)[i] += n.grad[i] * df(xv[i], n.value[i]);
  });
}

} // namespace detail

inline Var add(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& n) {
    for (std::size_t k = 0; k < 2; ++k)
      if (Tensor* g = input_grad(n, k))
        for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
    if (Tensor* g = input_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] -= n.grad[i];
  });
}

/// Elementwise (Hadamard) product.
inline Var mul(const Var& a, const Var& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= b.value()[i];
  return make_result(std::move(y), {a, b}, [](Node& n) {
    const auto& av = n.inputs[0]->value;
    const auto& bv = n.inputs[1]->value;
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * bv[i];
    if (Tensor* g = input_grad(n, 1))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * av[i];
  });
}

inline Var scale(const Var& a, double c) {
  Tensor y = a.value();
  for (double& v : y.data()) v *= c;
  return make_result(std::move(y), {a}, [c](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += c * n.grad[i];
  });
}

/// 1 - x
inline Var one_minus(const Var& x) {
  return detail::unary(x, [](double v) { return 1.0 - v; }, [](double, double) { return -1.0; });
}

inline Var sigmoid(const Var& x) {
  return detail::unary(
      x, [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Var tanh(const Var& x) {
  return detail::unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

inline Var exp(const Var& x) {
  return detail::unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

inline Var relu(const Var& x) {
  return detail::unary(x, [](double v) { return v > 0.0 ? v : 0.0; },
                       [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Var sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return make_result(Tensor({1}, s), {x}, [](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (double& v : g->data()) v += n.grad[0];
  });
}

/// Sum of absolute values. The subgradient at 0 is taken as 0.
inline Var abs_sum(const Var& x) {
  double s = 0.0;
  for (double v : x.value().data()) s += std::abs(v);
  return make_result(Tensor({1}, s), {x}, [](Node& n) {
    Tensor* g = input_grad(n, 0);
    if (!g) return;
    const auto& xv = n.inputs[0]->value;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const double sgn = xv[i] > 0.0 ? 1.0 : (xv[i] < 0.0 ? -1.0 : 0.0);
      (*g)[i] += n.grad[0] * sgn;
    }
  });
}

inline Var reshape(const Var& x, Shape shape) {
  return make_result(x.value().reshaped(std::move(shape)), {x}, [](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i];
  });
}

/// y = x W^T + b over the last dimension of x. W is [out, in]; b may be
/// undefined.
inline Var linear(const Var& x, const Var& W, const Var& b = {}) {
  detail::require_rank(W, 2, "linear");
  const std::size_t in = W.dim(0) == 0 ? 0 : W.dim(1), out = W.dim(0);
  if (x.value().rank() < 1 || x.shape().back() != in)
    throw ShapeError("linear: input " + shape_str(x.shape()) + " does not match weight " + shape_str(W.shape()));
  if (b.defined() && b.shape() != Shape{out})
    throw ShapeError("linear: bias " + shape_str(b.shape()) + " does not match " + std::to_string(out) + " outputs");
  const std::size_t rows = x.size() / in;
  Shape ys = x.shape();
  ys.back() = out;
  Tensor y(ys);
  const double* xp = x.value().ptr();
  const double* wp = W.value().ptr();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < out; ++o) {
      double acc = b.defined() ? b.value()[o] : 0.0;
      const double* xr = xp + r * in;
      const double* wr = wp + o * in;
      for (std::size_t k = 0; k < in; ++k) acc += xr[k] * wr[k];
      y[r * out + o] = acc;
    }
  return make_result(std::move(y), {x, W, b}, [rows, in, out](Node& n) {
    const double* g = n.grad.ptr();
    const double* xp = n.inputs[0]->value.ptr();
    const double* wp = n.inputs[1]->value.ptr();
    if (Tensor* gx = input_grad(n, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[r * out + o];
          double* gxr = gx->ptr() + r * in;
          const double* wr = wp + o * in;
          for (std::size_t k = 0; k < in; ++k) gxr[k] += go * wr[k];
        }
    if (Tensor* gw = input_grad(n, 1))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out; ++o) {
          const double go = g[r * out + o];
          double* gwr = gw->ptr() + o * in;
          const double* xr = xp + r * in;
          for (std::size_t k = 0; k < in; ++k) gwr[k] += go * xr[k];
        }
    if (n.inputs.size() > 2)
      if (Tensor* gb = input_grad(n, 2))
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t o = 0; o < out; ++o) (*gb)[o] += g[r * out + o];
  });
}

/// Concatenation along the last dimension.
inline Var concat_last(const Var& a, const Var& b) {
  if (a.value().rank() != b.value().rank() || a.value().rank() == 0)
    throw ShapeError("concat_last: rank mismatch");
  const std::size_t pa = a.shape().back(), pb = b.shape().back();
  const std::size_t rows = pa ? a.size() / pa : b.size() / pb;
  Shape ys = a.shape();
  ys.back() = pa + pb;
  Tensor y(ys);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.value().ptr() + r * pa, pa, y.ptr() + r * (pa + pb));
    std::copy_n(b.value().ptr() + r * pb, pb, y.ptr() + r * (pa + pb) + pa);
  }
  return make_result(std::move(y), {a, b}, [rows, pa, pb](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < pa; ++k) (*g)[r * pa + k] += n.grad[r * (pa + pb) + k];
    if (Tensor* g = input_grad(n, 1))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < pb; ++k) (*g)[r * pb + k] += n.grad[r * (pa + pb) + pa + k];
  });
}

/// Columns [begin, begin + len) of the last dimension.
inline Var slice_last(const Var& x, std::size_t begin, std::size_t len) {
  const std::size_t p = x.shape().back();
  if (begin + len > p) throw ShapeError("slice_last: range exceeds dimension");
  const std::size_t rows = x.size() / p;
  Shape ys = x.shape();
  ys.back() = len;
  Tensor y(ys);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.value().ptr() + r * p + begin, len, y.ptr() + r * len);
  return make_result(std::move(y), {x}, [rows, p, begin, len](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t k = 0; k < len; ++k) (*g)[r * p + begin + k] += n.grad[r * len + k];
  });
}

/// Step t of a [B, T, F] sequence as [B, F].
inline Var time_step(const Var& x, std::size_t t) {
  detail::require_rank(x, 3, "time_step");
  const std::size_t B = x.dim(0), T = x.dim(1), F = x.dim(2);
  if (t >= T) throw ShapeError("time_step: index out of range");
  Tensor y({B, F});
  for (std::size_t b = 0; b < B; ++b) std::copy_n(x.value().ptr() + (b * T + t) * F, F, y.ptr() + b * F);
  return make_result(std::move(y), {x}, [B, T, F, t](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t k = 0; k < F; ++k) (*g)[(b * T + t) * F + k] += n.grad[b * F + k];
  });
}

/// Stacks T tensors of shape [B, F] into [B, T, F].
inline Var stack_time(const std::vector<Var>& steps) {
  if (steps.empty()) throw ShapeError("stack_time: no steps");
  const std::size_t B = steps[0].dim(0), F = steps[0].dim(1), T = steps.size();
  for (const auto& s : steps)
    if (s.shape() != Shape{B, F}) throw ShapeError("stack_time: inconsistent step shapes");
  Tensor y({B, T, F});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t b = 0; b < B; ++b) std::copy_n(steps[t].value().ptr() + b * F, F, y.ptr() + (b * T + t) * F);
  return make_result(std::move(y), steps, [B, T, F](Node& n) {
    for (std::size_t t = 0; t < T; ++t)
      if (Tensor* g = input_grad(n, t))
        for (std::size_t b = 0; b < B; ++b)
          for (std::size_t k = 0; k < F; ++k) (*g)[b * F + k] += n.grad[(b * T + t) * F + k];
  });
}

/// Inverted dropout: zeroes each element with probability p and scales the
/// survivors by 1 / (1 - p). Identity when p == 0.
inline Var dropout(const Var& x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be below 1");
  Tensor mask(x.shape());
  const double keep_scale = 1.0 / (1.0 - p);
  for (double& m : mask.data()) m = rng.uniform() >= p ? keep_scale : 0.0;
  Tensor y = x.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= mask[i];
  return make_result(std::move(y), {x}, [mask = std::move(mask)](Node& n) {
    if (Tensor* g = input_grad(n, 0))
      for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[i] += n.grad[i] * mask[i];
  });
}

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
  if (in + 2 * pad < k) throw ShapeError("conv2d: kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

/// 2-D cross-correlation. x is [N, C, H, W], w is [O, C / groups, KH, KW],
/// b is [O] or undefined. groups == C == O gives a depthwise convolution.
inline Var conv2d(const Var& x, const Var& w, const Var& b, Conv2dOptions opt = {}) {
  detail::require_rank(x, 4, "conv2d input");
  detail::require_rank(w, 4, "conv2d weight");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const std::size_t O = w.dim(0), Cg = w.dim(1), KH = w.dim(2), KW = w.dim(3);
  const std::size_t G = opt.groups, S = opt.stride, P = opt.padding;
  if (G == 0 || S == 0) throw ShapeError("conv2d: groups and stride must be positive");
  if (C % G != 0 || O % G != 0 || C / G != Cg)
    throw ShapeError("conv2d: input channels " + std::to_string(C) + " / groups " + std::to_string(G) +
                     " do not match weight " + shape_str(w.shape()));
  if (b.defined() && b.shape() != Shape{O}) throw ShapeError("conv2d: bias does not match output channels");
  const std::size_t OH = conv_out_extent(H, KH, S, P), OW = conv_out_extent(W, KW, S, P);
  const std::size_t Og = O / G;

  // Valid output-column range for kernel column kw (input column in bounds).
  auto ow_range = [=](std::size_t kw) {
    const long lo_num = static_cast<long>(P) - static_cast<long>(kw);
    const long lo = lo_num <= 0 ? 0 : (lo_num + static_cast<long>(S) - 1) / static_cast<long>(S);
    const long hi_num = static_cast<long>(W) - 1 + static_cast<long>(P) - static_cast<long>(kw);
    const long hi = hi_num < 0 ? -1 : std::min<long>(hi_num / static_cast<long>(S), static_cast<long>(OW) - 1);
    return std::pair<long, long>{lo, hi};
  };

  Tensor y({N, O, OH, OW});
  const double* xp = x.value().ptr();
  const double* wp = w.value().ptr();
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t o = 0; o < O; ++o) {
      double* yp = y.ptr() + (n * O + o) * OH * OW;
      if (b.defined()) std::fill_n(yp, OH * OW, b.value()[o]);
      const std::size_t g = o / Og;
      for (std::size_t ci = 0; ci < Cg; ++ci) {
        const double* xc = xp + (n * C + g * Cg + ci) * H * W;
        for (std::size_t kh = 0; kh < KH; ++kh)
          for (std::size_t kw = 0; kw < KW; ++kw) {
            const double wv = wp[((o * Cg + ci) * KH + kh) * KW + kw];
            const auto [lo, hi] = ow_range(kw);
            for (std::size_t oh = 0; oh < OH; ++oh) {
              const long ih = static_cast<long>(oh * S + kh) - static_cast<long>(P);
              if (ih < 0 || ih >= static_cast<long>(H)) continue;
              const double* xr = xc + ih * W;
              double* yr = yp + oh * OW;
              for (long ow = lo; ow <= hi; ++ow) yr[ow] += wv * xr[ow * S + kw - P];
            }
          }
      }
    }

  return make_result(std::move(y), {x, w, b}, [=](Node& nd) {
    Tensor* gx = input_grad(nd, 0);
    Tensor* gw = input_grad(nd, 1);
    Tensor* gb = nd.inputs.size() > 2 ? input_grad(nd, 2) : nullptr;
    const double* xp = nd.inputs[0]->value.ptr();
    const double* wp = nd.inputs[1]->value.ptr();
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t o = 0; o < O; ++o) {
        const double* gy = nd.grad.ptr() + (n * O + o) * OH * OW;
        if (gb) {
          double s = 0.0;
          for (std::size_t i = 0; i < OH * OW; ++i) s += gy[i];
          (*gb)[o] += s;
        }
        const std::size_t g = o / Og;
        for (std::size_t ci = 0; ci < Cg; ++ci) {
          const std::size_t c = g * Cg + ci;
          const double* xc = xp + (n * C + c) * H * W;
          for (std::size_t kh = 0; kh < KH; ++kh)
            for (std::size_t kw = 0; kw < KW; ++kw) {
              const std::size_t widx = ((o * Cg + ci) * KH + kh) * KW + kw;
              const double wv = wp[widx];
              const auto [lo, hi] = ow_range(kw);
              double gwacc = 0.0;
              for (std::size_t oh = 0; oh < OH; ++oh) {
                const long ih = static_cast<long>(oh * S + kh) - static_cast<long>(P);
                if (ih < 0 || ih >= static_cast<long>(H)) continue;
                const double* xr = xc + ih * W;
                const double* gr = gy + oh * OW;
                if (gx) {
                  double* gxr = gx->ptr() + (n * C + c) * H * W + ih * W;
                  for (long ow = lo; ow <= hi; ++ow) gxr[ow * S + kw - P] += wv * gr[ow];
                }
                if (gw)
                  for (long ow = lo; ow <= hi; ++ow) gwacc += gr[ow] * xr[ow * S + kw - P];
              }
              if (gw) (*gw)[widx] += gwacc;
            }
        }
      }
  });
}

/// Causal temporal convolution over a [B, T, C, H, W] sequence with weight
/// [O, C, K] and bias [O]: output step t mixes input steps t-K+1 .. t, with
/// steps before 0 treated as zeros.
inline Var temporal_conv(const Var& x, const Var& w, const Var& b) {
  detail::require_rank(x, 5, "temporal_conv input");
  detail::require_rank(w, 3, "temporal_conv weight");
  const std::size_t B = x.dim(0), T = x.dim(1), C = x.dim(2), HW = x.dim(3) * x.dim(4);
  const std::size_t O = w.dim(0), K = w.dim(2);
  if (w.dim(1) != C) throw ShapeError("temporal_conv: weight " + shape_str(w.shape()) + " does not match input channels " + std::to_string(C));
  if (K < 1) throw ShapeError("temporal_conv: kernel length must be at least 1");
  if (b.defined() && b.shape() != Shape{O}) throw ShapeError("temporal_conv: bias does not match output channels");

  Tensor y({B, T, O, x.dim(3), x.dim(4)});
  const double* xp = x.value().ptr();
  const double* wp = w.value().ptr();
  for (std::size_t bi = 0; bi < B; ++bi)
    for (std::size_t t = 0; t < T; ++t)
      for (std::size_t o = 0; o < O; ++o) {
        double* yp = y.ptr() + ((bi * T + t) * O + o) * HW;
        if (b.defined()) std::fill_n(yp, HW, b.value()[o]);
        for (std::size_t i = 0; i < K && i <= t; ++i)
          for (std::size_t c = 0; c < C; ++c) {
            const double wv = wp[(o * C + c) * K + i];
            const double* xs = xp + ((bi * T + (t - i)) * C + c) * HW;
            for (std::size_t p = 0; p < HW; ++p) yp[p] += wv * xs[p];
          }
      }

  return make_result(std::move(y), {x, w, b}, [=](Node& nd) {
    Tensor* gx = input_grad(nd, 0);
    Tensor* gw = input_grad(nd, 1);
    Tensor* gb = nd.inputs.size() > 2 ? input_grad(nd, 2) : nullptr;
    const double* xp = nd.inputs[0]->value.ptr();
    const double* wp = nd.inputs[1]->value.ptr();
    for (std::size_t bi = 0; bi < B; ++bi)
      for (std::size_t t = 0; t < T; ++t)
        for (std::size_t o = 0; o < O; ++o) {
          const double* gy = nd.grad.ptr() + ((bi * T + t) * O + o) * HW;
          if (gb) {
            double s = 0.0;
            for (std::size_t p = 0; p < HW; ++p) s += gy[p];
            (*gb)[o] += s;
          }
          for (std::size_t i = 0; i < K && i <= t; ++i)
            for (std::size_t c = 0; c < C; ++c) {
              const std::size_t widx = (o * C + c) * K + i;
              const std::size_t xoff = ((bi * T + (t - i)) * C + c) * HW;
              if (gx) {
                const double wv = wp[widx];
                double* gxs = gx->ptr() + xoff;
                for (std::size_t p = 0; p < HW; ++p) gxs[p] += wv * gy[p];
              }
              if (gw) {
                double s = 0.0;
                for (std::size_t p = 0; p < HW; ++p) s += gy[p] * xp[xoff + p];
                (*gw)[widx] += s;
              }
            }
        }
  });
}

/// Running statistics for batch normalization (eval mode).
struct BatchNormState {
  Tensor running_mean;
  Tensor running_var;
};

/// Batch normalization over [N, C, ...]: statistics per channel across the
/// batch and all trailing positions. In training mode the batch statistics
/// are used and the running estimates are updated with `momentum`
/// (unbiased variance); in eval mode the running estimates are used.
inline Var batch_norm(const Var& x, const Var& gamma, const Var& beta, BatchNormState& state, bool training,
                      double momentum = 0.1, double eps = 1e-5) {
  if (x.value().rank() < 2) throw ShapeError("batch_norm: input needs a channel dimension");
  const std::size_t N = x.dim(0), C = x.dim(1);
  if (N == 0) throw ShapeError("batch_norm: zero-size batch");
  const std::size_t S = x.size() / (N * C);
  const std::size_t M = N * S;
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) throw ShapeError("batch_norm: affine shape mismatch");

  std::vector<double> mean(C), istd(C);
  const double* xp = x.value().ptr();
  if (training) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < S; ++p) s += xp[(n * C + c) * S + p];
      const double mu = s / static_cast<double>(M);
      double v = 0.0;
      for (std::size_t n = 0; n < N; ++n)
        for (std::size_t p = 0; p < S; ++p) {
          const double d = xp[(n * C + c) * S + p] - mu;
          v += d * d;
        }
      const double var = v / static_cast<double>(M);
      mean[c] = mu;
      istd[c] = 1.0 / std::sqrt(var + eps);
      const double unbiased = M > 1 ? v / static_cast<double>(M - 1) : var;
      state.running_mean[c] = (1.0 - momentum) * state.running_mean[c] + momentum * mu;
      state.running_var[c] = (1.0 - momentum) * state.running_var[c] + momentum * unbiased;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = state.running_mean[c];
      istd[c] = 1.0 / std::sqrt(state.running_var[c] + eps);
    }
  }

  Tensor y(x.shape());
  Tensor xhat(x.shape());
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t p = 0; p < S; ++p) {
        const std::size_t i = (n * C + c) * S + p;
        xhat[i] = (xp[i] - mean[c]) * istd[c];
        y[i] = gamma.value()[c] * xhat[i] + beta.value()[c];
      }

  return make_result(std::move(y), {x, gamma, beta},
                     [=, xhat = std::move(xhat), istd = std::move(istd)](Node& nd) {
                       const auto& gv = nd.inputs[1]->value;
                       Tensor* gx = input_grad(nd, 0);
                       Tensor* gg = input_grad(nd, 1);
                       Tensor* gb = input_grad(nd, 2);
                       for (std::size_t c = 0; c < C; ++c) {
                         double sg = 0.0, sgx = 0.0;
                         for (std::size_t n = 0; n < N; ++n)
                           for (std::size_t p = 0; p < S; ++p) {
                             const std::size_t i = (n * C + c) * S + p;
                             sg += nd.grad[i];
                             sgx += nd.grad[i] * xhat[i];
                           }
                         if (gg) (*gg)[c] += sgx;
                         if (gb) (*gb)[c] += sg;
                         if (!gx) continue;
                         const double k = gv[c] * istd[c];
                         for (std::size_t n = 0; n < N; ++n)
                           for (std::size_t p = 0; p < S; ++p) {
                             const std::size_t i = (n * C + c) * S + p;
                             if (training)
                               (*gx)[i] += k * (nd.grad[i] - sg / static_cast<double>(M) -
                                                xhat[i] * sgx / static_cast<double>(M));
                             else
                               (*gx)[i] += k * nd.grad[i];
                           }
                       }
                     });
}

/// Group normalization over [N, C, ...]: statistics per sample and per group
/// of C / groups channels, then a per-channel affine map.
inline Var group_norm(const Var& x, const Var& gamma, const Var& beta, std::size_t groups, double eps = 1e-5) {
  if (x.value().rank() < 2) throw ShapeError("group_norm: input needs a channel dimension");
  const std::size_t N = x.dim(0), C = x.dim(1);
  if (N == 0) throw ShapeError("group_norm: zero-size batch");
  if (groups == 0 || C % groups != 0)
    throw ShapeError("group_norm: " + std::to_string(groups) + " groups do not divide " + std::to_string(C) + " channels");
  if (gamma.shape() != Shape{C} || beta.shape() != Shape{C}) throw ShapeError("group_norm: affine shape mismatch");
  const std::size_t S = x.size() / (N * C);
  const std::size_t Cg = C / groups;
  const std::size_t M = Cg * S;

  const double* xp = x.value().ptr();
  Tensor y(x.shape());
  Tensor xhat(x.shape());
  std::vector<double> istd(N * groups);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t g = 0; g < groups; ++g) {
      const std::size_t base = (n * C + g * Cg) * S;
      double s = 0.0;
      for (std::size_t i = 0; i < M; ++i) s += xp[base + i];
      const double mu = s / static_cast<double>(M);
      double v = 0.0;
      for (std::size_t i = 0; i < M; ++i) {
        const double d = xp[base + i] - mu;
        v += d * d;
      }
      const double is = 1.0 / std::sqrt(v / static_cast<double>(M) + eps);
      istd[n * groups + g] = is;
      for (std::size_t i = 0; i < M; ++i) {
        const std::size_t c = g * Cg + i / S;
        xhat[base + i] = (xp[base + i] - mu) * is;
        y[base + i] = gamma.value()[c] * xhat[base + i] + beta.value()[c];
      }
    }

  return make_result(std::move(y), {x, gamma, beta},
                     [=, xhat = std::move(xhat), istd = std::move(istd)](Node& nd) {
                       const auto& gv = nd.inputs[1]->value;
                       Tensor* gx = input_grad(nd, 0);
                       Tensor* gg = input_grad(nd, 1);
                       Tensor* gb = input_grad(nd, 2);
                       for (std::size_t n = 0; n < N; ++n)
                         for (std::size_t g = 0; g < groups; ++g) {
                           const std::size_t base = (n * C + g * Cg) * S;
                           double sd = 0.0, sdx = 0.0;
                           for (std::size_t i = 0; i < M; ++i) {
                             const std::size_t c = g * Cg + i / S;
                             const double gi = nd.grad[base + i];
                             if (gg) (*gg)[c] += gi * xhat[base + i];
                             if (gb) (*gb)[c] += gi;
                             const double d = gi * gv[c];
                             sd += d;
                             sdx += d * xhat[base + i];
                           }
                           if (!gx) continue;
                           const double is = istd[n * groups + g];
                           const double m = static_cast<double>(M);
                           for (std::size_t i = 0; i < M; ++i) {
                             const std::size_t c = g * Cg + i / S;
                             const double d = nd.grad[base + i] * gv[c];
                             (*gx)[base + i] += is * (d - sd / m - xhat[base + i] * sdx / m);
                           }
                         }
                     });
}

/// Average pooling of [N, C, H, W] onto an OH x OW grid. Cell i spans rows
/// floor(i H / OH) .. ceil((i + 1) H / OH) - 1 (likewise for columns).
inline Var adaptive_avg_pool2d(const Var& x, std::size_t OH, std::size_t OW) {
  detail::require_rank(x, 4, "adaptive_avg_pool2d");
  const std::size_t N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (OH == 0 || OW == 0 || OH > H || OW > W) throw ShapeError("adaptive_avg_pool2d: invalid output grid");
  auto lo = [](std::size_t i, std::size_t in, std::size_t out) { return i * in / out; };
  auto hi = [](std::size_t i, std::size_t in, std::size_t out) { return ((i + 1) * in + out - 1) / out; };
  Tensor y({N, C, OH, OW});
  const double* xp = x.value().ptr();
  for (std::size_t nc = 0; nc < N * C; ++nc)
    for (std::size_t i = 0; i < OH; ++i)
      for (std::size_t j = 0; j < OW; ++j) {
        double s = 0.0;
        const std::size_t h0 = lo(i, H, OH), h1 = hi(i, H, OH), w0 = lo(j, W, OW), w1 = hi(j, W, OW);
        for (std::size_t h = h0; h < h1; ++h)
          for (std::size_t w = w0; w < w1; ++w) s += xp[(nc * H + h) * W + w];
        y[(nc * OH + i) * OW + j] = s / static_cast<double>((h1 - h0) * (w1 - w0));
      }
  return make_result(std::move(y), {x}, [=](Node& nd) {
    Tensor* gx = input_grad(nd, 0);
    if (!gx) return;
    for (std::size_t nc = 0; nc < N * C; ++nc)
      for (std::size_t i = 0; i < OH; ++i)
        for (std::size_t j = 0; j < OW; ++j) {
          const std::size_t h0 = lo(i, H, OH), h1 = hi(i, H, OH), w0 = lo(j, W, OW), w1 = hi(j, W, OW);
          const double g = nd.grad[(nc * OH + i) * OW + j] / static_cast<double>((h1 - h0) * (w1 - w0));
          for (std::size_t h = h0; h < h1; ++h)
            for (std::size_t w = w0; w < w1; ++w) (*gx)[(nc * H + h) * W + w] += g;
        }
  });
}

} // namespace evtk::nn
