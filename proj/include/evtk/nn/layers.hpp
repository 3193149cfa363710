// SPDX-License-Identifier: Apache-2.0
//
// Parameterized layers built from the ops in ops.hpp.
#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "evtk/core/rng.hpp"
#include "evtk/nn/ops.hpp"

namespace evtk::nn {

/// Named view of a model's trainable parameters and persistent buffers.
struct ParamRef {
  std::string name;
  Var var;
};

struct BufferRef {
  std::string name;
  Tensor* tensor;
};

struct ParamList {
  std::vector<ParamRef> params;
  std::vector<BufferRef> buffers;

  void add(std::string name, const Var& v) { params.push_back({std::move(name), v}); }
  void add_buffer(std::string name, Tensor& t) { buffers.push_back({std::move(name), &t}); }

  std::size_t count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.var.size();
    return n;
  }
};

inline Var parameter(Tensor t) { return Var(std::move(t), true); }

/// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline Var uniform_param(Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double a = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t.data()) v = rng.uniform(-a, a);
  return parameter(std::move(t));
}

inline Var zeros_param(Shape shape) { return parameter(Tensor(std::move(shape))); }

struct Linear {
  Var W, b;

  Linear() = default;
  Linear(std::size_t in, std::size_t out, Rng& rng) : W(uniform_param({out, in}, in, rng)), b(zeros_param({out})) {}

  std::size_t in_features() const { return W.dim(1); }
  std::size_t out_features() const { return W.dim(0); }
  Var operator()(const Var& x) const { return linear(x, W, b); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + "weight", W);
    out.add(prefix + "bias", b);
  }
};

struct Conv2d {
  Var w, b;  // b undefined for bias-free convolutions
  Conv2dOptions opt;

  Conv2d() = default;
  Conv2d(std::size_t in, std::size_t out, std::size_t kernel, Conv2dOptions o, bool bias, Rng& rng) : opt(o) {
    const std::size_t cg = in / o.groups;
    w = uniform_param({out, cg, kernel, kernel}, cg * kernel * kernel, rng);
    if (bias) b = zeros_param({out});
  }

  Var operator()(const Var& x) const { return conv2d(x, w, b, opt); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + "weight", w);
    if (b.defined()) out.add(prefix + "bias", b);
  }
};

struct TemporalConv {
  Var w, b;

  TemporalConv() = default;
  TemporalConv(std::size_t in, std::size_t out, std::size_t k, Rng& rng)
      : w(uniform_param({out, in, k}, in * k, rng)), b(zeros_param({out})) {}

  std::size_t kernel() const { return w.dim(2); }
  Var operator()(const Var& x) const { return temporal_conv(x, w, b); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + "weight", w);
    out.add(prefix + "bias", b);
  }
};

struct BatchNorm {
  Var gamma, beta;
  BatchNormState state;
  double momentum = 0.1;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels)
      : gamma(parameter(Tensor({channels}, 1.0))), beta(zeros_param({channels})),
        state{Tensor({channels}), Tensor({channels}, 1.0)} {}

  Var operator()(const Var& x, bool training) { return batch_norm(x, gamma, beta, state, training, momentum); }
  void collect(const std::string& prefix, ParamList& out) {
    out.add(prefix + "weight", gamma);
    out.add(prefix + "bias", beta);
    out.add_buffer(prefix + "running_mean", state.running_mean);
    out.add_buffer(prefix + "running_var", state.running_var);
  }
};

struct GroupNorm {
  Var gamma, beta;
  std::size_t groups = 1;

  GroupNorm() = default;
  GroupNorm(std::size_t channels, std::size_t g)
      : gamma(parameter(Tensor({channels}, 1.0))), beta(zeros_param({channels})), groups(g) {
    if (g == 0 || channels % g != 0)
      throw ConfigError(std::to_string(g) + " groups do not divide " + std::to_string(channels) + " channels");
  }

  Var operator()(const Var& x) const { return group_norm(x, gamma, beta, groups); }
  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + "weight", gamma);
    out.add(prefix + "bias", beta);
  }
};

/// Gated recurrent unit with one bias per gate:
///   r = sigmoid(x W_r^T + h U_r^T + b_r)
///   z = sigmoid(x W_z^T + h U_z^T + b_z)
///   c = tanh(x W_h^T + (r * h) U_h^T + b_h)
///   h' = (1 - z) * h + z * c
struct GruCell {
  Var W_r, W_z, W_h, U_r, U_z, U_h, b_r, b_z, b_h;

  GruCell() = default;
  GruCell(std::size_t input, std::size_t hidden, Rng& rng)
      : W_r(uniform_param({hidden, input}, input, rng)), W_z(uniform_param({hidden, input}, input, rng)),
        W_h(uniform_param({hidden, input}, input, rng)), U_r(uniform_param({hidden, hidden}, hidden, rng)),
        U_z(uniform_param({hidden, hidden}, hidden, rng)), U_h(uniform_param({hidden, hidden}, hidden, rng)),
        b_r(zeros_param({hidden})), b_z(zeros_param({hidden})), b_h(zeros_param({hidden})) {}

  std::size_t hidden() const { return U_r.dim(0); }

  Var operator()(const Var& x, const Var& h) const {
    const Var r = sigmoid(add(linear(x, W_r, b_r), linear(h, U_r)));
    const Var z = sigmoid(add(linear(x, W_z, b_z), linear(h, U_z)));
    const Var c = tanh(add(linear(x, W_h, b_h), linear(mul(r, h), U_h)));
    return add(mul(one_minus(z), h), mul(z, c));
  }

  void collect(const std::string& prefix, ParamList& out) const {
    out.add(prefix + "W_r", W_r);
    out.add(prefix + "W_z", W_z);
    out.add(prefix + "W_h", W_h);
    out.add(prefix + "U_r", U_r);
    out.add(prefix + "U_z", U_z);
    out.add(prefix + "U_h", U_h);
    out.add(prefix + "b_r", b_r);
    out.add(prefix + "b_z", b_z);
    out.add(prefix + "b_h", b_h);
  }
};

/// Runs a cell over a [B, T, F] sequence from a zero state, optionally in
/// reverse time order. Output [B, T, hidden] is in input time order.
inline Var run_gru(const GruCell& cell, const Var& x, bool reverse) {
  const std::size_t B = x.dim(0), T = x.dim(1);
  Var h(Tensor({B, cell.hidden()}));
  std::vector<Var> out(T);
  for (std::size_t s = 0; s < T; ++s) {
    const std::size_t t = reverse ? T - 1 - s : s;
    h = cell(time_step(x, t), h);
    out[t] = h;
  }
  return stack_time(out);
}

/// Stacked bidirectional GRU; each layer concatenates the forward and
/// backward outputs. Dropout is applied between layers in training mode.
struct BiGru {
  std::vector<GruCell> fwd, bwd;
  double dropout_p = 0.0;

  BiGru() = default;
  BiGru(std::size_t input, std::size_t hidden, std::size_t layers, double dropout, Rng& rng) : dropout_p(dropout) {
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = l == 0 ? input : 2 * hidden;
      fwd.emplace_back(in, hidden, rng);
      bwd.emplace_back(in, hidden, rng);
    }
  }

  std::size_t output_features() const { return 2 * fwd.front().hidden(); }

  Var operator()(Var x, bool training, Rng* rng) const {
    for (std::size_t l = 0; l < fwd.size(); ++l) {
      if (l > 0 && training && rng) x = dropout(x, dropout_p, *rng);
      x = concat_last(run_gru(fwd[l], x, false), run_gru(bwd[l], x, true));
    }
    return x;
  }

  void collect(const std::string& prefix, ParamList& out) const {
    for (std::size_t l = 0; l < fwd.size(); ++l) {
      fwd[l].collect(prefix + "l" + std::to_string(l) + ".fwd.", out);
      bwd[l].collect(prefix + "l" + std::to_string(l) + ".bwd.", out);
    }
  }
};

/// Input-dependent state-space step, applied independently at every step:
///   (delta, B) = proj(h);  h' = exp(delta) * h + delta * B;  y = C h' + h
/// The state size equals the input size, and the skip matrix is the fixed
/// identity.
struct LtvSsm {
  Linear proj;
  Var C;

  LtvSsm() = default;
  LtvSsm(std::size_t features, Rng& rng) : proj(features, 2 * features, rng), C(uniform_param({features, features}, features, rng)) {}

  std::size_t features() const { return C.dim(0); }

  Var operator()(const Var& h) const {
    const std::size_t S = features();
    const Var p = proj(h);
    const Var delta = slice_last(p, 0, S);
    const Var Bt = slice_last(p, S, S);
    const Var hs = add(mul(exp(delta), h), mul(delta, Bt));
    return add(linear(hs, C), h);
  }

  void collect(const std::string& prefix, ParamList& out) const {
    proj.collect(prefix + "proj.", out);
    out.add(prefix + "C", C);
  }
};

/// Dropout followed by an affine map to (x, y).
struct GazeHead {
  Linear out;
  double dropout_p = 0.0;

  GazeHead() = default;
  GazeHead(std::size_t features, double dropout, Rng& rng) : out(features, 2, rng), dropout_p(dropout) {}

  Var operator()(Var x, bool training, Rng* rng) const {
    if (training && rng) x = dropout(x, dropout_p, *rng);
    return out(x);
  }

  void collect(const std::string& prefix, ParamList& out_list) const { out.collect(prefix, out_list); }
};

/// lambda * sum |a| over the given activations.
inline Var l1_activation_penalty(const std::vector<Var>& activations, double lambda) {
  if (lambda < 0.0) throw ConfigError("sparsity weight must be non-negative");
  Var total(Tensor({1}));
  for (const auto& a : activations) total = add(total, abs_sum(a));
  return scale(total, lambda);
}

} // namespace evtk::nn
