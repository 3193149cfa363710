// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>

#include "evtk/nn/autograd.hpp"

namespace evtk::train {

enum class LossKind { mse, l1, smooth_l1 };

inline LossKind parse_loss(const std::string& s) {
  if (s == "mse") return LossKind::mse;
  if (s == "l1") return LossKind::l1;
  if (s == "smooth_l1") return LossKind::smooth_l1;
  throw ConfigError("unknown loss '" + s + "' (expected mse, l1 or smooth_l1)");
}

/// Per-coordinate penalty and its derivative.
inline double loss_value(LossKind k, double d) {
  switch (k) {
  case LossKind::mse: return d * d;
  case LossKind::l1: return std::abs(d);
  case LossKind::smooth_l1: return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
  }
  return 0.0;
}

inline double loss_derivative(LossKind k, double d) {
  switch (k) {
  case LossKind::mse: return 2.0 * d;
  case LossKind::l1: return d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0);
  case LossKind::smooth_l1: return std::abs(d) < 1.0 ? d : (d > 0 ? 1.0 : -1.0);
  }
  return 0.0;
}

/// Mean per-coordinate loss over the steps whose weight is nonzero.
///
/// pred and target are [..., 2]; weight holds one entry per step (1 keeps
/// the step, 0 masks it). The result is sum_t w_t (l(dx) + l(dy)) /
/// (2 sum_t w_t); an all-zero mask is an error.
inline nn::Var coordinate_loss(const nn::Var& pred, const Tensor& target, const Tensor& weight,
                               LossKind kind = LossKind::mse) {
  if (pred.shape() != target.shape() || pred.shape().back() != 2)
    throw ShapeError("coordinate_loss: prediction " + shape_str(pred.shape()) + " vs target " +
                     shape_str(target.shape()));
  const std::size_t steps = pred.size() / 2;
  if (weight.size() != steps) throw ShapeError("coordinate_loss: mask does not have one entry per step");
  double wsum = 0.0;
  for (double w : weight.data()) wsum += w;
  if (!(wsum > 0.0)) throw TrainingError("empty loss support");
  const double norm = 2.0 * wsum;
  double total = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    if (weight[t] == 0.0) continue;
    for (std::size_t c = 0; c < 2; ++c) total += weight[t] * loss_value(kind, pred.value()[2 * t + c] - target[2 * t + c]);
  }
  return nn::make_result(Tensor({1}, total / norm), {pred}, [target, weight, norm, kind, steps](nn::Node& n) {
    Tensor* g = nn::input_grad(n, 0);
    if (!g) return;
    const auto& pv = n.inputs[0]->value;
    for (std::size_t t = 0; t < steps; ++t) {
      if (weight[t] == 0.0) continue;
      for (std::size_t c = 0; c < 2; ++c) {
        const std::size_t i = 2 * t + c;
        (*g)[i] += n.grad[0] * weight[t] * loss_derivative(kind, pv[i] - target[i]) / norm;
      }
    }
  });
}

} // namespace evtk::train
