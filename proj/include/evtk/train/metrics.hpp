// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "evtk/nn/tensor.hpp"

namespace evtk::train {

struct MetricReport {
  double mean_distance = 0.0;  // pixels
  double p10 = 0.0;            // percent of windows below 10 px
  std::vector<double> window_distances;
};

/// Mean over steps of the Euclidean distance between [L, 2] tracks.
inline double window_distance(const double* pred, const double* target, std::size_t steps) {
  double s = 0.0;
  for (std::size_t t = 0; t < steps; ++t) s += std::hypot(pred[2 * t] - target[2 * t], pred[2 * t + 1] - target[2 * t + 1]);
  return steps ? s / static_cast<double>(steps) : 0.0;
}

inline MetricReport summarize(std::vector<double> distances, double threshold = 10.0) {
  MetricReport r;
  r.window_distances = std::move(distances);
  if (r.window_distances.empty()) return r;
  std::size_t below = 0;
  double sum = 0.0;
  for (double d : r.window_distances) {
    sum += d;
    if (d < threshold) ++below;
  }
  const auto n = static_cast<double>(r.window_distances.size());
  r.mean_distance = sum / n;
  r.p10 = 100.0 * static_cast<double>(below) / n;
  return r;
}

/// pred and target are [N, L, 2] in pixels; every step counts.
inline MetricReport evaluate_predictions(const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape() || pred.rank() != 3 || pred.dim(2) != 2)
    throw ShapeError("evaluate_predictions: expected matching [N, L, 2] tensors");
  const std::size_t N = pred.dim(0), L = pred.dim(1);
  std::vector<double> d(N);
  for (std::size_t i = 0; i < N; ++i) d[i] = window_distance(pred.ptr() + i * L * 2, target.ptr() + i * L * 2, L);
  return summarize(std::move(d));
}

} // namespace evtk::train
