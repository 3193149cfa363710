// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <vector>

#include "evtk/core/rng.hpp"
#include "evtk/nn/layers.hpp"

namespace evtk::models {

/// Common interface of the gaze regressors.
///
/// forward() maps frames [B, T, C, H, W] to per-step coordinates [B, T, 2]
/// in units of the sensor extent. `rng` drives dropout in training mode; the
/// activations designated for the sparsity penalty are appended to
/// `activations` when it is non-null.
class GazeModel {
public:
  virtual ~GazeModel() = default;
  virtual std::string kind() const = 0;
  virtual nn::Var forward(const nn::Var& frames, bool training, Rng* rng,
                          std::vector<nn::Var>* activations = nullptr) = 0;
  virtual nn::ParamList parameters() = 0;
};

inline void require_frames(const nn::Var& frames, std::size_t channels, const char* who) {
  if (frames.value().rank() != 5 || frames.dim(2) != channels)
    throw ShapeError(std::string(who) + ": expected frames [B, T, " + std::to_string(channels) +
                     ", H, W], got " + shape_str(frames.shape()));
}

/// [B, T, C, H, W] -> [B * T, C, H, W]
inline nn::Var fold_time(const nn::Var& x) {
  const auto& s = x.shape();
  return nn::reshape(x, {s[0] * s[1], s[2], s[3], s[4]});
}

} // namespace evtk::models
