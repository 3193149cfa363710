// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>

#include "evtk/core/error.hpp"

namespace evtk::models {

struct ScalingCoefficients {
  double phi = 1.8;
  double alpha = 1.2;
  double beta = 1.1;
  double gamma = 1.15;
  double d0 = 2;
  double w0 = 16;
  double r0 = 1;

  void validate() const {
    if (alpha < 1.0 || beta < 1.0 || gamma < 1.0) throw ConfigError("scaling bases alpha, beta, gamma must be >= 1");
    if (phi < 0.0) throw ConfigError("compound coefficient phi must be non-negative");
  }
};

struct ScaledDims {
  long depth;
  long width;
  long resolution;
};

/// depth = alpha^phi d0, width = beta^phi w0, resolution = gamma^phi r0,
/// each rounded to the nearest integer and at least 1.
inline ScaledDims compound_scale(const ScalingCoefficients& c) {
  c.validate();
  auto scaled = [&](double base, double coeff) {
    return std::max(1L, std::lround(std::pow(base, c.phi) * coeff));
  };
  return {scaled(c.alpha, c.d0), scaled(c.beta, c.w0), scaled(c.gamma, c.r0)};
}

} // namespace evtk::models
