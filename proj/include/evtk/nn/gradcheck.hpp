// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference check of reverse-mode gradients.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "evtk/nn/autograd.hpp"

namespace evtk::nn {

struct GradcheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "input <k> element <i>"
  std::size_t checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps
/// near-zero derivatives from inflating the ratio.
inline double relative_error(double analytic, double numeric, double floor = 1e-2) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// `f` maps the inputs to a scalar Var. Every element of every input is
/// perturbed by +-h and the symmetric difference quotient is compared with
/// the gradient from backward().
inline GradcheckResult gradcheck(const std::function<Var(const std::vector<Var>&)>& f, std::vector<Var> inputs,
                                 double h = 1e-5) {
  for (auto& v : inputs) v.zero_grad();
  backward(f(inputs));
  std::vector<Tensor> analytic;
  for (auto& v : inputs) analytic.push_back(v.grad().empty() ? Tensor(v.shape()) : v.grad());

  GradcheckResult res;
  NoGradGuard guard;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    Tensor& x = inputs[k].mutable_value();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double orig = x[i];
      x[i] = orig + h;
      const double fp = f(inputs).item();
      x[i] = orig - h;
      const double fm = f(inputs).item();
      x[i] = orig;
      const double err = relative_error(analytic[k][i], (fp - fm) / (2.0 * h));
      ++res.checked;
      if (err > res.max_rel_error || res.worst.empty()) {
        res.max_rel_error = err;
        res.worst = "input " + std::to_string(k) + " element " + std::to_string(i);
      }
    }
  }
  return res;
}

} // namespace evtk::nn
