// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "evtk/io/tensor_container.hpp"
#include "evtk/nn/layers.hpp"

namespace evtk::train {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
  bool decoupled = false;  // AdamW
};

/// Adam / AdamW over a fixed parameter list.
///
/// AdamW first applies p -= lr * wd * p, then the Adam update; with
/// wd = 0 both variants perform identical arithmetic. Plain Adam with
/// nonzero wd adds wd * p to the gradient.
class Adam {
public:
  Adam(nn::ParamList params, AdamHyper h) : params_(std::move(params)), h_(h) {
    for (const auto& p : params_.params) {
      m_.emplace_back(p.var.shape());
      v_.emplace_back(p.var.shape());
    }
  }

  void zero_grad() {
    for (auto& p : params_.params) p.var.zero_grad();
  }

  /// One update at learning rate lr (the schedule-adjusted value).
  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(h_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(h_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.params.size(); ++k) {
      nn::Var& var = params_.params[k].var;
      Tensor& p = var.mutable_value();
      const Tensor& g = var.grad();
      const bool has_grad = !g.empty();
      Tensor& m = m_[k];
      Tensor& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        double gi = has_grad ? g[i] : 0.0;
        if (h_.decoupled) {
          if (h_.weight_decay != 0.0) p[i] -= lr * h_.weight_decay * p[i];
        } else if (h_.weight_decay != 0.0) {
          gi += h_.weight_decay * p[i];
        }
        m[i] = h_.beta1 * m[i] + (1.0 - h_.beta1) * gi;
        v[i] = h_.beta2 * v[i] + (1.0 - h_.beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + h_.eps);
      }
    }
  }

  std::int64_t steps() const { return t_; }

  void save(io::TensorSet& out, const std::string& prefix = "optim.") const {
    for (std::size_t k = 0; k < params_.params.size(); ++k) {
      out.tensors[prefix + "m." + params_.params[k].name] = m_[k];
      out.tensors[prefix + "v." + params_.params[k].name] = v_[k];
    }
    out.attrs[prefix + "step"] = std::to_string(t_);
  }

  void load(const io::TensorSet& in, const std::string& prefix = "optim.") {
    for (std::size_t k = 0; k < params_.params.size(); ++k) {
      m_[k] = in.at(prefix + "m." + params_.params[k].name);
      v_[k] = in.at(prefix + "v." + params_.params[k].name);
      if (m_[k].shape() != params_.params[k].var.shape() || v_[k].shape() != params_.params[k].var.shape())
        throw FormatError("optimizer state for '" + params_.params[k].name + "' has the wrong shape");
    }
    auto it = in.attrs.find(prefix + "step");
    if (it == in.attrs.end()) throw FormatError("checkpoint has no optimizer step count");
    t_ = std::stoll(it->second);
  }

private:
  nn::ParamList params_;
  AdamHyper h_;
  std::vector<Tensor> m_, v_;
  std::int64_t t_ = 0;
};

} // namespace evtk::train
