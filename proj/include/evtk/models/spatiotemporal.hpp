// SPDX-License-Identifier: Apache-2.0
//
// Causal spatiotemporal network and its frame-by-frame streaming runner.
#pragma once

#include <deque>
#include <string>
#include <vector>

#include "evtk/models/model.hpp"

namespace evtk::models {

struct SpatiotemporalConfig {
  std::size_t in_channels = 1;
  std::vector<std::size_t> channels{16, 32, 64};  // one block per entry
  std::size_t temporal_kernel = 5;
  std::size_t spatial_stride = 2;
  std::size_t gn_groups = 4;
  std::size_t pool_h = 2, pool_w = 2;
  double head_dropout = 0.0;

  void validate() const {
    if (channels.empty()) throw ConfigError("spatiotemporal net needs at least one block");
    if (in_channels < 1 || temporal_kernel < 1 || spatial_stride < 1 || pool_h < 1 || pool_w < 1)
      throw ConfigError("spatiotemporal dimensions must be positive");
    for (std::size_t i = 1; i < channels.size(); i += 2)
      if (gn_groups == 0 || channels[i] % gn_groups != 0)
        throw ConfigError("gn_groups " + std::to_string(gn_groups) + " does not divide block " + std::to_string(i) +
                          " channels " + std::to_string(channels[i]));
    if (!(head_dropout >= 0 && head_dropout < 1)) throw ConfigError("dropout probability must lie in [0, 1)");
  }
};

/// Causal temporal conv -> depthwise 3x3 -> pointwise 1x1 -> norm -> ReLU.
/// Even blocks use batch norm, odd blocks group norm.
struct SpatiotemporalBlock {
  nn::TemporalConv temporal;
  nn::Conv2d depthwise, pointwise;
  nn::BatchNorm bn;
  nn::GroupNorm gn;
  bool use_bn = true;

  SpatiotemporalBlock(std::size_t in, std::size_t out, const SpatiotemporalConfig& cfg, bool batch_norm, Rng& rng)
      : temporal(in, out, cfg.temporal_kernel, rng),
        depthwise(out, out, 3, {cfg.spatial_stride, 1, out}, false, rng),
        pointwise(out, out, 1, {1, 0, 1}, false, rng), use_bn(batch_norm) {
    if (use_bn)
      bn = nn::BatchNorm(out);
    else
      gn = nn::GroupNorm(out, cfg.gn_groups);
  }

  /// Frame-local part, applied to [N, C, H, W] temporal-conv outputs.
  nn::Var spatial(const nn::Var& x, bool training) {
    nn::Var y = pointwise(depthwise(x));
    return nn::relu(use_bn ? bn(y, training) : gn(y));
  }

  void collect(const std::string& p, nn::ParamList& out) {
    temporal.collect(p + "temporal.", out);
    depthwise.collect(p + "depthwise.", out);
    pointwise.collect(p + "pointwise.", out);
    if (use_bn)
      bn.collect(p + "bn.", out);
    else
      gn.collect(p + "gn.", out);
  }
};

class SpatiotemporalNet final : public GazeModel {
public:
  SpatiotemporalNet(const SpatiotemporalConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(derive_seed(seed, "init/spatiotemporal"));
    std::size_t c = cfg.in_channels;
    for (std::size_t i = 0; i < cfg.channels.size(); ++i) {
      blocks_.emplace_back(c, cfg.channels[i], cfg, i % 2 == 0, rng);
      c = cfg.channels[i];
    }
    feature_dim_ = c * cfg.pool_h * cfg.pool_w;
    head_ = nn::GazeHead(feature_dim_, cfg.head_dropout, rng);
  }

  std::string kind() const override { return "spatiotemporal"; }
  const SpatiotemporalConfig& config() const { return cfg_; }
  std::size_t feature_dim() const { return feature_dim_; }
  std::vector<SpatiotemporalBlock>& blocks() { return blocks_; }

  nn::Var forward(const nn::Var& frames, bool training, Rng* rng, std::vector<nn::Var>* activations = nullptr) override {
    require_frames(frames, cfg_.in_channels, "spatiotemporal");
    const std::size_t B = frames.dim(0), T = frames.dim(1);
    nn::Var x = frames;
    for (auto& b : blocks_) {
      nn::Var y = b.spatial(fold_time(b.temporal(x)), training);
      if (activations) activations->push_back(y);
      x = nn::reshape(y, {B, T, y.dim(1), y.dim(2), y.dim(3)});
    }
    return head(fold_time(x), B, T, training, rng);
  }

  /// Pooling + head on [N, C, H, W] features; output [B, T, 2].
  nn::Var head(const nn::Var& x, std::size_t B, std::size_t T, bool training, Rng* rng) {
    if (x.dim(2) < cfg_.pool_h || x.dim(3) < cfg_.pool_w)
      throw ShapeError("spatiotemporal: feature map " + shape_str(x.shape()) + " is smaller than the pooling grid");
    const nn::Var pooled = nn::adaptive_avg_pool2d(x, cfg_.pool_h, cfg_.pool_w);
    return head_(nn::reshape(pooled, {B, T, feature_dim_}), training, rng);
  }

  nn::ParamList parameters() override {
    nn::ParamList out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("block" + std::to_string(i) + ".", out);
    head_.collect("head.", out);
    return out;
  }

private:
  SpatiotemporalConfig cfg_;
  std::vector<SpatiotemporalBlock> blocks_;
  std::size_t feature_dim_ = 0;
  nn::GazeHead head_;
};

/// Closed-form trainable parameter count of a spatiotemporal net.
inline std::size_t spatiotemporal_param_count(const SpatiotemporalConfig& cfg) {
  std::size_t n = 0, c = cfg.in_channels;
  for (std::size_t out : cfg.channels) {
    n += out * c * cfg.temporal_kernel + out;  // temporal weight + bias
    n += 9 * out;                              // depthwise 3x3
    n += out * out;                            // pointwise
    n += 2 * out;                              // norm affine
    c = out;
  }
  return n + 2 * c * cfg.pool_h * cfg.pool_w + 2;
}

/// Frame-at-a-time inference. Each block keeps a FIFO of its last k - 1
/// input frames, so every pushed frame yields one estimate, equal to the
/// batch forward pass over the whole sequence so far (eval mode).
class StreamingRunner {
public:
  explicit StreamingRunner(SpatiotemporalNet& net) : net_(net), fifo_(net.blocks().size()) {}

  /// frame: [C, H, W]; returns [2].
  Tensor push(const Tensor& frame) {
    nn::NoGradGuard guard;
    Tensor x = frame;
    auto& blocks = net_.blocks();
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      auto& q = fifo_[i];
      q.push_back(x);
      const std::size_t k = blocks[i].temporal.kernel();
      while (q.size() > k) q.pop_front();
      const Shape& fs = x.shape();
      Tensor seq({1, q.size(), fs[0], fs[1], fs[2]});
      for (std::size_t j = 0; j < q.size(); ++j)
        std::copy(q[j].data().begin(), q[j].data().end(), seq.ptr() + j * q[j].size());
      const nn::Var t = blocks[i].temporal(nn::Var(std::move(seq)));
      // Last step only: [1, 1, O, H, W] -> [1, O, H, W].
      const std::size_t step = t.size() / t.dim(1);
      Tensor last({1, t.dim(2), t.dim(3), t.dim(4)});
      std::copy_n(t.value().ptr() + (t.dim(1) - 1) * step, step, last.ptr());
      const nn::Var y = blocks[i].spatial(nn::Var(std::move(last)), false);
      x = y.value().reshaped({y.dim(1), y.dim(2), y.dim(3)});
      if (q.size() == k) q.pop_front();  // keep k - 1 frames of history
    }
    const Shape& fs = x.shape();
    const nn::Var out = net_.head(nn::Var(x.reshaped({1, fs[0], fs[1], fs[2]})), 1, 1, false, nullptr);
    ++frames_;
    return out.value().reshaped({2});
  }

  std::size_t frames_seen() const { return frames_; }

private:
  SpatiotemporalNet& net_;
  std::vector<std::deque<Tensor>> fifo_;
  std::size_t frames_ = 0;
};

} // namespace evtk::models
