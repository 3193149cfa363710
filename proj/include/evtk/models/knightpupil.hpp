// SPDX-License-Identifier: Apache-2.0
//
// Convolutional backbone + bidirectional GRU + input-dependent state-space
// module + linear gaze head.
#pragma once

#include <string>
#include <vector>

#include "evtk/models/model.hpp"
#include "evtk/models/scaling.hpp"

namespace evtk::models {

struct KnightPupilConfig {
  std::size_t in_channels = 3;
  ScalingCoefficients scaling;  // depth = blocks per stage, width = stage-0 channels
  std::size_t stages = 3;       // stage s has width << s channels
  std::size_t pool_h = 2, pool_w = 2;
  std::size_t gru_hidden = 128;
  std::size_t gru_layers = 2;
  double gru_dropout = 0.3;
  double head_dropout = 0.3;

  void validate() const {
    scaling.validate();
    if (in_channels < 1 || stages < 1 || pool_h < 1 || pool_w < 1 || gru_hidden < 1 || gru_layers < 1)
      throw ConfigError("knightpupil dimensions must be positive");
    if (!(gru_dropout >= 0 && gru_dropout < 1 && head_dropout >= 0 && head_dropout < 1))
      throw ConfigError("dropout probabilities must lie in [0, 1)");
  }
};

/// Depthwise 3x3 (strided) -> BN -> ReLU -> pointwise 1x1 -> BN -> ReLU.
struct SeparableBlock {
  nn::Conv2d dw, pw;
  nn::BatchNorm bn1, bn2;

  SeparableBlock(std::size_t in, std::size_t out, std::size_t stride, Rng& rng)
      : dw(in, in, 3, {stride, 1, in}, false, rng), pw(in, out, 1, {1, 0, 1}, false, rng), bn1(in), bn2(out) {}

  nn::Var operator()(const nn::Var& x, bool training) {
    return nn::relu(bn2(pw(nn::relu(bn1(dw(x), training))), training));
  }
  void collect(const std::string& p, nn::ParamList& out) {
    dw.collect(p + "dw.", out);
    bn1.collect(p + "bn1.", out);
    pw.collect(p + "pw.", out);
    bn2.collect(p + "bn2.", out);
  }
};

class KnightPupil final : public GazeModel {
public:
  KnightPupil(const KnightPupilConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
    cfg.validate();
    Rng rng(derive_seed(seed, "init/knightpupil"));
    const ScaledDims dims = compound_scale(cfg.scaling);
    const auto width = static_cast<std::size_t>(dims.width);
    const auto depth = static_cast<std::size_t>(dims.depth);
    stem_ = nn::Conv2d(cfg.in_channels, width, 3, {2, 1, 1}, false, rng);
    stem_bn_ = nn::BatchNorm(width);
    std::size_t c = width;
    for (std::size_t s = 0; s < cfg.stages; ++s) {
      const std::size_t out = width << s;
      for (std::size_t d = 0; d < depth; ++d) {
        blocks_.emplace_back(c, out, d == 0 ? 2 : 1, rng);
        c = out;
      }
    }
    feature_dim_ = c * cfg.pool_h * cfg.pool_w;
    gru_ = nn::BiGru(feature_dim_, cfg.gru_hidden, cfg.gru_layers, cfg.gru_dropout, rng);
    ssm_ = nn::LtvSsm(gru_.output_features(), rng);
    head_ = nn::GazeHead(ssm_.features(), cfg.head_dropout, rng);
  }

  std::string kind() const override { return "knightpupil"; }
  std::size_t feature_dim() const { return feature_dim_; }
  const KnightPupilConfig& config() const { return cfg_; }

  /// Per-frame feature vectors [B * T, d].
  nn::Var backbone(const nn::Var& frames, bool training) {
    nn::Var x = nn::relu(stem_bn_(stem_(fold_time(frames)), training));
    for (auto& b : blocks_) x = b(x, training);
    if (x.dim(2) < cfg_.pool_h || x.dim(3) < cfg_.pool_w)
      throw ShapeError("knightpupil: feature map " + shape_str(x.shape()) + " is smaller than the pooling grid");
    x = nn::adaptive_avg_pool2d(x, cfg_.pool_h, cfg_.pool_w);
    return nn::reshape(x, {x.dim(0), feature_dim_});
  }

  nn::Var forward(const nn::Var& frames, bool training, Rng* rng, std::vector<nn::Var>* = nullptr) override {
    require_frames(frames, cfg_.in_channels, "knightpupil");
    const std::size_t B = frames.dim(0), T = frames.dim(1);
    nn::Var f = nn::reshape(backbone(frames, training), {B, T, feature_dim_});
    return head_(ssm_(gru_(f, training, rng)), training, rng);
  }

  nn::ParamList parameters() override {
    nn::ParamList out;
    stem_.collect("stem.", out);
    stem_bn_.collect("stem_bn.", out);
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].collect("block" + std::to_string(i) + ".", out);
    gru_.collect("gru.", out);
    ssm_.collect("ssm.", out);
    head_.collect("head.", out);
    return out;
  }

  nn::BiGru& gru() { return gru_; }
  nn::LtvSsm& ssm() { return ssm_; }
  nn::GazeHead& head() { return head_; }

private:
  KnightPupilConfig cfg_;
  nn::Conv2d stem_;
  nn::BatchNorm stem_bn_;
  std::vector<SeparableBlock> blocks_;
  std::size_t feature_dim_ = 0;
  nn::BiGru gru_;
  nn::LtvSsm ssm_;
  nn::GazeHead head_;
};

} // namespace evtk::models
