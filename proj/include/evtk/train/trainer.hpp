// SPDX-License-Identifier: Apache-2.0
//
// Training loop, checkpoints, batch prediction and evaluation.
#pragma once

#include <cmath>
#include <filesystem>
#include <iostream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "evtk/config.hpp"
#include "evtk/io/tensor_container.hpp"
#include "evtk/train/data.hpp"
#include "evtk/train/loss.hpp"
#include "evtk/train/metrics.hpp"
#include "evtk/train/optim.hpp"
#include "evtk/train/schedule.hpp"

namespace evtk::train {

namespace fs = std::filesystem;

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t batch_size = 8;
  AdamHyper optimizer;
  Schedule schedule;
  LossKind loss = LossKind::mse;
  double sparsity_lambda = 0.0;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::size_t stop_after_epoch = 0;  // 0: run all epochs
  bool resume = false;
  std::ostream* progress = nullptr;
};

inline TrainOptions train_options_from(const Config& c) {
  TrainOptions o;
  o.epochs = c.count("train.epochs");
  o.batch_size = c.count("train.batch_size");
  if (o.epochs < 1 || o.batch_size < 1) throw ConfigError("epochs and batch size must be at least 1");
  const std::string& kind = c.str("train.optimizer");
  if (kind != "adam" && kind != "adamw") throw ConfigError("unknown optimizer '" + kind + "' (expected adam or adamw)");
  o.optimizer = {c.real("train.lr"), c.real("train.beta1"), c.real("train.beta2"), c.real("train.eps"),
                 c.real("train.weight_decay"), kind == "adamw"};
  o.schedule.kind = parse_schedule(c.str("train.schedule"));
  o.schedule.step_epochs = c.integer("train.step_epochs");
  o.schedule.step_gamma = c.real("train.step_gamma");
  o.schedule.warmup_fraction = c.real("train.warmup_fraction");
  o.loss = parse_loss(c.str("train.loss"));
  o.sparsity_lambda = c.real("st.lambda");
  o.seed = derive_seed(c.seed(), "train");
  return o;
}

inline WindowOptions window_options_from(const Config& c, bool validation) {
  WindowOptions w;
  w.encode = encode_config_from(c);
  w.representation = representation_from(c);
  w.length = c.count(validation ? "window.val_length" : "window.train_length");
  w.stride = c.count(validation ? "window.val_stride" : "window.train_stride");
  if (w.length < 1 || w.stride < 1) throw ConfigError("window length and stride must be at least 1");
  return w;
}

struct LogRow {
  std::size_t epoch = 0;
  double train_loss = 0, val_loss = 0, val_dist = 0, lr = 0;
};

inline std::string log_csv(const std::vector<LogRow>& rows) {
  std::string out = "epoch,train_loss,val_loss,val_dist,lr\n";
  for (const auto& r : rows)
    out += std::to_string(r.epoch) + "," + io::format_double(r.train_loss) + "," + io::format_double(r.val_loss) +
           "," + io::format_double(r.val_dist) + "," + io::format_double(r.lr) + "\n";
  return out;
}

inline std::vector<LogRow> parse_log_csv(std::string_view text) {
  std::vector<LogRow> rows;
  bool header = true;
  for (auto line : io::split(text, '\n')) {
    line = io::trim(line);
    if (line.empty()) continue;
    if (header) {
      header = false;
      continue;
    }
    const auto f = io::split(line, ',');
    LogRow r;
    if (f.size() != 5 || !io::parse_number(f[0], r.epoch) || !io::parse_number(f[1], r.train_loss) ||
        !io::parse_number(f[2], r.val_loss) || !io::parse_number(f[3], r.val_dist) || !io::parse_number(f[4], r.lr))
      throw FormatError("malformed training log row '" + std::string(line) + "'");
    rows.push_back(r);
  }
  return rows;
}

/// Parameters and buffers of a model as a tensor set ("param." / "buffer.").
inline void store_model(models::GazeModel& m, io::TensorSet& out) {
  auto pl = m.parameters();
  for (const auto& p : pl.params) out.tensors["param." + p.name] = p.var.value();
  for (const auto& b : pl.buffers) out.tensors["buffer." + b.name] = *b.tensor;
}

inline void restore_model(models::GazeModel& m, const io::TensorSet& in) {
  auto pl = m.parameters();
  for (auto& p : pl.params) {
    const Tensor& t = in.at("param." + p.name);
    if (t.shape() != p.var.shape())
      throw FormatError("checkpoint tensor '" + p.name + "' has shape " + shape_str(t.shape()) + ", model expects " +
                        shape_str(p.var.shape()));
    p.var.mutable_value() = t;
  }
  for (auto& b : pl.buffers) {
    const Tensor& t = in.at("buffer." + b.name);
    if (t.shape() != b.tensor->shape()) throw FormatError("checkpoint buffer '" + b.name + "' has the wrong shape");
    *b.tensor = t;
  }
}

/// Model from a checkpoint written by train(): the embedded configuration
/// rebuilds the architecture, then the weights are loaded.
inline std::unique_ptr<models::GazeModel> load_model(const fs::path& checkpoint, Config* config_out = nullptr) {
  const io::TensorSet set = io::load_tensor_set(checkpoint);
  auto it = set.attrs.find("config");
  if (it == set.attrs.end()) throw FormatError(checkpoint.string() + ": checkpoint carries no configuration");
  Config c;
  c.load_text(it->second, checkpoint.string());
  auto model = build_model(c);
  restore_model(*model, set);
  if (config_out) *config_out = c;
  return model;
}

/// Eval-mode predictions in pixels, [N, L, 2].
inline Tensor predict(models::GazeModel& model, const WindowSet& ws, std::size_t batch_size = 8) {
  nn::NoGradGuard guard;
  const std::size_t N = ws.size(), L = ws.length();
  Tensor out({N, L, 2});
  for (std::size_t b0 = 0; b0 < N; b0 += batch_size) {
    std::vector<std::size_t> idx(std::min(batch_size, N - b0));
    std::iota(idx.begin(), idx.end(), b0);
    const nn::Var y = model.forward(nn::Var(gather_rows(ws.frames, idx)), false, nullptr);
    std::copy_n(y.value().ptr(), y.size(), out.ptr() + b0 * L * 2);
  }
  to_pixels(out, ws.geometry);
  return out;
}

inline MetricReport evaluate(models::GazeModel& model, const WindowSet& ws, std::size_t batch_size = 8) {
  return evaluate_predictions(predict(model, ws, batch_size), ws.targets);
}

/// Throws naming `what` when t holds a NaN or infinity.
inline void require_finite(const Tensor& t, const std::string& what) {
  for (std::size_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i]))
      throw TrainingError("non-finite value in " + what + " (element " + std::to_string(i) + " = " +
                          io::format_double(t[i]) + ")");
}

struct TrainResult {
  std::vector<LogRow> log;
  double best_distance = std::numeric_limits<double>::infinity();
  double best_val_loss = std::numeric_limits<double>::infinity();
  std::size_t epochs_run = 0;
};

/// Runs the training loop and writes, under opt.out_dir: log.csv and the
/// checkpoints best_distance.ckpt, best_val_loss.ckpt and final.ckpt.
///
/// All randomness (shuffling, dropout) is derived from opt.seed and the
/// epoch / step index, so a run resumed from final.ckpt continues exactly
/// as the uninterrupted run would.
inline TrainResult train(models::GazeModel& model, const WindowSet& train_set, const WindowSet& val_set,
                         const TrainOptions& opt, const std::string& config_text) {
  if (train_set.size() == 0) throw ConfigError("training set has no windows");
  if (val_set.size() == 0) throw ConfigError("validation set has no windows");
  if (opt.sparsity_lambda < 0) throw ConfigError("sparsity weight must be non-negative");
  fs::create_directories(opt.out_dir);

  Adam optim(model.parameters(), opt.optimizer);
  const std::size_t N = train_set.size();
  const std::size_t batches = (N + opt.batch_size - 1) / opt.batch_size;
  const auto total_steps = static_cast<std::int64_t>(opt.epochs * batches);
  const Tensor train_targets = normalized_targets(train_set.targets, train_set.geometry);
  const Tensor train_mask = open_eye_mask(train_set.blink);
  const Tensor val_targets = normalized_targets(val_set.targets, val_set.geometry);
  const Tensor val_mask = open_eye_mask(val_set.blink);

  TrainResult res;
  std::size_t first_epoch = 0;
  const fs::path final_path = opt.out_dir / "final.ckpt";
  if (opt.resume) {
    const io::TensorSet ck = io::load_tensor_set(final_path);
    restore_model(model, ck);
    optim.load(ck);
    first_epoch = static_cast<std::size_t>(std::stoull(ck.attrs.at("epoch")));
    io::parse_number(ck.attrs.at("best_distance"), res.best_distance);
    io::parse_number(ck.attrs.at("best_val_loss"), res.best_val_loss);
    res.log = parse_log_csv(ck.attrs.at("log"));
  }

  auto save = [&](const fs::path& path, std::size_t epoch) {
    io::TensorSet set;
    store_model(model, set);
    optim.save(set);
    set.attrs["config"] = config_text;
    set.attrs["model"] = model.kind();
    set.attrs["epoch"] = std::to_string(epoch);
    set.attrs["best_distance"] = io::format_double(res.best_distance);
    set.attrs["best_val_loss"] = io::format_double(res.best_val_loss);
    set.attrs["log"] = log_csv(res.log);
    io::save_tensor_set(set, path);
  };

  for (std::size_t epoch = first_epoch; epoch < opt.epochs; ++epoch) {
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle(derive_seed(opt.seed, "shuffle", epoch));
    for (std::size_t i = N; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0, lr = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const auto step = static_cast<std::int64_t>(epoch * batches + b);
      lr = opt.optimizer.lr * opt.schedule.multiplier(static_cast<std::int64_t>(epoch), step, total_steps);
      const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b * opt.batch_size),
                                         order.begin() + static_cast<std::ptrdiff_t>(std::min(N, (b + 1) * opt.batch_size)));
      Rng dropout_rng(derive_seed(opt.seed, "dropout", static_cast<std::uint64_t>(step)));
      std::vector<nn::Var> acts;
      const nn::Var pred =
          model.forward(nn::Var(gather_rows(train_set.frames, idx)), true, &dropout_rng, &acts);
      require_finite(pred.value(), "model output");
      const Tensor mask = gather_rows(train_mask, idx);
      double wsum = 0.0;
      for (double w : mask.data()) wsum += w;
      if (wsum == 0.0) continue;  // batch made only of blink steps
      nn::Var loss = coordinate_loss(pred, gather_rows(train_targets, idx), mask, opt.loss);
      if (opt.sparsity_lambda > 0.0) loss = nn::add(loss, nn::l1_activation_penalty(acts, opt.sparsity_lambda));
      require_finite(loss.value(), "loss");
      optim.zero_grad();
      nn::backward(loss);
      auto params = model.parameters();
      for (const auto& p : params.params)
        if (!p.var.grad().empty()) require_finite(p.var.grad(), "gradient of " + p.name);
      optim.step(lr);
      loss_sum += loss.item();
    }

    Tensor val_pred = predict(model, val_set, opt.batch_size);
    const MetricReport rep = evaluate_predictions(val_pred, val_set.targets);
    Tensor val_norm = normalized_targets(val_pred, val_set.geometry);
    const double val_loss = coordinate_loss(nn::Var(val_norm), val_targets, val_mask, opt.loss).item();
    require_finite(Tensor({1}, val_loss), "validation loss");

    res.log.push_back({epoch + 1, loss_sum / static_cast<double>(batches), val_loss, rep.mean_distance, lr});
    if (rep.mean_distance < res.best_distance) {
      res.best_distance = rep.mean_distance;
      save(opt.out_dir / "best_distance.ckpt", epoch + 1);
    }
    if (val_loss < res.best_val_loss) {
      res.best_val_loss = val_loss;
      save(opt.out_dir / "best_val_loss.ckpt", epoch + 1);
    }
    save(final_path, epoch + 1);
    io::write_file_atomic(opt.out_dir / "log.csv", log_csv(res.log));
    ++res.epochs_run;
    if (opt.progress) {
      const auto& r = res.log.back();
      *opt.progress << "epoch " << r.epoch << "/" << opt.epochs << "  train_loss " << io::format_double(r.train_loss)
                    << "  val_loss " << io::format_double(r.val_loss) << "  val_dist "
                    << io::format_double(r.val_dist) << "\n";
    }
    if (opt.stop_after_epoch > 0 && epoch + 1 >= opt.stop_after_epoch) break;
  }
  return res;
}

} // namespace evtk::train
