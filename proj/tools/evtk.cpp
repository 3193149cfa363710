// SPDX-License-Identifier: Apache-2.0
//
// evtk: synthesize, augment, encode, train, evaluate, stream and ablate.
//
// Exit status: 0 on success, 1 on usage or configuration errors, 2 on
// runtime failures.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "evtk/evtk.hpp"

namespace {

using namespace evtk;
namespace fs = std::filesystem;

struct UsageError : ConfigError {
  using ConfigError::ConfigError;
};

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string cache_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool out_required) {
  cmd->add_option("--config", f.config_path, "Config file of 'key = value' lines")->check(CLI::ExistingFile);
  cmd->add_option("--set", f.overrides, "Override one config key (key=value); repeatable");
  cmd->add_option("--seed", f.seed, "Top-level seed (same as --set seed=N)");
  auto* out = cmd->add_option("--out", f.out, "Output directory");
  if (out_required) out->required();
  cmd->add_option("--cache-dir", f.cache_dir, "Window cache directory (default: $EVTK_CACHE_DIR)");
}

/// config file, then --set overrides, then --seed.
Config resolve(const CommonFlags& f, Config base = {}) {
  if (!f.config_path.empty()) base.load_file(f.config_path);
  for (const auto& kv : f.overrides) base.set_assignment(kv);
  if (f.seed) base.set("seed", std::to_string(*f.seed));
  return base;
}

void echo_config(const Config& c, const fs::path& out) {
  fs::create_directories(out);
  io::write_file_atomic(out / "config.txt", c.canonical());
}

std::unique_ptr<io::DiskCache> open_cache(const CommonFlags& f) {
  fs::path root = f.cache_dir.empty() ? io::cache_dir_from_env() : fs::path(f.cache_dir);
  if (root.empty()) return nullptr;
  return std::make_unique<io::DiskCache>(root);
}

int cmd_synth(const CommonFlags& f, std::optional<std::size_t> n) {
  Config c = resolve(f);
  if (n) c.set("synth.n", std::to_string(*n));
  const auto recs = synthesize(c);
  io::save_dataset(recs, f.out);
  echo_config(c, f.out);
  std::cout << "wrote " << recs.size() << " recordings to " << f.out << "\n";
  return 0;
}

int cmd_augment(const CommonFlags& f, const std::string& data) {
  const Config c = resolve(f);
  const auto expanded = augment::expand_dataset(io::load_dataset(data), augment_config_from(c));
  io::save_dataset(expanded, f.out);
  echo_config(c, f.out);
  std::cout << "wrote " << expanded.size() << " recordings to " << f.out << "\n";
  return 0;
}

int cmd_encode(const CommonFlags& f, const std::string& data) {
  const Config c = resolve(f);
  auto cache = open_cache(f);
  if (!cache) throw UsageError("encode needs --cache-dir or EVTK_CACHE_DIR");
  const auto recs = train::load_or_synthesize(c, data);
  std::cout << "recording,split,status,windows\n";
  for (bool val : {false, true}) {
    const auto opt = train::window_options_from(c, val);
    for (const auto& b : recs) {
      io::CacheStatus st;
      const auto set = train::load_or_encode(b, opt, cache.get(), &st);
      std::cout << b.id << "," << (val ? "val" : "train") << "," << (st == io::CacheStatus::hit ? "hit" : "miss")
                << "," << set.at("frames").dim(0) << "\n";
    }
  }
  if (!f.out.empty()) echo_config(c, f.out);
  return 0;
}

int cmd_train(const CommonFlags& f, const std::string& data, std::size_t stop_after, bool resume, bool quiet) {
  const Config c = resolve(f);
  auto cache = open_cache(f);
  const auto prepared = train::prepare_data(c, train::load_or_synthesize(c, data), cache.get());
  const auto s = train::run_training(c, prepared, f.out, quiet ? nullptr : &std::cerr, stop_after, resume);
  std::cout << "distance,p10\n"
            << io::format_double(s.best.mean_distance) << "," << io::format_double(s.best.p10) << "\n";
  return 0;
}

int cmd_eval(const CommonFlags& f, const std::string& checkpoint, const std::string& data, const std::string& split,
             const std::string& predictions_path) {
  Config ck_cfg;
  auto model = train::load_model(checkpoint, &ck_cfg);
  const Config c = resolve(f, ck_cfg);
  auto cache = open_cache(f);
  const auto recs = train::load_or_synthesize(c, data);
  std::vector<RecordingBundle> chosen;
  if (split == "all")
    chosen = recs;
  else if (split == "val")
    chosen = train::split_dataset(recs, c.real("data.val_fraction")).second;
  else
    throw UsageError("--split must be 'val' or 'all'");
  const auto ws = train::build_windows(chosen, train::window_options_from(c, true), cache.get());
  if (ws.size() == 0) throw Error("no evaluation windows (recordings shorter than window.val_length?)");
  const Tensor pred = train::predict(*model, ws);
  const auto rep = train::evaluate_predictions(pred, ws.targets);
  if (!predictions_path.empty()) {
    std::string csv = "recording,window_start,step,x,y\n";
    const std::size_t L = ws.length();
    for (std::size_t i = 0; i < ws.size(); ++i)
      for (std::size_t t = 0; t < L; ++t)
        csv += ws.recording[i] + "," + std::to_string(ws.start[i]) + "," + std::to_string(t) + "," +
               io::format_double(pred[(i * L + t) * 2]) + "," + io::format_double(pred[(i * L + t) * 2 + 1]) + "\n";
    io::write_file_atomic(predictions_path, csv);
  }
  if (!f.out.empty()) {
    echo_config(c, f.out);
    io::write_file_atomic(fs::path(f.out) / "metrics.csv", "distance,p10\n" + io::format_double(rep.mean_distance) +
                                                               "," + io::format_double(rep.p10) + "\n");
  }
  std::cout << io::format_double(rep.mean_distance) << "," << io::format_double(rep.p10) << "\n";
  return 0;
}

int cmd_stream(const CommonFlags& f, const std::string& checkpoint, const std::string& events_path,
               const std::string& predictions_path, std::int64_t origin, std::int64_t min_frames) {
  Config ck_cfg;
  auto model = train::load_model(checkpoint, &ck_cfg);
  const Config c = resolve(f, ck_cfg);
  auto* net = dynamic_cast<models::SpatiotemporalNet*>(model.get());
  if (!net) throw UsageError("stream needs a spatiotemporal checkpoint (the model must be causal)");
  if (representation_from(c) != encode::Representation::counts)
    throw UsageError("stream needs encode.representation = counts");
  const SensorGeometry g = geometry_from(c);
  const EventStream stream = io::read_events(events_path, g);
  const auto enc = encode_config_from(c);

  encode::CausalBinner binner(stream.geometry, enc.downsample, enc.frame_us, origin);
  models::StreamingRunner runner(*net);
  std::string csv = "frame,t_start_us,x,y\n";
  auto emit = [&](const encode::Frame& fr) {
    Tensor in = fr.counts.reshaped({1, fr.counts.dim(0), fr.counts.dim(1)});
    Tensor out = runner.push(in);
    out[0] *= static_cast<double>(stream.geometry.width);
    out[1] *= static_cast<double>(stream.geometry.height);
    csv += std::to_string(fr.index) + "," + std::to_string(binner.frame_start(fr.index)) + "," +
           io::format_double(out[0]) + "," + io::format_double(out[1]) + "\n";
  };
  for (const Event& e : stream.events)
    for (const auto& fr : binner.push(e)) emit(fr);
  for (const auto& fr : binner.finish(min_frames)) emit(fr);

  if (predictions_path.empty())
    std::cout << csv;
  else
    io::write_file_atomic(predictions_path, csv);
  if (!f.out.empty()) echo_config(c, f.out);
  return 0;
}

int cmd_ablate(const CommonFlags& f, const std::string& data, const std::vector<std::string>& only, bool quiet) {
  const Config c = resolve(f);
  echo_config(c, f.out);
  auto cache = open_cache(f);
  const auto rows = train::run_ablation(c, train::load_or_synthesize(c, data), f.out, only, cache.get(),
                                        quiet ? nullptr : &std::cerr);
  std::cout << train::ablation_csv(rows);
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera eye-tracking toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  CommonFlags f;
  std::string data, checkpoint, events, predictions, split = "val";
  std::optional<std::size_t> n;
  std::size_t stop_after = 0;
  std::int64_t origin = 0, min_frames = 0;
  bool resume = false, quiet = false;
  std::vector<std::string> only;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  add_common(synth, f, true);
  synth->add_option("--n", n, "Number of recordings (same as --set synth.n=N)");

  auto* aug = app.add_subcommand("augment", "Expand a dataset with augmented copies");
  add_common(aug, f, true);
  aug->add_option("--data", data, "Input dataset directory")->required()->check(CLI::ExistingDirectory);

  auto* enc = app.add_subcommand("encode", "Precompute window tensors into the cache");
  add_common(enc, f, false);
  enc->add_option("--data", data, "Dataset directory (default: synthesize from the config)")
      ->check(CLI::ExistingDirectory);

  auto* tr = app.add_subcommand("train", "Train a model; writes log.csv and checkpoints");
  add_common(tr, f, true);
  tr->add_option("--data", data, "Dataset directory (default: synthesize from the config)")
      ->check(CLI::ExistingDirectory);
  tr->add_option("--stop-after", stop_after, "Stop after this epoch (0: run all epochs)");
  tr->add_flag("--resume", resume, "Continue from <out>/final.ckpt");
  tr->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint; prints 'distance,p10'");
  add_common(ev, f, false);
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("--data", data, "Dataset directory (default: synthesize from the checkpoint config)")
      ->check(CLI::ExistingDirectory);
  ev->add_option("--split", split, "Recordings to evaluate: val or all");
  ev->add_option("--predictions", predictions, "Write per-step predictions to this CSV file");

  auto* st = app.add_subcommand("stream", "Frame-by-frame causal inference over an event file");
  add_common(st, f, false);
  st->add_option("--checkpoint", checkpoint, "Spatiotemporal checkpoint")->required()->check(CLI::ExistingFile);
  st->add_option("--events", events, "Event file (.bin or .csv)")->required()->check(CLI::ExistingFile);
  st->add_option("--predictions", predictions, "Output CSV (default: stdout)");
  st->add_option("--origin-us", origin, "Start time of frame 0");
  st->add_option("--frames", min_frames, "Pad the output to at least this many frames");

  auto* ab = app.add_subcommand("ablate", "Train the augmentation ablation grid; writes ablation.csv");
  add_common(ab, f, true);
  ab->add_option("--data", data, "Dataset directory (default: synthesize from the config)")
      ->check(CLI::ExistingDirectory);
  ab->add_option("--only", only, "Restrict to these settings; repeatable");
  ab->add_flag("--quiet", quiet, "No per-epoch progress on stderr");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(f, n);
    if (*aug) return cmd_augment(f, data);
    if (*enc) return cmd_encode(f, data);
    if (*tr) return cmd_train(f, data, stop_after, resume, quiet);
    if (*ev) return cmd_eval(f, checkpoint, data, split, predictions);
    if (*st) return cmd_stream(f, checkpoint, events, predictions, origin, min_frames);
    if (*ab) return cmd_ablate(f, data, only, quiet);
  } catch (const ConfigError& e) {
    std::cerr << "evtk: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "evtk: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
