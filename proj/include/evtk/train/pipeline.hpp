// SPDX-License-Identifier: Apache-2.0
//
// End-to-end runs: data preparation, training and the augmentation
// ablation grid.
#pragma once

#include <algorithm>
#include <array>
#include <string>
#include <vector>

#include "evtk/augment.hpp"
#include "evtk/io/dataset_dir.hpp"
#include "evtk/train/trainer.hpp"

namespace evtk::train {

struct PreparedData {
  WindowSet train;
  WindowSet val;
};

/// Splits recordings, augments the training split only, and encodes both
/// splits into windows.
inline PreparedData prepare_data(const Config& c, const std::vector<RecordingBundle>& recordings,
                                 io::DiskCache* cache = nullptr) {
  auto [train_rec, val_rec] = split_dataset(recordings, c.real("data.val_fraction"));
  const auto expanded = augment::expand_dataset(train_rec, augment_config_from(c));
  return {build_windows(expanded, window_options_from(c, false), cache),
          build_windows(val_rec, window_options_from(c, true), cache)};
}

inline std::vector<RecordingBundle> load_or_synthesize(const Config& c, const fs::path& data_dir) {
  return data_dir.empty() ? synthesize(c) : io::load_dataset(data_dir);
}

struct RunSummary {
  TrainResult result;
  MetricReport best;  // best-distance checkpoint on the validation split
};

/// Trains one configuration into out_dir and re-evaluates the
/// best-distance checkpoint.
inline RunSummary run_training(const Config& c, const PreparedData& data, const fs::path& out_dir,
                               std::ostream* progress = nullptr, std::size_t stop_after = 0, bool resume = false) {
  TrainOptions opt = train_options_from(c);
  opt.out_dir = out_dir;
  opt.progress = progress;
  opt.stop_after_epoch = stop_after;
  opt.resume = resume;
  fs::create_directories(out_dir);
  io::write_file_atomic(out_dir / "config.txt", c.canonical());
  auto model = build_model(c);
  RunSummary s;
  s.result = train(*model, data.train, data.val, opt, c.canonical());
  auto best = load_model(out_dir / "best_distance.ckpt");
  s.best = evaluate(*best, data.val, opt.batch_size);
  return s;
}

struct AblationSetting {
  const char* name;
  bool temporal_shift, spatial_flip, event_deletion;
};

inline constexpr std::array<AblationSetting, 5> kAblationGrid{{
    {"w/o temporal shift", false, true, true},
    {"w/o flip", true, false, true},
    {"w/o deletion", true, true, false},
    {"full", true, true, true},
    {"none", false, false, false},
}};

struct AblationRow {
  std::string setting;
  MetricReport report;
};

inline std::string ablation_csv(const std::vector<AblationRow>& rows) {
  std::string out = "setting,distance,p10\n";
  for (const auto& r : rows)
    out += r.setting + "," + io::format_double(r.report.mean_distance) + "," + io::format_double(r.report.p10) + "\n";
  return out;
}

/// Trains every selected setting on the same recordings, split and seeds;
/// only the augmentation toggles differ. Writes ablation.csv to out_dir.
inline std::vector<AblationRow> run_ablation(const Config& base, const std::vector<RecordingBundle>& recordings,
                                             const fs::path& out_dir, const std::vector<std::string>& only = {},
                                             io::DiskCache* cache = nullptr, std::ostream* progress = nullptr) {
  std::vector<AblationRow> rows;
  for (const auto& s : kAblationGrid) {
    if (!only.empty() && std::find(only.begin(), only.end(), s.name) == only.end()) continue;
    Config c = base;
    c.set("augment.temporal_shift", s.temporal_shift ? "true" : "false");
    c.set("augment.spatial_flip", s.spatial_flip ? "true" : "false");
    c.set("augment.event_deletion", s.event_deletion ? "true" : "false");
    std::string dir = s.name;
    for (char& ch : dir)
      if (ch == ' ' || ch == '/') ch = '_';
    if (progress) *progress << "== " << s.name << "\n";
    const PreparedData data = prepare_data(c, recordings, cache);
    rows.push_back({s.name, run_training(c, data, out_dir / dir, progress).best});
    io::write_file_atomic(out_dir / "ablation.csv", ablation_csv(rows));
  }
  if (rows.empty()) throw ConfigError("no ablation setting selected");
  return rows;
}

} // namespace evtk::train
