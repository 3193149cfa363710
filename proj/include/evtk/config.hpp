// SPDX-License-Identifier: Apache-2.0
//
// Flat key = value run configuration.
//
// Every key has a default; files and --set overrides may only assign known
// keys. The canonical dump (sorted "key = value" lines) is what gets echoed
// next to run outputs and hashed into cache fingerprints.
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "evtk/augment.hpp"
#include "evtk/encode.hpp"
#include "evtk/io/binary.hpp"
#include "evtk/models/knightpupil.hpp"
#include "evtk/models/spatiotemporal.hpp"
#include "evtk/synth.hpp"

namespace evtk {

class Config {
public:
  Config() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
  }

  /// Table of every known key and its default value.
  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> table{
        {"seed", "0"},
        {"model", "knightpupil"},
        // synthetic data
        {"synth.n", "8"},
        {"synth.duration_s", "4"},
        {"synth.width", "640"},
        {"synth.height", "480"},
        {"synth.ring_radius", "20"},
        {"synth.ring_rate", "20000"},
        {"synth.noise_rate", "2000"},
        {"synth.jitter_sigma", "0.5"},
        // split and augmentation
        {"data.val_fraction", "0.25"},
        {"augment.temporal_shift", "true"},
        {"augment.spatial_flip", "true"},
        {"augment.event_deletion", "true"},
        {"augment.shift_max_us", "200000"},
        {"augment.flip", "both"},
        {"augment.delete_p", "0.05"},
        // encoding and windows
        {"encode.representation", "auto"},
        {"encode.num_bins", "3"},
        {"encode.downsample", "0.125"},
        {"encode.normalization", "max_abs"},
        {"window.train_length", "30"},
        {"window.train_stride", "15"},
        {"window.val_length", "30"},
        {"window.val_stride", "30"},
        // KnightPupil
        {"kp.phi", "1.8"},
        {"kp.alpha", "1.2"},
        {"kp.beta", "1.1"},
        {"kp.gamma", "1.15"},
        {"kp.d0", "2"},
        {"kp.w0", "16"},
        {"kp.r0", "1"},
        {"kp.stages", "3"},
        {"kp.pool_h", "2"},
        {"kp.pool_w", "2"},
        {"kp.gru_hidden", "128"},
        {"kp.gru_layers", "2"},
        {"kp.gru_dropout", "0.3"},
        {"kp.head_dropout", "0.3"},
        // spatiotemporal network
        {"st.channels", "16,32,64"},
        {"st.temporal_kernel", "5"},
        {"st.spatial_stride", "2"},
        {"st.gn_groups", "4"},
        {"st.pool_h", "2"},
        {"st.pool_w", "2"},
        {"st.head_dropout", "0"},
        {"st.lambda", "0"},
        // optimization
        {"train.epochs", "600"},
        {"train.batch_size", "24"},
        {"train.optimizer", "adam"},
        {"train.lr", "0.001"},
        {"train.weight_decay", "0"},
        {"train.beta1", "0.9"},
        {"train.beta2", "0.999"},
        {"train.eps", "1e-8"},
        {"train.schedule", "step"},
        {"train.step_epochs", "200"},
        {"train.step_gamma", "0.5"},
        {"train.warmup_fraction", "0.025"},
        {"train.loss", "mse"},
    };
    return table;
  }

  void set(const std::string& key, const std::string& value) {
    if (!values_.count(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Parses "k=v" as given to --set.
  void set_assignment(std::string_view kv) {
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(kv) + "'");
    set(std::string(io::trim(kv.substr(0, eq))), std::string(io::trim(kv.substr(eq + 1))));
  }

  /// Lines of "key = value"; '#' starts a comment.
  void load_text(std::string_view text, const std::string& origin = "config") {
    std::size_t line_no = 0;
    for (auto line : io::split(text, '\n')) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
      line = io::trim(line);
      if (line.empty()) continue;
      try {
        set_assignment(line);
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& p) { load_text(io::read_file(p), p.string()); }

  const std::string& str(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double real(const std::string& key) const {
    double v = 0;
    if (!io::parse_number(str(key), v))
      throw ConfigError("config key '" + key + "' expects a number, got '" + str(key) + "'");
    return v;
  }

  std::int64_t integer(const std::string& key) const {
    std::int64_t v = 0;
    if (!io::parse_number(str(key), v))
      throw ConfigError("config key '" + key + "' expects an integer, got '" + str(key) + "'");
    return v;
  }

  std::size_t count(const std::string& key) const {
    const auto v = integer(key);
    if (v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  }

  bool flag(const std::string& key) const {
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError("config key '" + key + "' expects true/false, got '" + s + "'");
  }

  std::vector<std::size_t> count_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (auto part : io::split(str(key), ',')) {
      part = io::trim(part);
      if (part.empty()) continue;
      std::size_t v = 0;
      if (!io::parse_number(part, v))
        throw ConfigError("config key '" + key + "' expects a comma-separated list of integers");
      out.push_back(v);
    }
    return out;
  }

  std::uint64_t seed() const { return static_cast<std::uint64_t>(integer("seed")); }

  /// Sorted "key = value" lines covering every key.
  std::string canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  /// Canonical lines restricted to keys starting with one of the prefixes.
  std::string canonical(const std::vector<std::string>& prefixes) const {
    std::string out;
    for (const auto& [k, v] : values_)
      for (const auto& p : prefixes)
        if (k.rfind(p, 0) == 0) {
          out += k + " = " + v + "\n";
          break;
        }
    return out;
  }

private:
  std::map<std::string, std::string> values_;
};

inline SensorGeometry geometry_from(const Config& c) {
  const auto w = c.integer("synth.width"), h = c.integer("synth.height");
  if (w < 1 || h < 1 || w > 65535 || h > 65535) throw ConfigError("sensor size must lie in [1, 65535]");
  return {static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h)};
}

inline augment::AugmentConfig augment_config_from(const Config& c) {
  augment::AugmentConfig a;
  a.temporal_shift = c.flag("augment.temporal_shift");
  a.spatial_flip = c.flag("augment.spatial_flip");
  a.event_deletion = c.flag("augment.event_deletion");
  a.shift_max_us = c.integer("augment.shift_max_us");
  a.flip = augment::parse_flip_axes(c.str("augment.flip"));
  a.delete_p = c.real("augment.delete_p");
  a.seed = derive_seed(c.seed(), "augment");
  a.validate();
  return a;
}

inline encode::EncodeConfig encode_config_from(const Config& c) {
  encode::EncodeConfig e;
  e.num_bins = c.count("encode.num_bins");
  e.downsample = c.real("encode.downsample");
  e.normalization = encode::parse_normalization(c.str("encode.normalization"));
  e.validate();
  return e;
}

/// Voxel frames feed KnightPupil, signed counts the spatiotemporal net,
/// unless overridden.
inline encode::Representation representation_from(const Config& c) {
  const std::string& r = c.str("encode.representation");
  if (r == "auto") return c.str("model") == "spatiotemporal" ? encode::Representation::counts : encode::Representation::voxel;
  return encode::parse_representation(r);
}

inline models::KnightPupilConfig knightpupil_config_from(const Config& c) {
  models::KnightPupilConfig k;
  k.in_channels = encode::channels_for(representation_from(c), encode_config_from(c));
  k.scaling = {c.real("kp.phi"), c.real("kp.alpha"), c.real("kp.beta"), c.real("kp.gamma"),
               c.real("kp.d0"),  c.real("kp.w0"),    c.real("kp.r0")};
  k.stages = c.count("kp.stages");
  k.pool_h = c.count("kp.pool_h");
  k.pool_w = c.count("kp.pool_w");
  k.gru_hidden = c.count("kp.gru_hidden");
  k.gru_layers = c.count("kp.gru_layers");
  k.gru_dropout = c.real("kp.gru_dropout");
  k.head_dropout = c.real("kp.head_dropout");
  k.validate();
  return k;
}

inline models::SpatiotemporalConfig spatiotemporal_config_from(const Config& c) {
  models::SpatiotemporalConfig s;
  s.in_channels = encode::channels_for(representation_from(c), encode_config_from(c));
  s.channels = c.count_list("st.channels");
  s.temporal_kernel = c.count("st.temporal_kernel");
  s.spatial_stride = c.count("st.spatial_stride");
  s.gn_groups = c.count("st.gn_groups");
  s.pool_h = c.count("st.pool_h");
  s.pool_w = c.count("st.pool_w");
  s.head_dropout = c.real("st.head_dropout");
  s.validate();
  return s;
}

inline std::unique_ptr<models::GazeModel> build_model(const Config& c) {
  const std::string& m = c.str("model");
  const std::uint64_t seed = derive_seed(c.seed(), "model");
  if (m == "knightpupil") return std::make_unique<models::KnightPupil>(knightpupil_config_from(c), seed);
  if (m == "spatiotemporal") return std::make_unique<models::SpatiotemporalNet>(spatiotemporal_config_from(c), seed);
  throw ConfigError("unknown model '" + m + "' (expected knightpupil or spatiotemporal)");
}

/// Synthetic recordings "rec000", "rec001", ...; each has its own seeds.
inline std::vector<RecordingBundle> synthesize(const Config& c) {
  const SensorGeometry g = geometry_from(c);
  std::vector<RecordingBundle> out;
  const std::size_t n = c.count("synth.n");
  for (std::size_t i = 0; i < n; ++i) {
    synth::TrajectoryConfig traj;
    traj.duration_s = c.real("synth.duration_s");
    traj.jitter_sigma = c.real("synth.jitter_sigma");
    traj.seed = derive_seed(c.seed(), "synth/trajectory", i);
    synth::EventGenConfig ev;
    ev.ring_radius = c.real("synth.ring_radius");
    ev.ring_rate = c.real("synth.ring_rate");
    ev.noise_rate = c.real("synth.noise_rate");
    ev.seed = derive_seed(c.seed(), "synth/events", i);
    std::string id = std::to_string(i);
    if (id.size() < 3) id.insert(0, 3 - id.size(), '0');
    out.push_back(synth::generate_recording(traj, ev, g, "rec" + id));
  }
  return out;
}

} // namespace evtk
