// SPDX-License-Identifier: Apache-2.0
//
// Event-stream augmentations that keep labels consistent: temporal shift,
// spatial flip and random event deletion, plus dataset expansion.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "evtk/core/error.hpp"
#include "evtk/core/rng.hpp"
#include "evtk/event_model.hpp"

namespace evtk::augment {

enum class FlipAxes { none, horizontal, vertical, both };

inline std::string to_string(FlipAxes a) {
  switch (a) {
  case FlipAxes::none: return "none";
  case FlipAxes::horizontal: return "horizontal";
  case FlipAxes::vertical: return "vertical";
  case FlipAxes::both: return "both";
  }
  return "none";
}

inline FlipAxes parse_flip_axes(const std::string& s) {
  if (s == "none") return FlipAxes::none;
  if (s == "horizontal") return FlipAxes::horizontal;
  if (s == "vertical") return FlipAxes::vertical;
  if (s == "both") return FlipAxes::both;
  throw ConfigError("unknown flip axes '" + s + "'");
}

struct AugmentConfig {
  std::int64_t shift_max_us = 200'000;
  FlipAxes flip = FlipAxes::both;
  double delete_p = 0.05;
  bool temporal_shift = true;
  bool spatial_flip = true;
  bool event_deletion = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (shift_max_us < 0) throw ConfigError("shift range must be non-negative");
    if (!(delete_p >= 0.0 && delete_p <= 1.0)) throw ConfigError("deletion probability must lie in [0, 1]");
  }
};

/// Floor division toward negative infinity.
constexpr std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && ((a < 0) != (b < 0))) ? q - 1 : q;
}

/// Label-index offset for a shift: floor(delta / 10 ms).
constexpr std::int64_t label_offset(std::int64_t delta_us) {
  return floor_div(delta_us, LabelTrack::kPeriodUs);
}

/// Shifts event timestamps by delta (quantized down to the 10 ms label grid)
/// and re-indexes labels so that output label j is input label j + k,
/// k = floor(delta / 10 ms).
///
/// Every label keeps the events it was paired with: labels move in time by
/// the same quantized delta as the events, so the output track starts at
/// t0 + 2 k P. Labels with no source sample, and anything that would land
/// before t = 0, are truncated together with the events outside the
/// remaining label window.
inline RecordingBundle temporal_shift(const RecordingBundle& in, std::int64_t delta_us) {
  constexpr std::int64_t P = LabelTrack::kPeriodUs;
  const std::int64_t k = label_offset(delta_us);
  const std::int64_t shift = k * P;
  const auto n = static_cast<std::int64_t>(in.labels.size());

  // Output index j holds input label j + k; valid while 0 <= j + k < n.
  std::int64_t j_begin = std::max<std::int64_t>(0, -k);
  const std::int64_t j_end = n - k;
  const std::int64_t origin = in.labels.t0 + 2 * shift;  // time of output index 0
  // Drop leading labels that would start before t = 0.
  if (origin + j_begin * P < 0) j_begin = floor_div(-origin + P - 1, P);
  if (j_begin >= j_end) throw Error("temporal shift of " + std::to_string(delta_us) + " us leaves no overlap");

  RecordingBundle out;
  out.id = in.id;
  out.stream.geometry = in.stream.geometry;
  out.labels.t0 = origin + j_begin * P;
  out.labels.samples.assign(in.labels.samples.begin() + (j_begin + k), in.labels.samples.begin() + (j_end + k));

  const std::int64_t lo = out.labels.t0, hi = out.labels.end_time();
  for (const Event& e : in.stream.events) {
    const std::int64_t t = e.t + shift;
    if (t < lo || t >= hi) continue;
    Event s = e;
    s.t = t;
    out.stream.events.push_back(s);
  }
  return out;
}

/// x' = W - x, y' = H - y on events and labels. Event coordinates are then
/// clamped into the sensor (only x = 0 / y = 0 are affected).
inline RecordingBundle spatial_flip(const RecordingBundle& in, bool horizontal, bool vertical) {
  RecordingBundle out = in;
  const auto W = static_cast<std::int64_t>(in.stream.geometry.width);
  const auto H = static_cast<std::int64_t>(in.stream.geometry.height);
  for (Event& e : out.stream.events) {
    if (horizontal) e.x = static_cast<std::uint16_t>(std::min<std::int64_t>(W - e.x, W - 1));
    if (vertical) e.y = static_cast<std::uint16_t>(std::min<std::int64_t>(H - e.y, H - 1));
  }
  for (LabelSample& s : out.labels.samples) {
    if (horizontal) s.x = static_cast<double>(W) - s.x;
    if (vertical) s.y = static_cast<double>(H) - s.y;
  }
  return out;
}

inline RecordingBundle spatial_flip(const RecordingBundle& in, FlipAxes axes) {
  return spatial_flip(in, axes == FlipAxes::horizontal || axes == FlipAxes::both,
                      axes == FlipAxes::vertical || axes == FlipAxes::both);
}

/// Removes each event independently with probability p. One uniform draw
/// per event in stream order; labels are untouched.
inline RecordingBundle delete_events(const RecordingBundle& in, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("deletion probability must lie in [0, 1]");
  RecordingBundle out;
  out.id = in.id;
  out.labels = in.labels;
  out.stream.geometry = in.stream.geometry;
  out.stream.events.reserve(in.stream.size());
  Rng rng(seed);
  for (const Event& e : in.stream.events)
    if (rng.uniform() >= p) out.stream.events.push_back(e);
  return out;
}

/// Originals plus one independently augmented copy per enabled technique.
/// Copies are tagged "+shift", "+flip" and "+delete" in their id.
inline std::vector<RecordingBundle> expand_dataset(const std::vector<RecordingBundle>& bundles,
                                                   const AugmentConfig& cfg) {
  cfg.validate();
  std::vector<RecordingBundle> out;
  for (std::size_t i = 0; i < bundles.size(); ++i) {
    const RecordingBundle& b = bundles[i];
    out.push_back(b);
    if (cfg.temporal_shift) {
      Rng rng(derive_seed(cfg.seed, "augment/shift", i));
      const auto range = static_cast<double>(cfg.shift_max_us);
      const auto delta = static_cast<std::int64_t>(std::llround(rng.uniform(-range, range)));
      out.push_back(temporal_shift(b, delta));
      out.back().id += "+shift";
    }
    if (cfg.spatial_flip && cfg.flip != FlipAxes::none) {
      out.push_back(spatial_flip(b, cfg.flip));
      out.back().id += "+flip";
    }
    if (cfg.event_deletion) {
      out.push_back(delete_events(b, cfg.delete_p, derive_seed(cfg.seed, "augment/delete", i)));
      out.back().id += "+delete";
    }
  }
  return out;
}

} // namespace evtk::augment
