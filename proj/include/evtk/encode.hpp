// SPDX-License-Identifier: Apache-2.0
//
// Event encodings: interpolated voxel grids, max-abs normalization, causal
// fixed-period binning and sliding-window sample extraction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "evtk/core/error.hpp"
#include "evtk/event_model.hpp"
#include "evtk/nn/tensor.hpp"

namespace evtk::encode {

enum class Normalization { max_abs, none };

inline std::string to_string(Normalization n) { return n == Normalization::max_abs ? "max_abs" : "none"; }

inline Normalization parse_normalization(const std::string& s) {
  if (s == "max_abs") return Normalization::max_abs;
  if (s == "none") return Normalization::none;
  throw ConfigError("unknown normalization '" + s + "'");
}

/// Per-frame input representation fed to the networks.
enum class Representation {
  voxel,  // num_bins interpolated channels per frame
  counts  // one channel of signed polarity counts (causal binning)
};

inline std::string to_string(Representation r) { return r == Representation::voxel ? "voxel" : "counts"; }

inline Representation parse_representation(const std::string& s) {
  if (s == "voxel") return Representation::voxel;
  if (s == "counts") return Representation::counts;
  throw ConfigError("unknown representation '" + s + "'");
}

struct EncodeConfig {
  std::size_t num_bins = 3;
  std::int64_t window_us = 300'000;
  double downsample = 0.125;
  Normalization normalization = Normalization::max_abs;
  std::int64_t frame_us = LabelTrack::kPeriodUs;

  void validate() const {
    if (num_bins < 1) throw ConfigError("num_bins must be at least 1");
    if (!(downsample > 0.0 && downsample <= 1.0)) throw ConfigError("downsample factor must lie in (0, 1]");
    if (window_us <= 0 || frame_us <= 0) throw ConfigError("window and frame lengths must be positive");
  }
};

/// floor(extent * s); a small tolerance absorbs representation error in s.
inline std::size_t scaled_extent(std::uint32_t extent, double s) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(extent * s + 1e-9)));
}

inline std::size_t scaled_cell(std::uint16_t coord, double s, std::size_t extent) {
  return std::min(static_cast<std::size_t>(std::floor(coord * s + 1e-9)), extent - 1);
}

struct TimeWindow {
  std::int64_t t_min = 0;
  std::int64_t t_max = 0;
};

/// T x H' x W' grid of signed, temporally interpolated event mass.
struct VoxelGrid {
  Tensor data;
  TimeWindow window;

  std::size_t bins() const { return data.dim(0); }
  std::size_t height() const { return data.dim(1); }
  std::size_t width() const { return data.dim(2); }
};

/// Divides every entry by the largest magnitude (no-op on an all-zero grid).
inline void normalize(Tensor& t) {
  const double m = max_abs(t);
  if (m > 0.0)
    for (double& v : t.data()) v /= m;
}

inline VoxelGrid normalize(VoxelGrid g) {
  normalize(g.data);
  return g;
}

/// Accumulates events into an existing T x H' x W' block.
///
/// Normalized time t* = T (t - t_min) / (t_max - t_min) is clamped to
/// [0, T-1]; the event adds p (1 - f) to bin floor(t*) and p f to the next
/// bin. With `include_end` false the window is half-open, which lets
/// adjacent windows tile a stream without double counting.
inline void accumulate_voxels(std::span<const Event> events, const TimeWindow& w, double downsample,
                              std::span<double> out, std::size_t bins, std::size_t height, std::size_t width,
                              bool include_end = true) {
  const double span = static_cast<double>(w.t_max - w.t_min);
  const double T = static_cast<double>(bins);
  for (const Event& e : events) {
    if (e.t < w.t_min || e.t > w.t_max || (!include_end && e.t == w.t_max)) continue;
    double ts = T * static_cast<double>(e.t - w.t_min) / span;
    ts = std::clamp(ts, 0.0, T - 1.0);
    const auto k = static_cast<std::size_t>(std::floor(ts));
    const double f = ts - static_cast<double>(k);
    const std::size_t cell = scaled_cell(e.y, downsample, height) * width + scaled_cell(e.x, downsample, width);
    out[k * height * width + cell] += e.p * (1.0 - f);
    if (f > 0.0) out[(k + 1) * height * width + cell] += e.p * f;
  }
}

/// Voxel grid of the events in [t_min, t_max] (both ends included).
inline VoxelGrid voxelize(const EventStream& stream, const EncodeConfig& cfg, const TimeWindow& window) {
  cfg.validate();
  if (window.t_max <= window.t_min) throw ConfigError("voxel window must satisfy t_max > t_min");
  const auto H = scaled_extent(stream.geometry.height, cfg.downsample);
  const auto W = scaled_extent(stream.geometry.width, cfg.downsample);
  VoxelGrid g{Tensor({cfg.num_bins, H, W}), window};
  accumulate_voxels(stream.events, window, cfg.downsample, g.data.data(), cfg.num_bins, H, W);
  if (cfg.normalization == Normalization::max_abs) normalize(g.data);
  return g;
}

/// Signed polarity sum per downsampled cell.
inline void accumulate_counts(std::span<const Event> events, double downsample, std::span<double> out,
                              std::size_t height, std::size_t width) {
  for (const Event& e : events)
    out[scaled_cell(e.y, downsample, height) * width + scaled_cell(e.x, downsample, width)] += e.p;
}

struct Frame {
  std::int64_t index = 0;
  Tensor counts;  // H' x W'
};

/// Streaming fixed-period binner.
///
/// Frame k holds the events with t in [origin + k P, origin + (k+1) P). A
/// frame is emitted once an event at or past its end arrives, or on
/// finish(); frames are contiguous from k = 0, so empty periods produce
/// empty frames. Single consumer, not shareable mid-stream.
class CausalBinner {
public:
  CausalBinner(SensorGeometry geometry, double downsample, std::int64_t period_us = LabelTrack::kPeriodUs,
               std::int64_t origin_us = 0)
      : downsample_(downsample), period_(period_us), origin_(origin_us),
        height_(scaled_extent(geometry.height, downsample)), width_(scaled_extent(geometry.width, downsample)),
        acc_({height_, width_}) {
    if (period_us <= 0) throw ConfigError("frame period must be positive");
  }

  /// Adds one event; returns the frames it completed (possibly none).
  std::vector<Frame> push(const Event& e) {
    if (e.t < origin_)
      throw Error("event " + std::to_string(count_) + " precedes the stream origin");
    if (count_ > 0 && e.t < last_t_) throw Error("unsorted input at event " + std::to_string(count_));
    std::vector<Frame> done;
    const std::int64_t k = (e.t - origin_) / period_;
    while (current_ < k) done.push_back(close_current());
    accumulate_counts(std::span<const Event>(&e, 1), downsample_, acc_.data(), height_, width_);
    last_t_ = e.t;
    ++count_;
    return done;
  }

  /// Flushes the open frame. With `min_frames` the output is padded with
  /// empty frames until that many frames have been emitted in total.
  std::vector<Frame> finish(std::int64_t min_frames = 0) {
    std::vector<Frame> done;
    if (count_ > 0 && !flushed_) {
      done.push_back(close_current());
      flushed_ = true;
    }
    while (current_ < min_frames) done.push_back(close_current());
    return done;
  }

  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::int64_t frame_start(std::int64_t k) const { return origin_ + k * period_; }

private:
  Frame close_current() {
    Frame f{current_++, Tensor({height_, width_})};
    std::swap(f.counts, acc_);
    return f;
  }

  double downsample_;
  std::int64_t period_, origin_;
  std::size_t height_, width_;
  Tensor acc_;
  std::int64_t current_ = 0, last_t_ = 0;
  std::size_t count_ = 0;
  bool flushed_ = false;
};

/// Offline counterpart of CausalBinner over a whole event sequence.
inline std::vector<Frame> causal_bin_all(std::span<const Event> events, SensorGeometry g, double downsample,
                                         std::int64_t period_us = LabelTrack::kPeriodUs, std::int64_t origin_us = 0) {
  CausalBinner b(g, downsample, period_us, origin_us);
  std::vector<Frame> out;
  for (const Event& e : events)
    for (auto& f : b.push(e)) out.push_back(std::move(f));
  for (auto& f : b.finish()) out.push_back(std::move(f));
  return out;
}

/// One training/evaluation window.
struct WindowSample {
  std::size_t start = 0;  // first label index
  Tensor frames;          // L x C x H' x W'
  Tensor targets;         // L x 2, pixels
  Tensor blink;           // L
};

inline std::size_t window_count(std::size_t labels, std::size_t length, std::size_t stride) {
  if (stride < 1) throw ConfigError("window stride must be at least 1");
  if (length < 1 || labels < length) return 0;
  return (labels - length) / stride + 1;
}

/// Index range of events with t in [lo, hi).
inline std::span<const Event> events_between(const EventStream& s, std::int64_t lo, std::int64_t hi) {
  auto cmp = [](const Event& e, std::int64_t t) { return e.t < t; };
  auto b = std::lower_bound(s.events.begin(), s.events.end(), lo, cmp);
  auto e = std::lower_bound(b, s.events.end(), hi, cmp);
  return {s.events.data() + (b - s.events.begin()), static_cast<std::size_t>(e - b)};
}

/// Encodes frame j of a recording: the events of label interval j.
inline void encode_frame(const RecordingBundle& b, const EncodeConfig& cfg, Representation rep, std::size_t j,
                         std::span<double> out, std::size_t H, std::size_t W) {
  const std::int64_t t0 = b.labels.time_of(static_cast<std::ptrdiff_t>(j));
  const std::int64_t t1 = t0 + cfg.frame_us;
  const auto ev = events_between(b.stream, t0, t1);
  if (rep == Representation::counts) {
    accumulate_counts(ev, cfg.downsample, out, H, W);
    return;
  }
  accumulate_voxels(ev, {t0, t1}, cfg.downsample, out, cfg.num_bins, H, W, false);
  if (cfg.normalization == Normalization::max_abs) {
    double m = 0.0;
    for (double v : out) m = std::max(m, std::abs(v));
    if (m > 0.0)
      for (double& v : out) v /= m;
  }
}

inline std::size_t channels_for(Representation rep, const EncodeConfig& cfg) {
  return rep == Representation::voxel ? cfg.num_bins : 1;
}

/// Sliding windows of `length` label steps every `stride` steps. Frame j of
/// a window encodes the events of its label interval, so a window of 30
/// steps spans 0.3 s.
inline std::vector<WindowSample> window_samples(const RecordingBundle& b, const EncodeConfig& cfg, Representation rep,
                                                std::size_t length, std::size_t stride) {
  cfg.validate();
  const std::size_t n = window_count(b.labels.size(), length, stride);
  const std::size_t C = channels_for(rep, cfg);
  const auto H = scaled_extent(b.stream.geometry.height, cfg.downsample);
  const auto W = scaled_extent(b.stream.geometry.width, cfg.downsample);
  const std::size_t frame_size = C * H * W;

  std::vector<WindowSample> out;
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    WindowSample s;
    s.start = w * stride;
    s.frames = Tensor({length, C, H, W});
    s.targets = Tensor({length, 2});
    s.blink = Tensor({length});
    for (std::size_t i = 0; i < length; ++i) {
      const std::size_t j = s.start + i;
      encode_frame(b, cfg, rep, j, s.frames.data().subspan(i * frame_size, frame_size), H, W);
      const LabelSample& l = b.labels.samples[j];
      s.targets[i * 2] = l.x;
      s.targets[i * 2 + 1] = l.y;
      s.blink[i] = l.close;
    }
    out.push_back(std::move(s));
  }
  return out;
}

} // namespace evtk::encode
