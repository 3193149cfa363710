// SPDX-License-Identifier: Apache-2.0
//
// Window datasets: encoding recordings into window tensors (optionally via
// the disk cache), splitting and batching.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "evtk/encode.hpp"
#include "evtk/io/binary.hpp"
#include "evtk/io/cache.hpp"

namespace evtk::train {

struct WindowOptions {
  encode::EncodeConfig encode;
  encode::Representation representation = encode::Representation::voxel;
  std::size_t length = 30;
  std::size_t stride = 15;

  /// Every field that influences the encoded tensors.
  std::string canonical() const {
    return "downsample = " + io::format_double(encode.downsample) + "\n" +
           "frame_us = " + std::to_string(encode.frame_us) + "\n" +
           "length = " + std::to_string(length) + "\n" +
           "normalization = " + encode::to_string(encode.normalization) + "\n" +
           "num_bins = " + std::to_string(encode.num_bins) + "\n" +
           "representation = " + encode::to_string(representation) + "\n" +
           "stride = " + std::to_string(stride) + "\n" +
           "window_us = " + std::to_string(encode.window_us) + "\n";
  }
};

/// Windows stacked along the first axis.
struct WindowSet {
  SensorGeometry geometry;
  Tensor frames;   // N x L x C x H x W
  Tensor targets;  // N x L x 2, pixels
  Tensor blink;    // N x L
  std::vector<std::string> recording;
  std::vector<std::size_t> start;

  std::size_t size() const { return recording.size(); }
  std::size_t length() const { return frames.empty() ? 0 : frames.dim(1); }
};

/// Content hash of a recording (events, labels and geometry).
inline std::string bundle_digest(const RecordingBundle& b) {
  std::string bytes;
  io::put_le<std::uint32_t>(bytes, b.stream.geometry.width);
  io::put_le<std::uint32_t>(bytes, b.stream.geometry.height);
  io::put_le<std::int64_t>(bytes, b.labels.t0);
  for (const Event& e : b.stream.events) {
    io::put_le<std::int64_t>(bytes, e.t);
    io::put_le<std::uint16_t>(bytes, e.x);
    io::put_le<std::uint16_t>(bytes, e.y);
    io::put_le<std::int8_t>(bytes, e.p);
  }
  for (const LabelSample& s : b.labels.samples) {
    io::put_f64(bytes, s.x);
    io::put_f64(bytes, s.y);
    io::put_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(s.close));
  }
  return io::fingerprint(bytes);
}

/// Encodes all windows of one recording into "frames", "targets", "blink"
/// and "start" tensors.
inline io::TensorSet encode_recording(const RecordingBundle& b, const WindowOptions& opt) {
  auto samples = encode::window_samples(b, opt.encode, opt.representation, opt.length, opt.stride);
  const std::size_t C = encode::channels_for(opt.representation, opt.encode);
  const auto H = encode::scaled_extent(b.stream.geometry.height, opt.encode.downsample);
  const auto W = encode::scaled_extent(b.stream.geometry.width, opt.encode.downsample);
  const std::size_t n = samples.size(), L = opt.length;
  io::TensorSet set;
  set.attrs["recording"] = b.id;
  Tensor frames({n, L, C, H, W}), targets({n, L, 2}), blink({n, L}), start({n});
  const std::size_t fs = L * C * H * W;
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(samples[i].frames.ptr(), fs, frames.ptr() + i * fs);
    std::copy_n(samples[i].targets.ptr(), 2 * L, targets.ptr() + i * 2 * L);
    std::copy_n(samples[i].blink.ptr(), L, blink.ptr() + i * L);
    start[i] = static_cast<double>(samples[i].start);
  }
  set.tensors["frames"] = std::move(frames);
  set.tensors["targets"] = std::move(targets);
  set.tensors["blink"] = std::move(blink);
  set.tensors["start"] = std::move(start);
  return set;
}

inline io::CacheKey cache_key(const RecordingBundle& b, const WindowOptions& opt) {
  return {b.id, io::fingerprint("cache_format = " + std::to_string(io::kCacheFormatVersion) + "\n" + opt.canonical() +
                                "content = " + bundle_digest(b) + "\n")};
}

/// Encodes through the cache when one is given.
inline io::TensorSet load_or_encode(const RecordingBundle& b, const WindowOptions& opt, io::DiskCache* cache,
                                    io::CacheStatus* status = nullptr) {
  if (!cache) {
    if (status) *status = io::CacheStatus::miss;
    return encode_recording(b, opt);
  }
  auto res = cache->get_or_build(cache_key(b, opt), [&] { return encode_recording(b, opt); }, opt.canonical());
  if (status) *status = res.status;
  return std::move(res.tensors);
}

inline WindowSet build_windows(const std::vector<RecordingBundle>& bundles, const WindowOptions& opt,
                               io::DiskCache* cache = nullptr) {
  WindowSet ws;
  std::vector<io::TensorSet> parts;
  std::size_t total = 0;
  for (const auto& b : bundles) {
    if (!bundles.empty() && !(b.stream.geometry == bundles.front().stream.geometry))
      throw ConfigError("recordings in one dataset must share the sensor geometry");
    parts.push_back(load_or_encode(b, opt, cache));
    total += parts.back().at("frames").dim(0);
  }
  if (bundles.empty()) return ws;
  ws.geometry = bundles.front().stream.geometry;
  const Shape& fshape = parts.front().at("frames").shape();
  ws.frames = Tensor({total, fshape[1], fshape[2], fshape[3], fshape[4]});
  ws.targets = Tensor({total, fshape[1], 2});
  ws.blink = Tensor({total, fshape[1]});
  std::size_t off = 0;
  for (std::size_t r = 0; r < parts.size(); ++r) {
    const auto& p = parts[r];
    const std::size_t n = p.at("frames").dim(0);
    const std::size_t fs = ws.frames.size() / std::max<std::size_t>(total, 1);
    std::copy_n(p.at("frames").ptr(), n * fs, ws.frames.ptr() + off * fs);
    std::copy_n(p.at("targets").ptr(), n * fshape[1] * 2, ws.targets.ptr() + off * fshape[1] * 2);
    std::copy_n(p.at("blink").ptr(), n * fshape[1], ws.blink.ptr() + off * fshape[1]);
    for (std::size_t i = 0; i < n; ++i) {
      ws.recording.push_back(bundles[r].id);
      ws.start.push_back(static_cast<std::size_t>(p.at("start")[i]));
    }
    off += n;
  }
  return ws;
}

/// Rows `idx` of a [N, ...] tensor.
inline Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& idx) {
  Shape s = t.shape();
  const std::size_t row = t.size() / s[0];
  s[0] = idx.size();
  Tensor out(s);
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy_n(t.ptr() + idx[i] * row, row, out.ptr() + i * row);
  return out;
}

/// Pixel targets divided by the sensor extent.
inline Tensor normalized_targets(const Tensor& px, const SensorGeometry& g) {
  Tensor out = px;
  for (std::size_t i = 0; i < out.size(); i += 2) {
    out[i] /= static_cast<double>(g.width);
    out[i + 1] /= static_cast<double>(g.height);
  }
  return out;
}

inline void to_pixels(Tensor& normalized, const SensorGeometry& g) {
  for (std::size_t i = 0; i < normalized.size(); i += 2) {
    normalized[i] *= static_cast<double>(g.width);
    normalized[i + 1] *= static_cast<double>(g.height);
  }
}

/// Steps that enter the loss: 1 where the eye is open.
inline Tensor open_eye_mask(const Tensor& blink) {
  Tensor m(blink.shape());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = blink[i] == 0.0 ? 1.0 : 0.0;
  return m;
}

/// The last ceil(n * fraction) recordings (at least one, at most n - 1)
/// form the validation split.
inline std::pair<std::vector<RecordingBundle>, std::vector<RecordingBundle>> split_dataset(
    const std::vector<RecordingBundle>& all, double val_fraction) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("validation fraction must lie in (0, 1)");
  if (all.size() < 2) throw ConfigError("need at least two recordings to split into train and validation");
  auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(all.size()) - 1e-9));
  n_val = std::clamp<std::size_t>(n_val, 1, all.size() - 1);
  const auto cut = all.begin() + static_cast<std::ptrdiff_t>(all.size() - n_val);
  return {{all.begin(), cut}, {cut, all.end()}};
}

} // namespace evtk::train
