// SPDX-License-Identifier: Apache-2.0
//
// Core value types: events, event streams, 100 Hz label tracks and the
// recording bundle pairing the two.
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace evtk {

struct SensorGeometry {
  std::uint32_t width = 640;
  std::uint32_t height = 480;

  friend bool operator==(const SensorGeometry&, const SensorGeometry&) = default;
};

/// One asynchronous brightness-change event. Timestamps are microseconds.
struct Event {
  std::int64_t t = 0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t p = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

struct EventStream {
  std::vector<Event> events;
  SensorGeometry geometry;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }

  friend bool operator==(const EventStream&, const EventStream&) = default;
};

struct LabelSample {
  double x = 0.0;
  double y = 0.0;
  int close = 0;

  friend bool operator==(const LabelSample&, const LabelSample&) = default;
};

/// Ground-truth pupil track sampled every 10 ms starting at t0.
struct LabelTrack {
  static constexpr std::int64_t kPeriodUs = 10'000;

  std::vector<LabelSample> samples;
  std::int64_t t0 = 0;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::int64_t time_of(std::ptrdiff_t j) const { return t0 + j * kPeriodUs; }
  /// End of the last label interval, exclusive.
  std::int64_t end_time() const {
    return t0 + static_cast<std::int64_t>(samples.size()) * kPeriodUs;
  }

  friend bool operator==(const LabelTrack&, const LabelTrack&) = default;
};

/// Events and labels of one recording. The label window [t0, end_time())
/// covers every event.
struct RecordingBundle {
  EventStream stream;
  LabelTrack labels;
  std::string id;

  friend bool operator==(const RecordingBundle&, const RecordingBundle&) = default;
};

struct Violation {
  std::size_t index = 0;
  std::string reason;
};

/// First invariant violation of the stream, or nullopt when it is valid.
inline std::optional<Violation> validate_stream(const EventStream& stream) {
  const auto& g = stream.geometry;
  if (g.width == 0 || g.height == 0) return Violation{0, "empty sensor geometry"};
  for (std::size_t i = 0; i < stream.events.size(); ++i) {
    const Event& e = stream.events[i];
    if (e.t < 0) return Violation{i, "negative timestamp"};
    if (i > 0 && e.t < stream.events[i - 1].t) return Violation{i, "timestamps decrease"};
    if (e.x >= g.width) return Violation{i, "x out of bounds"};
    if (e.y >= g.height) return Violation{i, "y out of bounds"};
    if (e.p != 1 && e.p != -1) return Violation{i, "polarity must be +-1"};
  }
  return std::nullopt;
}

inline std::optional<Violation> validate_labels(const LabelTrack& labels,
                                                const SensorGeometry& g) {
  if (labels.t0 < 0) return Violation{0, "negative label origin"};
  for (std::size_t j = 0; j < labels.samples.size(); ++j) {
    const LabelSample& s = labels.samples[j];
    if (!(s.x >= 0.0 && s.x <= g.width)) return Violation{j, "label x out of bounds"};
    if (!(s.y >= 0.0 && s.y <= g.height)) return Violation{j, "label y out of bounds"};
    if (s.close != 0 && s.close != 1) return Violation{j, "close flag must be 0 or 1"};
  }
  return std::nullopt;
}

/// Stream and label checks plus the coverage invariant: every event falls
/// inside the label window.
inline std::optional<Violation> validate_bundle(const RecordingBundle& bundle) {
  if (auto v = validate_stream(bundle.stream)) return v;
  if (auto v = validate_labels(bundle.labels, bundle.stream.geometry)) return v;
  const auto& ev = bundle.stream.events;
  if (!ev.empty()) {
    if (bundle.labels.empty()) return Violation{0, "events without labels"};
    if (ev.front().t < bundle.labels.t0) return Violation{0, "event precedes label window"};
    if (ev.back().t >= bundle.labels.end_time())
      return Violation{ev.size() - 1, "event after label window"};
  }
  return std::nullopt;
}

} // namespace evtk
