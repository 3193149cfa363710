// SPDX-License-Identifier: Apache-2.0
//
// Synthetic pupil trajectories and a ring-of-contrast event simulator.
//
// The trajectory is a sequence of segments (fixation, saccade, smooth pursuit,
// blink) drawn from a categorical mix. Events are emitted on a ring around the
// interpolated pupil centre as a Poisson process, plus uniform background
// noise. The simulator is deliberately crude; it only has to be consistent
// with its own labels.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <iterator>
#include <numbers>
#include <string>

#include "evtk/core/error.hpp"
#include "evtk/core/rng.hpp"
#include "evtk/event_model.hpp"

namespace evtk::synth {

struct TrajectoryConfig {
  double duration_s = 4.0;
  double fixation_prob = 0.35;
  double saccade_prob = 0.30;
  double pursuit_prob = 0.25;
  double blink_prob = 0.10;
  double saccade_peak_speed = 2000.0;  // px/s
  double pursuit_amplitude = 80.0;     // px
  double pursuit_frequency = 0.5;      // Hz
  double jitter_sigma = 0.5;           // px, added to every label
  double margin = 40.0;                // px kept free on every side
  std::uint64_t seed = 0;

  void validate(const SensorGeometry& g) const {
    const double sum = fixation_prob + saccade_prob + pursuit_prob + blink_prob;
    if (fixation_prob < 0 || saccade_prob < 0 || pursuit_prob < 0 || blink_prob < 0)
      throw ConfigError("segment probabilities must be non-negative");
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("segment probabilities must sum to 1");
    if (!(duration_s > 0.0)) throw ConfigError("duration must be positive");
    if (saccade_peak_speed <= 0.0) throw ConfigError("saccade speed must be positive");
    if (jitter_sigma < 0.0 || pursuit_amplitude < 0.0 || pursuit_frequency < 0.0)
      throw ConfigError("jitter and pursuit parameters must be non-negative");
    if (margin < 0.0 || 2.0 * margin >= g.width || 2.0 * margin >= g.height)
      throw ConfigError("margin leaves no room on the sensor");
  }
};

struct EventGenConfig {
  double ring_radius = 20.0;       // px
  double ring_jitter = 1.0;        // px, radial sigma (truncated at 3 sigma)
  double ring_rate = 20'000.0;     // events/s
  double noise_rate = 2'000.0;     // events/s
  double blink_suppression = 0.1;  // ring-rate multiplier while close = 1
  std::uint64_t seed = 0;

  void validate() const {
    if (!(ring_radius > 0.0)) throw ConfigError("ring radius must be positive");
    if (ring_jitter < 0.0) throw ConfigError("ring jitter must be non-negative");
    if (ring_rate < 0.0 || noise_rate < 0.0) throw ConfigError("event rates must be non-negative");
    if (blink_suppression < 0.0 || blink_suppression > 1.0)
      throw ConfigError("blink suppression must lie in [0, 1]");
  }
};

namespace detail {

enum class Segment { fixation, saccade, pursuit, blink };

struct Point {
  double x, y;
};

class TrajectoryState {
public:
  TrajectoryState(const TrajectoryConfig& cfg, const SensorGeometry& g, Rng& rng)
      : cfg_(cfg), rng_(rng), lo_{cfg.margin, cfg.margin},
        hi_{g.width - cfg.margin, g.height - cfg.margin} {
    pos_ = {rng_.uniform(lo_.x, hi_.x), rng_.uniform(lo_.y, hi_.y)};
    begin_segment(0.0);
  }

  /// Pupil position and blink flag at time tau (seconds, non-decreasing).
  std::pair<Point, int> at(double tau) {
    while (tau >= seg_end_) {
      pos_ = position_in_segment(seg_end_);
      begin_segment(seg_end_);
    }
    return {position_in_segment(tau), kind_ == Segment::blink ? 1 : 0};
  }

  Point clamp(Point p) const {
    return {std::clamp(p.x, lo_.x, hi_.x), std::clamp(p.y, lo_.y, hi_.y)};
  }

private:
  void begin_segment(double start) {
    seg_start_ = start;
    origin_ = pos_;
    const double u = rng_.uniform();
    const std::array<double, 3> edges{cfg_.fixation_prob, cfg_.fixation_prob + cfg_.saccade_prob,
                                      cfg_.fixation_prob + cfg_.saccade_prob + cfg_.pursuit_prob};
    if (u < edges[0]) {
      kind_ = Segment::fixation;
      seg_end_ = start + rng_.uniform(0.15, 0.5);
    } else if (u < edges[1]) {
      kind_ = Segment::saccade;
      target_ = {rng_.uniform(lo_.x, hi_.x), rng_.uniform(lo_.y, hi_.y)};
      const double dist = std::hypot(target_.x - origin_.x, target_.y - origin_.y);
      // Raised-cosine profile: peak speed = dist * pi / (2 * duration).
      const double dur = dist * std::numbers::pi / (2.0 * cfg_.saccade_peak_speed);
      seg_end_ = start + std::max(dur, 0.01);
    } else if (u < edges[2]) {
      kind_ = Segment::pursuit;
      const double angle = rng_.uniform(0.0, 2.0 * std::numbers::pi);
      direction_ = {std::cos(angle), std::sin(angle)};
      seg_end_ = start + rng_.uniform(0.5, 1.5);
    } else {
      kind_ = Segment::blink;
      seg_end_ = start + rng_.uniform(0.1, 0.25);
    }
  }

  Point position_in_segment(double tau) const {
    const double s = tau - seg_start_;
    switch (kind_) {
    case Segment::saccade: {
      const double frac = std::clamp(s / (seg_end_ - seg_start_), 0.0, 1.0);
      const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * frac));
      return {origin_.x + w * (target_.x - origin_.x), origin_.y + w * (target_.y - origin_.y)};
    }
    case Segment::pursuit: {
      const double a = cfg_.pursuit_amplitude *
                       std::sin(2.0 * std::numbers::pi * cfg_.pursuit_frequency * s);
      return clamp({origin_.x + a * direction_.x, origin_.y + a * direction_.y});
    }
    case Segment::fixation:
    case Segment::blink:
      break;
    }
    return origin_;
  }

  const TrajectoryConfig& cfg_;
  Rng& rng_;
  Point lo_, hi_;
  Point pos_{}, origin_{}, target_{}, direction_{};
  Segment kind_ = Segment::fixation;
  double seg_start_ = 0.0, seg_end_ = 0.0;
};

} // namespace detail

/// 100 Hz label track of ceil(duration * 100) samples starting at t0 = 0.
inline LabelTrack generate_trajectory(const TrajectoryConfig& cfg, const SensorGeometry& geometry) {
  cfg.validate(geometry);
  const double exact = cfg.duration_s * 1e6 / static_cast<double>(LabelTrack::kPeriodUs);
  const auto n = static_cast<std::int64_t>(std::ceil(exact - 1e-9));
  if (n < 1) throw ConfigError("duration too short for one label sample");

  Rng rng(cfg.seed);
  Rng jitter_rng(splitmix64(cfg.seed ^ 0x6a09e667f3bcc908ULL));
  detail::TrajectoryState state(cfg, geometry, rng);

  LabelTrack track;
  track.samples.reserve(static_cast<std::size_t>(n));
  for (std::int64_t j = 0; j < n; ++j) {
    const double tau = static_cast<double>(j * LabelTrack::kPeriodUs) * 1e-6;
    auto [p, close] = state.at(tau);
    if (cfg.jitter_sigma > 0.0) {
      p.x += jitter_rng.normal(0.0, cfg.jitter_sigma);
      p.y += jitter_rng.normal(0.0, cfg.jitter_sigma);
    }
    p = state.clamp(p);
    track.samples.push_back({p.x, p.y, close});
  }
  return track;
}

/// Label position linearly interpolated at time t (held constant past the
/// last sample).
inline detail::Point interpolate_label(const LabelTrack& track, double t_us) {
  const double u = (t_us - static_cast<double>(track.t0)) / LabelTrack::kPeriodUs;
  const auto last = static_cast<std::ptrdiff_t>(track.size()) - 1;
  auto j = static_cast<std::ptrdiff_t>(std::floor(u));
  if (j < 0) return {track.samples.front().x, track.samples.front().y};
  if (j >= last) return {track.samples.back().x, track.samples.back().y};
  const double f = u - static_cast<double>(j);
  const auto& a = track.samples[static_cast<std::size_t>(j)];
  const auto& b = track.samples[static_cast<std::size_t>(j + 1)];
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
}

/// Ring events around the pupil plus background noise over the label window,
/// sorted by timestamp.
inline EventStream generate_events(const LabelTrack& track, const EventGenConfig& cfg,
                                   const SensorGeometry& geometry) {
  cfg.validate();
  if (track.empty()) throw ConfigError("cannot generate events for an empty track");

  EventStream out;
  out.geometry = geometry;
  const double t_begin = static_cast<double>(track.t0);
  const double t_end = static_cast<double>(track.end_time());
  const auto max_x = static_cast<double>(geometry.width - 1);
  const auto max_y = static_cast<double>(geometry.height - 1);

  std::vector<Event> ring;
  if (cfg.ring_rate > 0.0) {
    Rng rng(derive_seed(cfg.seed, "ring"));
    const double rate_per_us = cfg.ring_rate * 1e-6;
    for (double t = t_begin + rng.exponential(rate_per_us); t < t_end;
         t += rng.exponential(rate_per_us)) {
      const auto j = static_cast<std::size_t>((t - t_begin) / LabelTrack::kPeriodUs);
      const LabelSample& s = track.samples[std::min(j, track.size() - 1)];
      // Draws are made unconditionally so the sequence does not depend on
      // the suppression factor.
      const double keep = rng.uniform();
      const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
      const double radial =
          std::clamp(rng.normal(0.0, cfg.ring_jitter), -3.0 * cfg.ring_jitter, 3.0 * cfg.ring_jitter);
      const double coin = rng.uniform();
      if (s.close == 1 && keep >= cfg.blink_suppression) continue;

      const auto c = interpolate_label(track, t);
      const double r = cfg.ring_radius + radial;
      const double nx = std::cos(theta), ny = std::sin(theta);
      Event e;
      e.t = static_cast<std::int64_t>(std::floor(t));
      e.x = static_cast<std::uint16_t>(std::clamp(std::round(c.x + r * nx), 0.0, max_x));
      e.y = static_cast<std::uint16_t>(std::clamp(std::round(c.y + r * ny), 0.0, max_y));

      // The leading edge of a moving dark pupil darkens (p = -1), the
      // trailing edge brightens. Without motion the polarity is random.
      const auto j1 = std::min(j + 1, track.size() - 1);
      const auto j0 = j1 == 0 ? 0 : j1 - 1;
      const double vx = (track.samples[j1].x - track.samples[j0].x) * 100.0;
      const double vy = (track.samples[j1].y - track.samples[j0].y) * 100.0;
      const double along = vx * nx + vy * ny;
      if (std::hypot(vx, vy) > 50.0)
        e.p = along > 0.0 ? std::int8_t{-1} : std::int8_t{1};
      else
        e.p = coin < 0.5 ? std::int8_t{-1} : std::int8_t{1};
      ring.push_back(e);
    }
  }

  std::vector<Event> noise;
  if (cfg.noise_rate > 0.0) {
    Rng rng(derive_seed(cfg.seed, "noise"));
    const double rate_per_us = cfg.noise_rate * 1e-6;
    for (double t = t_begin + rng.exponential(rate_per_us); t < t_end;
         t += rng.exponential(rate_per_us)) {
      Event e;
      e.t = static_cast<std::int64_t>(std::floor(t));
      e.x = static_cast<std::uint16_t>(rng.below(geometry.width));
      e.y = static_cast<std::uint16_t>(rng.below(geometry.height));
      e.p = rng.uniform() < 0.5 ? std::int8_t{-1} : std::int8_t{1};
      noise.push_back(e);
    }
  }

  out.events.reserve(ring.size() + noise.size());
  std::merge(ring.begin(), ring.end(), noise.begin(), noise.end(), std::back_inserter(out.events),
             [](const Event& a, const Event& b) { return a.t < b.t; });
  return out;
}

/// Generates one synthetic recording (labels + matching events).
inline RecordingBundle generate_recording(const TrajectoryConfig& traj, const EventGenConfig& ev,
                                          const SensorGeometry& geometry, std::string id) {
  RecordingBundle b;
  b.labels = generate_trajectory(traj, geometry);
  b.stream = generate_events(b.labels, ev, geometry);
  b.id = std::move(id);
  return b;
}

} // namespace evtk::synth
