// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "evtk/synth.hpp"

using namespace evtk;
using namespace evtk::synth;

TEST(Trajectory, TenthOfASecondGivesTenSamples) {
  TrajectoryConfig c;
  c.duration_s = 0.1;
  EXPECT_EQ(generate_trajectory(c, {}).size(), 10u);
}

TEST(Trajectory, TooShortIsAnError) {
  TrajectoryConfig c;
  c.duration_s = 0.0;
  EXPECT_THROW(generate_trajectory(c, {}), ConfigError);
}

TEST(Trajectory, PureFixationWithoutJitterIsConstant) {
  TrajectoryConfig c;
  c.fixation_prob = 1.0;
  c.saccade_prob = c.pursuit_prob = c.blink_prob = 0.0;
  c.jitter_sigma = 0.0;
  c.seed = 5;
  const LabelTrack t = generate_trajectory(c, {});
  for (const auto& s : t.samples) {
    EXPECT_EQ(s.x, t.samples[0].x);
    EXPECT_EQ(s.y, t.samples[0].y);
    EXPECT_EQ(s.close, 0);
  }
}

TEST(Trajectory, SameSeedSameTrack) {
  TrajectoryConfig c;
  c.seed = 42;
  EXPECT_EQ(generate_trajectory(c, {}).samples, generate_trajectory(c, {}).samples);
  TrajectoryConfig d = c;
  d.seed = 43;
  EXPECT_NE(generate_trajectory(c, {}).samples, generate_trajectory(d, {}).samples);
}

TEST(Trajectory, StaysInsideMarginAndHasBlinks) {
  TrajectoryConfig c;
  c.duration_s = 20;
  c.seed = 9;
  const SensorGeometry g;
  const LabelTrack t = generate_trajectory(c, g);
  bool blink = false;
  for (const auto& s : t.samples) {
    EXPECT_GE(s.x, c.margin);
    EXPECT_LE(s.x, g.width - c.margin);
    EXPECT_GE(s.y, c.margin);
    EXPECT_LE(s.y, g.height - c.margin);
    blink |= s.close == 1;
  }
  EXPECT_TRUE(blink);
}

TEST(Events, ZeroRatesGiveEmptyStream) {
  TrajectoryConfig tc;
  const LabelTrack t = generate_trajectory(tc, {});
  EventGenConfig ec;
  ec.ring_rate = ec.noise_rate = 0;
  EXPECT_TRUE(generate_events(t, ec, {}).empty());
}

TEST(Events, FullyBlinkedTrackWithFullSuppressionIsEmpty) {
  LabelTrack t;
  t.samples.assign(100, LabelSample{320, 240, 1});
  EventGenConfig ec;
  ec.noise_rate = 0;
  ec.blink_suppression = 0;
  EXPECT_TRUE(generate_events(t, ec, {}).empty());
}

TEST(Events, RingCountWithinThreeSigmaOfPoissonMean) {
  LabelTrack t;
  t.samples.assign(100, LabelSample{320, 240, 0});  // 1 s
  EventGenConfig ec;
  ec.ring_rate = 10'000;
  ec.noise_rate = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ec.seed = seed;
    const double n = static_cast<double>(generate_events(t, ec, {}).size());
    // Poisson(10000): sigma = 100.
    EXPECT_LT(std::abs(n - 10'000.0), 300.0) << "seed " << seed;
  }
}

TEST(Events, RingEventsStayNearTheLabel) {
  TrajectoryConfig tc;
  tc.seed = 4;
  tc.duration_s = 2;
  const LabelTrack t = generate_trajectory(tc, {});
  EventGenConfig ec;
  ec.noise_rate = 0;
  ec.seed = 4;
  const EventStream s = generate_events(t, ec, {});
  ASSERT_FALSE(s.empty());
  const double bound = ec.ring_radius + 3 * ec.ring_jitter + 1;
  for (const Event& e : s.events) {
    const auto c = interpolate_label(t, static_cast<double>(e.t));
    // Timestamps are floored to whole microseconds; 1 us of motion is far
    // below a pixel at the simulated speeds.
    EXPECT_LE(std::hypot(e.x - c.x, e.y - c.y), bound + 0.1);
  }
}

TEST(Events, SortedValidAndDeterministic) {
  TrajectoryConfig tc;
  tc.seed = 8;
  EventGenConfig ec;
  ec.seed = 8;
  const RecordingBundle a = generate_recording(tc, ec, {}, "a");
  const RecordingBundle b = generate_recording(tc, ec, {}, "a");
  EXPECT_FALSE(validate_bundle(a).has_value());
  EXPECT_EQ(a.stream.events, b.stream.events);
}
