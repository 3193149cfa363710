// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "evtk/config.hpp"

namespace test {

/// Assignments for a small dataset and small networks; a run takes seconds.
inline std::vector<std::string> tiny_assignments(const std::string& model = "knightpupil") {
  return {"model=" + model,
          "synth.n=4",
          "synth.duration_s=1",
          "synth.ring_rate=5000",
          "synth.noise_rate=500",
          "augment.temporal_shift=false",
          "augment.spatial_flip=false",
          "augment.event_deletion=false",
          "encode.downsample=0.05",
          "window.train_length=20",
          "window.train_stride=10",
          "window.val_length=20",
          "window.val_stride=20",
          "kp.phi=0",
          "kp.d0=1",
          "kp.w0=4",
          "kp.stages=2",
          "kp.gru_hidden=6",
          "kp.gru_layers=1",
          "st.channels=4,8",
          "st.temporal_kernel=3",
          "st.gn_groups=2",
          "train.epochs=2",
          "train.batch_size=4",
          "train.lr=0.003"};
}

inline evtk::Config tiny_config(const std::string& model = "knightpupil") {
  evtk::Config c;
  for (const auto& a : tiny_assignments(model)) c.set_assignment(a);
  return c;
}

} // namespace test
