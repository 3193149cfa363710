// SPDX-License-Identifier: Apache-2.0
//
// Synthesizes a few recordings, trains a small spatiotemporal network for a
// handful of epochs and replays one validation recording frame by frame.

#include <filesystem>
#include <iostream>

#include "evtk/evtk.hpp"

int main(int argc, char** argv) {
  using namespace evtk;
  const std::filesystem::path out = argc > 1 ? argv[1] : "quickstart-out";

  Config cfg;
  for (const char* kv : {"model=spatiotemporal", "synth.n=4", "synth.duration_s=1", "encode.downsample=0.05",
                         "st.channels=8,16", "st.temporal_kernel=3", "window.train_length=20",
                         "window.train_stride=10", "window.val_length=20", "window.val_stride=20",
                         "train.epochs=3", "train.batch_size=8", "train.optimizer=adamw", "train.lr=0.002",
                         "train.weight_decay=0.005", "train.schedule=cosine_warmup"})
    cfg.set_assignment(kv);

  const auto recordings = synthesize(cfg);
  const auto data = train::prepare_data(cfg, recordings);
  std::cout << data.train.size() << " training windows, " << data.val.size() << " validation windows\n";

  const auto run = train::run_training(cfg, data, out, &std::cout);
  std::cout << "best validation distance " << run.best.mean_distance << " px, p10 " << run.best.p10 << "%\n";

  auto model = train::load_model(out / "best_distance.ckpt");
  auto& net = dynamic_cast<models::SpatiotemporalNet&>(*model);
  models::StreamingRunner runner(net);
  const RecordingBundle& rec = recordings.back();
  const auto frames = encode::causal_bin_all(rec.stream.events, rec.stream.geometry, 0.05);
  for (std::size_t k = 0; k < frames.size() && k < 5; ++k) {
    const Tensor& c = frames[k].counts;
    Tensor xy = runner.push(c.reshaped({1, c.dim(0), c.dim(1)}));
    std::cout << "frame " << k << ": (" << xy[0] * rec.stream.geometry.width << ", "
              << xy[1] * rec.stream.geometry.height << ")  label (" << rec.labels.samples[k].x << ", "
              << rec.labels.samples[k].y << ")\n";
  }
}
