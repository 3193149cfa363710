// SPDX-License-Identifier: Apache-2.0
//
// On-disk dataset: a directory with "manifest.txt" (one recording id per
// line) and, per recording, "<id>.events.bin" and "<id>.labels.csv".
#pragma once

#include <string>
#include <vector>

#include "evtk/io/event_io.hpp"
#include "evtk/io/label_io.hpp"

namespace evtk::io {

inline void save_dataset(const std::vector<RecordingBundle>& bundles, const fs::path& dir) {
  fs::create_directories(dir);
  std::string manifest;
  for (const auto& b : bundles) {
    if (b.id.empty() || b.id.find_first_of("/\\\n") != std::string::npos)
      throw ConfigError("recording id '" + b.id + "' is not a valid file stem");
    write_events(b.stream, dir / (b.id + ".events.bin"), EventFormat::binary);
    write_labels(b.labels, dir / (b.id + ".labels.csv"));
    manifest += b.id + "\n";
  }
  write_file(dir / "manifest.txt", manifest);
}

inline std::vector<RecordingBundle> load_dataset(const fs::path& dir) {
  const std::string manifest = read_file(dir / "manifest.txt");
  std::vector<RecordingBundle> out;
  for (auto line : split(manifest, '\n')) {
    line = trim(line);
    if (line.empty()) continue;
    RecordingBundle b;
    b.id = std::string(line);
    b.stream = read_events(dir / (b.id + ".events.bin"));
    b.labels = read_labels(dir / (b.id + ".labels.csv"));
    out.push_back(std::move(b));
  }
  return out;
}

} // namespace evtk::io
