// SPDX-License-Identifier: Apache-2.0
//
// Label files: one sample per line, "idx,x,y,close", idx consecutive from 0.
// An optional "# t0_us=<n>" comment carries the track origin (default 0).
#pragma once

#include <string>
#include <string_view>

#include "evtk/event_model.hpp"
#include "evtk/io/binary.hpp"

namespace evtk::io {

inline std::string encode_labels(const LabelTrack& track) {
  std::string out;
  if (track.t0 != 0) out += "# t0_us=" + std::to_string(track.t0) + "\n";
  for (std::size_t j = 0; j < track.size(); ++j) {
    const auto& s = track.samples[j];
    out += std::to_string(j);
    out += ',';
    out += format_double(s.x);
    out += ',';
    out += format_double(s.y);
    out += ',';
    out += std::to_string(s.close);
    out += '\n';
  }
  return out;
}

inline LabelTrack decode_labels(std::string_view data) {
  LabelTrack track;
  std::size_t line_no = 0, start = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    ++line_no;
    const auto line = trim(data.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;
    const auto where = "line " + std::to_string(line_no) + ": ";
    if (line.front() == '#') {
      constexpr std::string_view key = "t0_us=";
      const auto body = trim(line.substr(1));
      if (body.substr(0, key.size()) == key && !parse_number(body.substr(key.size()), track.t0))
        throw FormatError(where + "bad t0_us");
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 4) throw FormatError(where + "expected 4 fields idx,x,y,close");
    std::size_t idx = 0;
    LabelSample s;
    if (!parse_number(trim(fields[0]), idx)) throw FormatError(where + "bad index");
    if (idx != track.size())
      throw FormatError(where + "index " + std::to_string(idx) + " not consecutive (expected " +
                        std::to_string(track.size()) + ")");
    if (!parse_number(trim(fields[1]), s.x) || !parse_number(trim(fields[2]), s.y))
      throw FormatError(where + "bad coordinate");
    if (!parse_number(trim(fields[3]), s.close) || (s.close != 0 && s.close != 1))
      throw FormatError(where + "close flag must be 0 or 1");
    track.samples.push_back(s);
  }
  return track;
}

inline void write_labels(const LabelTrack& track, const fs::path& path) {
  write_file(path, encode_labels(track));
}

inline LabelTrack read_labels(const fs::path& path) { return decode_labels(read_file(path)); }

} // namespace evtk::io
