// SPDX-License-Identifier: Apache-2.0
//
// Event file formats.
//
//   text:   one event per line, "t_us,x,y,p" with p in {-1, 1}
//   binary: magic "EVTK0001", u16 width, u16 height, then packed
//           little-endian records {u64 t, u16 x, u16 y, i8 p} (13 bytes)
//
// The trailing digits of the magic are the format version.
#pragma once

#include <string>
#include <string_view>

#include "evtk/event_model.hpp"
#include "evtk/io/binary.hpp"

namespace evtk::io {

inline constexpr std::string_view kEventMagic = "EVTK0001";
inline constexpr std::size_t kEventRecordBytes = 13;

enum class EventFormat { text, binary };

/// ".csv" / ".txt" select text; anything else binary.
inline EventFormat format_for_path(const fs::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".csv" || ext == ".txt") ? EventFormat::text : EventFormat::binary;
}

/// Parses one text line into an event; throws FormatError naming the line.
inline Event parse_event_line(std::string_view line, std::size_t line_no, const SensorGeometry& g) {
  const auto where = "line " + std::to_string(line_no) + ": ";
  const auto fields = split(line, ',');
  if (fields.size() != 4) throw FormatError(where + "expected 4 fields t_us,x,y,p");
  Event e;
  long long t = 0;
  unsigned x = 0, y = 0;
  int p = 0;
  if (!parse_number(trim(fields[0]), t) || t < 0) throw FormatError(where + "bad timestamp");
  if (!parse_number(trim(fields[1]), x)) throw FormatError(where + "bad x");
  if (!parse_number(trim(fields[2]), y)) throw FormatError(where + "bad y");
  if (!parse_number(trim(fields[3]), p)) throw FormatError(where + "bad polarity");
  if (p != 1 && p != -1) throw FormatError(where + "polarity must be ±1");
  if (x >= g.width) throw FormatError(where + "x out of bounds");
  if (y >= g.height) throw FormatError(where + "y out of bounds");
  e.t = t;
  e.x = static_cast<std::uint16_t>(x);
  e.y = static_cast<std::uint16_t>(y);
  e.p = static_cast<std::int8_t>(p);
  return e;
}

inline std::string encode_events_text(const EventStream& stream) {
  std::string out;
  out.reserve(stream.size() * 20);
  for (const Event& e : stream.events) {
    out += std::to_string(e.t);
    out += ',';
    out += std::to_string(e.x);
    out += ',';
    out += std::to_string(e.y);
    out += ',';
    out += std::to_string(static_cast<int>(e.p));
    out += '\n';
  }
  return out;
}

inline std::string encode_events_binary(const EventStream& stream) {
  std::string out(kEventMagic);
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.geometry.width));
  put_le<std::uint16_t>(out, static_cast<std::uint16_t>(stream.geometry.height));
  out.reserve(out.size() + stream.size() * kEventRecordBytes);
  for (const Event& e : stream.events) {
    put_le<std::uint64_t>(out, static_cast<std::uint64_t>(e.t));
    put_le<std::uint16_t>(out, e.x);
    put_le<std::uint16_t>(out, e.y);
    put_le<std::int8_t>(out, e.p);
  }
  return out;
}

/// Text streams carry no geometry, so the caller supplies it.
inline EventStream decode_events_text(std::string_view data, const SensorGeometry& g) {
  EventStream s;
  s.geometry = g;
  std::size_t line_no = 0, start = 0;
  while (start < data.size()) {
    auto end = data.find('\n', start);
    if (end == std::string_view::npos) end = data.size();
    ++line_no;
    const auto line = trim(data.substr(start, end - start));
    start = end + 1;
    if (line.empty() || line.front() == '#') continue;
    const Event e = parse_event_line(line, line_no, g);
    if (!s.events.empty() && e.t < s.events.back().t)
      throw FormatError("line " + std::to_string(line_no) + ": timestamps decrease");
    s.events.push_back(e);
  }
  return s;
}

inline EventStream decode_events_binary(std::string_view data) {
  ByteReader r(data);
  if (data.size() < kEventMagic.size() || data.substr(0, kEventMagic.size()) != kEventMagic)
    throw FormatError("offset 0: missing EVTK0001 magic");
  r.get_bytes(kEventMagic.size());
  EventStream s;
  s.geometry.width = r.get_le<std::uint16_t>();
  s.geometry.height = r.get_le<std::uint16_t>();
  if (s.geometry.width == 0 || s.geometry.height == 0)
    throw FormatError("offset 8: zero sensor geometry");
  if (r.remaining() % kEventRecordBytes != 0)
    throw FormatError("offset " + std::to_string(data.size() - r.remaining() % kEventRecordBytes) +
                      ": truncated event record");
  s.events.reserve(r.remaining() / kEventRecordBytes);
  while (r.remaining() > 0) {
    const auto off = std::to_string(r.offset());
    const auto t = r.get_le<std::uint64_t>();
    Event e;
    e.x = r.get_le<std::uint16_t>();
    e.y = r.get_le<std::uint16_t>();
    e.p = r.get_le<std::int8_t>();
    if (t > static_cast<std::uint64_t>(INT64_MAX)) throw FormatError("offset " + off + ": timestamp overflow");
    e.t = static_cast<std::int64_t>(t);
    if (e.p != 1 && e.p != -1) throw FormatError("offset " + off + ": polarity must be ±1");
    if (e.x >= s.geometry.width) throw FormatError("offset " + off + ": x out of bounds");
    if (e.y >= s.geometry.height) throw FormatError("offset " + off + ": y out of bounds");
    if (!s.events.empty() && e.t < s.events.back().t)
      throw FormatError("offset " + off + ": timestamps decrease");
    s.events.push_back(e);
  }
  return s;
}

inline void write_events(const EventStream& stream, const fs::path& path, EventFormat format) {
  write_file(path, format == EventFormat::text ? encode_events_text(stream) : encode_events_binary(stream));
}

inline void write_events(const EventStream& stream, const fs::path& path) {
  write_events(stream, path, format_for_path(path));
}

/// Reads either format; binary files are recognised by their magic.
inline EventStream read_events(const fs::path& path, const SensorGeometry& text_geometry = {}) {
  const std::string data = read_file(path);
  if (data.size() >= 4 && std::string_view(data).substr(0, 4) == "EVTK") return decode_events_binary(data);
  return decode_events_text(data, text_geometry);
}

} // namespace evtk::io
