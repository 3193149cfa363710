// SPDX-License-Identifier: Apache-2.0
//
// Binary container for a named set of tensors plus string attributes. Used
// both for cached voxel tensors and for model checkpoints.
//
// Layout (little-endian):
//   "EVTKTSET"  u32 version
//   u32 n_attrs   { u32 len, key, u32 len, value } * n_attrs
//   u32 n_tensors { u32 len, name, u32 rank, u64 dims[rank], f64 data[] } * n
//   u64 FNV-1a checksum of every preceding byte
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "evtk/core/rng.hpp"
#include "evtk/io/binary.hpp"
#include "evtk/nn/tensor.hpp"

namespace evtk::io {

inline constexpr std::string_view kContainerMagic = "EVTKTSET";
inline constexpr std::uint32_t kContainerVersion = 1;

using TensorMap = std::map<std::string, Tensor>;
using AttrMap = std::map<std::string, std::string>;

struct TensorSet {
  AttrMap attrs;
  TensorMap tensors;

  const Tensor& at(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("tensor set has no entry '" + name + "'");
    return it->second;
  }

  friend bool operator==(const TensorSet&, const TensorSet&) = default;
};

namespace detail {
inline void put_str(std::string& out, std::string_view s) {
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.append(s);
}
inline std::string get_str(ByteReader& r) {
  const auto n = r.get_le<std::uint32_t>();
  return std::string(r.get_bytes(n));
}
} // namespace detail

inline std::string encode_tensor_set(const TensorSet& set) {
  std::string out(kContainerMagic);
  put_le<std::uint32_t>(out, kContainerVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.attrs.size()));
  for (const auto& [k, v] : set.attrs) {
    detail::put_str(out, k);
    detail::put_str(out, v);
  }
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(set.tensors.size()));
  for (const auto& [name, t] : set.tensors) {
    detail::put_str(out, name);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) put_le<std::uint64_t>(out, d);
    for (double v : t.data()) put_f64(out, v);
  }
  put_le<std::uint64_t>(out, fnv1a64(out));
  return out;
}

inline TensorSet decode_tensor_set(std::string_view data) {
  if (data.size() < kContainerMagic.size() + 12 || data.substr(0, kContainerMagic.size()) != kContainerMagic)
    throw FormatError("not a tensor container");
  const auto body = data.substr(0, data.size() - 8);
  ByteReader tail(data.substr(data.size() - 8));
  if (tail.get_le<std::uint64_t>() != fnv1a64(body)) throw FormatError("tensor container checksum mismatch");

  ByteReader r(body);
  r.get_bytes(kContainerMagic.size());
  const auto version = r.get_le<std::uint32_t>();
  if (version != kContainerVersion)
    throw FormatError("unsupported tensor container version " + std::to_string(version));
  TensorSet set;
  const auto n_attrs = r.get_le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_attrs; ++i) {
    auto k = detail::get_str(r);
    set.attrs[k] = detail::get_str(r);
  }
  const auto n_tensors = r.get_le<std::uint32_t>();
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    auto name = detail::get_str(r);
    const auto rank = r.get_le<std::uint32_t>();
    if (rank > 16) throw FormatError("implausible tensor rank in '" + name + "'");
    Shape shape(rank);
    for (auto& d : shape) d = r.get_le<std::uint64_t>();
    const auto n = shape_size(shape);
    if (n > r.remaining() / 8) throw FormatError("tensor '" + name + "' exceeds container size");
    std::vector<double> values(n);
    for (auto& v : values) v = r.get_f64();
    set.tensors.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes in tensor container");
  return set;
}

inline void save_tensor_set(const TensorSet& set, const fs::path& path) {
  write_file_atomic(path, encode_tensor_set(set));
}

inline TensorSet load_tensor_set(const fs::path& path) { return decode_tensor_set(read_file(path)); }

} // namespace evtk::io
