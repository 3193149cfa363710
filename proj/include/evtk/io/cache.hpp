// SPDX-License-Identifier: Apache-2.0
//
// Disk cache for preprocessed tensors.
//
// An entry is keyed by recording id and a fingerprint of the complete
// preprocessing configuration. Each entry is a payload (tensor container) and
// a JSON sidecar with shapes, the canonical config text and a payload
// checksum. Both files are written via temp-file + rename. A sidecar whose
// payload is missing, truncated or fails its checksum is a miss: the entry is
// rebuilt and a warning is emitted.
#pragma once

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <string>
#include <utility>

#include <json.hpp>

#include "evtk/core/rng.hpp"
#include "evtk/io/tensor_container.hpp"

namespace evtk::io {

inline constexpr int kCacheFormatVersion = 1;

/// 128-bit content fingerprint (two independently seeded FNV-1a passes), hex.
inline std::string fingerprint(std::string_view canonical) {
  const std::uint64_t a = fnv1a64(canonical);
  const std::uint64_t b = fnv1a64(canonical, splitmix64(0x5eed));
  char buf[33];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(a),
                static_cast<unsigned long long>(b));
  return buf;
}

struct CacheKey {
  std::string recording_id;
  std::string fingerprint;

  friend bool operator==(const CacheKey&, const CacheKey&) = default;
};

enum class CacheStatus { hit, miss };

struct CacheResult {
  TensorSet tensors;
  CacheStatus status = CacheStatus::miss;
};

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink stderr_warnings() {
  return [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
}

/// Root directory from EVTK_CACHE_DIR, or empty when unset.
inline fs::path cache_dir_from_env() {
  const char* v = std::getenv("EVTK_CACHE_DIR");
  return v ? fs::path(v) : fs::path();
}

class DiskCache {
public:
  explicit DiskCache(fs::path root, WarningSink warn = stderr_warnings())
      : root_(std::move(root)), warn_(std::move(warn)) {
    if (root_.empty()) throw ConfigError("cache root is not configured");
    fs::create_directories(root_);
  }

  const fs::path& root() const { return root_; }

  fs::path payload_path(const CacheKey& key) const { return root_ / (stem(key) + ".evtc"); }
  fs::path sidecar_path(const CacheKey& key) const { return root_ / (stem(key) + ".json"); }

  /// Returns the persisted tensors on a hit; otherwise runs the builder,
  /// persists its output and returns it. `config_text` is recorded in the
  /// sidecar for inspection only.
  CacheResult get_or_build(const CacheKey& key, const std::function<TensorSet()>& builder,
                           std::string_view config_text = {}) {
    if (fs::exists(sidecar_path(key))) {
      try {
        return {load(key), CacheStatus::hit};
      } catch (const std::exception& e) {
        warn_("corrupt cache entry " + stem(key) + " (" + e.what() + "); rebuilding");
      }
    }
    TensorSet built = builder();
    store(key, built, config_text);
    return {std::move(built), CacheStatus::miss};
  }

  TensorSet load(const CacheKey& key) const {
    const auto meta = nlohmann::json::parse(read_file(sidecar_path(key)));
    if (meta.at("format_version").get<int>() != kCacheFormatVersion)
      throw FormatError("cache format version mismatch");
    if (meta.at("fingerprint").get<std::string>() != key.fingerprint)
      throw FormatError("sidecar fingerprint mismatch");
    const std::string payload = read_file(payload_path(key));
    if (payload.size() != meta.at("payload_bytes").get<std::size_t>())
      throw FormatError("payload size " + std::to_string(payload.size()) + " != recorded " +
                        std::to_string(meta.at("payload_bytes").get<std::size_t>()));
    if (hex64(fnv1a64(payload)) != meta.at("payload_checksum").get<std::string>())
      throw FormatError("payload checksum mismatch");
    return decode_tensor_set(payload);
  }

  void store(const CacheKey& key, const TensorSet& set, std::string_view config_text) const {
    const std::string payload = encode_tensor_set(set);
    nlohmann::json meta;
    meta["format_version"] = kCacheFormatVersion;
    meta["recording_id"] = key.recording_id;
    meta["fingerprint"] = key.fingerprint;
    meta["config"] = std::string(config_text);
    meta["payload_bytes"] = payload.size();
    meta["payload_checksum"] = hex64(fnv1a64(payload));
    auto& entries = meta["tensors"] = nlohmann::json::array();
    for (const auto& [name, t] : set.tensors)
      entries.push_back({{"name", name}, {"shape", t.shape()}, {"dtype", "f64"}});
    write_file_atomic(payload_path(key), payload);
    write_file_atomic(sidecar_path(key), meta.dump(2) + "\n");
  }

private:
  static std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
  }

  static std::string stem(const CacheKey& key) {
    std::string id = key.recording_id;
    for (char& c : id)
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.' || c == '+')) c = '_';
    return id + "-" + key.fingerprint;
  }

  fs::path root_;
  WarningSink warn_;
};

} // namespace evtk::io
