#pragma once

// Versioned key -> tensor archive used for every checkpoint.
//
// Layout (little-endian):
//   magic      8 bytes  "SEMI2IAR"
//   version    u32      (currently 1)
//   meta_len   u64      followed by meta_len bytes of UTF-8 JSON metadata
//   count      u64      number of entries
//   entry      u32 key_len, key bytes, u32 rank, rank x i32 dims,
//              numel x f64 values (row-major)
// Entries are written in insertion order, so equal contents give equal bytes.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "semi2i/nn.hpp"

namespace semi2i {

inline constexpr std::uint32_t kArchiveVersion = 1;

struct Archive {
  std::string metadata_json = "{}";
  ParameterList entries;

  const Tensor* find(const std::string& key) const;
  /// Throws InvalidCheckpoint when the key is absent.
  const Tensor& get(const std::string& key) const;
  void add(std::string key, Tensor t) { entries.push_back({std::move(key), std::move(t)}); }
};

void write_archive(const std::filesystem::path& path, const Archive& archive);
Archive read_archive(const std::filesystem::path& path);

/// Copies archived values into `params` (matched by `prefix + name`).
void load_parameters(const Archive& archive, const ParameterList& params, const std::string& prefix = "");

}  // namespace semi2i
