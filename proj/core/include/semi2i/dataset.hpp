#pragma once

// Dataset manifests and random pair sampling.
//
// Manifest file (JSON, UTF-8):
//   {
//     "format": "semi2i-manifest",
//     "version": 1,
//     "domain": "A",
//     "entries": [ {"image": "images/0000.png", "label": "labels/0000.png"}, ... ]
//   }
// "label" is optional. Relative paths are resolved against the manifest's
// directory.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "semi2i/raster.hpp"

namespace semi2i {

struct ManifestEntry {
  std::filesystem::path image;
  std::optional<std::filesystem::path> label;
};

struct Manifest {
  std::string domain;
  std::vector<ManifestEntry> entries;
};

Manifest read_manifest(const std::filesystem::path& path);
/// Paths under the manifest directory are stored relative to it.
void write_manifest(const std::filesystem::path& path, const Manifest& manifest);

struct LabeledImage {
  std::string name;  // file stem of the image
  RasterImage image;
  std::optional<LabelRaster> label;
};

/// Loads every entry; label dimensions must match their image.
std::vector<LabeledImage> load_dataset(const Manifest& manifest);

/// Independent uniform draws of one index per domain.
std::pair<std::size_t, std::size_t> sample_pair(std::size_t size_a, std::size_t size_b, std::mt19937_64& rng);

template <typename T>
std::pair<const T&, const T&> sample_pair(std::span<const T> a, std::span<const T> b, std::mt19937_64& rng) {
  const auto [i, j] = sample_pair(a.size(), b.size(), rng);
  return {a[i], b[j]};
}

}  // namespace semi2i
