#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "semi2i/tensor.hpp"

namespace semi2i {

enum class ValueRange {
  kByte,       // integers 0..255
  kSigned,     // [-1, 1]
  kUnbounded,  // scores, intermediate sums
};

/// Interleaved H x W x C image.
struct RasterImage {
  int height = 0;
  int width = 0;
  int channels = 0;
  ValueRange range = ValueRange::kByte;
  std::vector<double> data;

  RasterImage() = default;
  RasterImage(int h, int w, int c, ValueRange r, double fill = 0.0);

  double& at(int row, int col, int ch) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  double at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  /// Throws InvalidInput if the buffer size or any value contradicts `range`.
  void validate() const;
  bool operator==(const RasterImage&) const = default;
};

enum ClassId : std::uint8_t { kBackground = 0, kBuilding = 1, kRoad = 2, kTree = 3 };
inline constexpr int kNumClasses = 4;

struct LabelRaster {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> ids;

  LabelRaster() = default;
  LabelRaster(int h, int w, std::uint8_t fill = kBackground);

  std::uint8_t& at(int row, int col) { return ids[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return ids[static_cast<std::size_t>(row) * width + col]; }
  void validate(int num_classes = kNumClasses) const;
  bool operator==(const LabelRaster&) const = default;
};

/// Display colours: background black, building red, road white, tree green.
const std::array<std::array<std::uint8_t, 3>, kNumClasses>& class_palette();

/// x / 127.5 - 1
RasterImage normalize(const RasterImage& byte_image);
/// (x + 1) * 127.5, rounded and clamped to 0..255
RasterImage denormalize(const RasterImage& signed_image);

/// 1 x C x H x W tensor; values copied as-is.
Tensor to_tensor(const RasterImage& image);
/// Inverse of to_tensor for a batch-1 tensor.
RasterImage from_tensor(const Tensor& t, ValueRange range);

/// 8-bit PNG; grey or RGB (alpha dropped).
RasterImage read_png(const std::filesystem::path& path);
/// Writes a byte-range image (values rounded and clamped).
void write_png(const std::filesystem::path& path, const RasterImage& image);

/// Accepts grey PNGs holding class ids directly, or colour PNGs using
/// class_palette().
LabelRaster read_label_png(const std::filesystem::path& path);
/// Indexed-colour PNG with class_palette().
void write_label_png(const std::filesystem::path& path, const LabelRaster& labels);

}  // namespace semi2i
