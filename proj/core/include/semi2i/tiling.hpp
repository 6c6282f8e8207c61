#pragma once

#include <span>
#include <vector>

#include "semi2i/raster.hpp"

namespace semi2i {

struct PatchOrigin {
  int row = 0;
  int col = 0;
  bool operator==(const PatchOrigin&) const = default;
};

/// Square patches advancing by patch_size - overlap; the last origin on each
/// axis is clamped to dim - patch_size so no padding is needed.
struct PatchGrid {
  int patch_size = 256;
  int overlap = 32;
  int height = 0;
  int width = 0;
  std::vector<PatchOrigin> origins;  // row-major over (row origin, col origin)

  int stride() const { return patch_size - overlap; }
  void validate() const;
};

std::vector<int> axis_origins(int dim, int patch_size, int stride);
PatchGrid make_patch_grid(int height, int width, int patch_size = 256, int overlap = 32);

RasterImage crop(const RasterImage& image, PatchOrigin origin, int size);
LabelRaster crop(const LabelRaster& labels, PatchOrigin origin, int size);

struct ImagePatches {
  std::vector<RasterImage> patches;
  PatchGrid grid;
};

ImagePatches extract_patches(const RasterImage& image, int patch_size = 256, int overlap = 32);
/// Labels are cut on the same grid without any resampling.
std::vector<LabelRaster> extract_label_patches(const LabelRaster& labels, const PatchGrid& grid);

/// Uniform average of all patch contributions per pixel. Identical
/// contributions reproduce their value exactly.
RasterImage stitch_patches(std::span<const RasterImage> patches, const PatchGrid& grid, int height, int width);

}  // namespace semi2i
