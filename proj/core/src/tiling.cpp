#include "semi2i/tiling.hpp"

#include <string>

#include "semi2i/errors.hpp"

namespace semi2i {

void PatchGrid::validate() const {
  if (patch_size <= 0 || overlap < 0 || overlap >= patch_size) {
    throw InvalidInput("PatchGrid: need 0 <= overlap < patch_size");
  }
  if (height < patch_size || width < patch_size) {
    throw InvalidInput("PatchGrid: image " + std::to_string(height) + "x" + std::to_string(width) +
                       " smaller than patch " + std::to_string(patch_size));
  }
  for (const auto& o : origins) {
    if (o.row < 0 || o.col < 0 || o.row + patch_size > height || o.col + patch_size > width) {
      throw InvalidInput("PatchGrid: origin outside image");
    }
  }
}

std::vector<int> axis_origins(int dim, int patch_size, int stride) {
  if (dim < patch_size) {
    throw InvalidInput("image side " + std::to_string(dim) + " smaller than patch " + std::to_string(patch_size));
  }
  std::vector<int> out;
  int o = 0;
  while (o + patch_size < dim) {
    out.push_back(o);
    o += stride;
  }
  out.push_back(dim - patch_size);
  return out;
}

PatchGrid make_patch_grid(int height, int width, int patch_size, int overlap) {
  PatchGrid g;
  g.patch_size = patch_size;
  g.overlap = overlap;
  g.height = height;
  g.width = width;
  if (patch_size <= 0 || overlap < 0 || overlap >= patch_size) {
    throw InvalidInput("patch grid: need 0 <= overlap < patch_size");
  }
  const auto rows = axis_origins(height, patch_size, g.stride());
  const auto cols = axis_origins(width, patch_size, g.stride());
  for (int r : rows) {
    for (int c : cols) g.origins.push_back({r, c});
  }
  return g;
}

RasterImage crop(const RasterImage& image, PatchOrigin origin, int size) {
  if (origin.row < 0 || origin.col < 0 || origin.row + size > image.height || origin.col + size > image.width) {
    throw InvalidInput("crop: window outside image");
  }
  RasterImage out(size, size, image.channels, image.range);
  const std::size_t row_len = static_cast<std::size_t>(size) * image.channels;
  for (int r = 0; r < size; ++r) {
    const double* src = &image.data[(static_cast<std::size_t>(origin.row + r) * image.width + origin.col) * image.channels];
    std::copy(src, src + row_len, out.data.begin() + static_cast<std::ptrdiff_t>(r * row_len));
  }
  return out;
}

LabelRaster crop(const LabelRaster& labels, PatchOrigin origin, int size) {
  if (origin.row < 0 || origin.col < 0 || origin.row + size > labels.height || origin.col + size > labels.width) {
    throw InvalidInput("crop: window outside label raster");
  }
  LabelRaster out(size, size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) out.at(r, c) = labels.at(origin.row + r, origin.col + c);
  }
  return out;
}

ImagePatches extract_patches(const RasterImage& image, int patch_size, int overlap) {
  ImagePatches out;
  out.grid = make_patch_grid(image.height, image.width, patch_size, overlap);
  out.patches.reserve(out.grid.origins.size());
  for (const auto& o : out.grid.origins) out.patches.push_back(crop(image, o, patch_size));
  return out;
}

std::vector<LabelRaster> extract_label_patches(const LabelRaster& labels, const PatchGrid& grid) {
  if (labels.height != grid.height || labels.width != grid.width) {
    throw InvalidInput("extract_label_patches: label raster does not match grid");
  }
  std::vector<LabelRaster> out;
  out.reserve(grid.origins.size());
  for (const auto& o : grid.origins) out.push_back(crop(labels, o, grid.patch_size));
  return out;
}

RasterImage stitch_patches(std::span<const RasterImage> patches, const PatchGrid& grid, int height, int width) {
  if (grid.height != height || grid.width != width) {
    throw InvalidInput("stitch_patches: grid was built for a different output size");
  }
  grid.validate();
  if (patches.size() != grid.origins.size() || patches.empty()) {
    throw InvalidInput("stitch_patches: " + std::to_string(patches.size()) + " patches for " +
                       std::to_string(grid.origins.size()) + " origins");
  }
  const int channels = patches[0].channels;
  for (const auto& p : patches) {
    if (p.height != grid.patch_size || p.width != grid.patch_size || p.channels != channels) {
      throw InvalidInput("stitch_patches: patch shape does not match grid");
    }
  }
  RasterImage out(height, width, channels, patches[0].range);
  std::vector<int> count(static_cast<std::size_t>(height) * width, 0);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const PatchOrigin o = grid.origins[i];
    for (int r = 0; r < grid.patch_size; ++r) {
      for (int c = 0; c < grid.patch_size; ++c) {
        const std::size_t pix = static_cast<std::size_t>(o.row + r) * width + o.col + c;
        const int k = ++count[pix];
        for (int ch = 0; ch < channels; ++ch) {
          // Running mean: exact when all contributions agree.
          double& acc = out.data[pix * channels + ch];
          acc += (patches[i].at(r, c, ch) - acc) / k;
        }
      }
    }
  }
  for (int k : count) {
    if (k == 0) throw InvalidInput("stitch_patches: grid leaves pixels uncovered");
  }
  return out;
}

}  // namespace semi2i
