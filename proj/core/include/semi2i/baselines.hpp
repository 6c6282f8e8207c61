#pragma once

// Classical colour transfer baselines: gray world and per-channel
// histogram matching. Both act per pixel and per channel only.

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "semi2i/raster.hpp"

namespace semi2i {

/// Per-channel factors g / mean_c with g the mean of the channel means.
/// Throws DegenerateInput when a channel mean is zero.
std::vector<double> gray_world_gains(const RasterImage& image);

/// Scales each channel by its gray-world gain and clamps to the declared
/// range (byte images are rounded to integers).
RasterImage gray_world(const RasterImage& image);

/// 256-bin counts per channel of a byte image.
struct ChannelHistograms {
  std::vector<std::array<std::int64_t, 256>> bins;

  static ChannelHistograms of(const RasterImage& byte_image);
  /// Adds the counts of another image with the same channel count.
  void accumulate(const RasterImage& byte_image);
  int channels() const { return static_cast<int>(bins.size()); }
};

/// Lookup table for one channel: v -> smallest r with
/// CDF_ref(r) >= CDF_src(v). Entries for values absent from the source are
/// filled the same way, so the table is monotone non-decreasing.
std::array<std::uint8_t, 256> match_lut(const std::array<std::int64_t, 256>& source,
                                        const std::array<std::int64_t, 256>& reference);

RasterImage histogram_match(const RasterImage& source, const ChannelHistograms& reference);
RasterImage histogram_match(const RasterImage& source, const RasterImage& reference);

}  // namespace semi2i
