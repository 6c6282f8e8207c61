#pragma once

// Toy two-domain aerial benchmark. Scenes are axis-aligned buildings, road
// bands and round tree crowns over textured ground. Domain B renders the same
// scenes (or, unpaired, its own) with the same appearance model, then pushes
// every channel through a fixed nonlinear transform plus noise.

#include <array>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "semi2i/raster.hpp"

namespace semi2i {

/// Expected object counts per 64x64 area.
struct ScenePrior {
  double buildings = 6.0;
  double roads = 1.5;
  double trees = 4.0;
};

/// y = offset + gain * 255 * (x' / 255)^gamma with x' = 255 - x when
/// `invert` is set, otherwise x' = x.
struct ChannelShift {
  double gamma = 1.0;
  double gain = 1.0;
  double offset = 0.0;
  bool invert = false;
};

struct ShiftSpec {
  std::array<ChannelShift, 3> channels{{
      {0.6, 0.75, 50.0, false},
      {1.8, 1.0, 5.0, false},
      {1.5, 1.0, 60.0, false},
  }};
  double noise_std = 4.0;
  /// Object densities of domain B when scenes are not paired.
  ScenePrior prior_b{1.5, 0.8, 14.0};
  /// Minimum Euclidean distance between the two domains' mean colours.
  double min_mean_gap = 20.0;
};

struct SynthConfig {
  int n_images = 8;  // per domain
  int height = 128;
  int width = 128;
  std::uint64_t seed = 0;
  /// Domain B shows domain A's scenes (same label maps, fresh texture
  /// noise). Unpaired domains draw their own scenes from shift.prior_b.
  bool paired = true;
  ScenePrior prior_a;
  ShiftSpec shift;

  void validate() const;
};

struct SyntheticScene {
  RasterImage image;  // byte range
  LabelRaster labels;
};

struct SyntheticDomains {
  std::vector<SyntheticScene> a;
  std::vector<SyntheticScene> b;
  double mean_gap = 0.0;
};

LabelRaster render_labels(int height, int width, const ScenePrior& prior, std::mt19937_64& rng);
/// Domain-A appearance of a label map.
RasterImage render_appearance(const LabelRaster& labels, std::mt19937_64& rng);
double shift_value(double x, const ChannelShift& s);
RasterImage apply_shift(const RasterImage& byte_image, const ShiftSpec& shift, std::mt19937_64& rng);

/// Mean colour over all pixels of all images.
std::vector<double> mean_color(std::span<const SyntheticScene> scenes);

/// Throws DegenerateInput when the measured gap is below shift.min_mean_gap.
SyntheticDomains make_synthetic_domains(const SynthConfig& cfg);

}  // namespace semi2i
