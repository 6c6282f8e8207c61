#include "semi2i/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "semi2i/errors.hpp"

namespace semi2i {

namespace {

double clamp_to_range(double v, ValueRange range) {
  switch (range) {
    case ValueRange::kByte:
      return std::clamp(std::round(v), 0.0, 255.0);
    case ValueRange::kSigned:
      return std::clamp(v, -1.0, 1.0);
    case ValueRange::kUnbounded:
      break;
  }
  return v;
}

void require_byte(const RasterImage& img, const char* what) {
  if (img.range != ValueRange::kByte) throw InvalidInput(std::string(what) + ": expected an 8-bit image");
  img.validate();
  for (double v : img.data) {
    if (v != std::floor(v)) throw InvalidInput(std::string(what) + ": non-integer intensity");
  }
}

}  // namespace

std::vector<double> gray_world_gains(const RasterImage& image) {
  image.validate();
  if (image.channels < 1) throw InvalidInput("gray_world: image has no channels");
  const std::size_t pixels = static_cast<std::size_t>(image.height) * image.width;
  if (pixels == 0) throw DegenerateInput("gray_world: empty image");
  std::vector<double> means(image.channels, 0.0);
  for (std::size_t i = 0; i < pixels; ++i) {
    for (int c = 0; c < image.channels; ++c) means[c] += image.data[i * image.channels + c];
  }
  double g = 0.0;
  for (auto& m : means) {
    m /= static_cast<double>(pixels);
    g += m;
  }
  g /= image.channels;
  std::vector<double> gains(image.channels);
  for (int c = 0; c < image.channels; ++c) {
    if (means[c] == 0.0) throw DegenerateInput("gray_world: channel " + std::to_string(c) + " has zero mean");
    gains[c] = g / means[c];
  }
  return gains;
}

RasterImage gray_world(const RasterImage& image) {
  const std::vector<double> gains = gray_world_gains(image);
  RasterImage out = image;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = clamp_to_range(out.data[i] * gains[i % out.channels], out.range);
  }
  return out;
}

ChannelHistograms ChannelHistograms::of(const RasterImage& byte_image) {
  ChannelHistograms h;
  h.bins.assign(byte_image.channels, {});
  h.accumulate(byte_image);
  return h;
}

void ChannelHistograms::accumulate(const RasterImage& byte_image) {
  require_byte(byte_image, "histogram");
  if (byte_image.channels != channels()) throw InvalidInput("histogram: channel count mismatch");
  for (std::size_t i = 0; i < byte_image.data.size(); ++i) {
    ++bins[i % byte_image.channels][static_cast<int>(byte_image.data[i])];
  }
}

std::array<std::uint8_t, 256> match_lut(const std::array<std::int64_t, 256>& source,
                                        const std::array<std::int64_t, 256>& reference) {
  std::array<std::int64_t, 256> cdf_src{};
  std::array<std::int64_t, 256> cdf_ref{};
  std::int64_t acc_s = 0;
  std::int64_t acc_r = 0;
  for (int v = 0; v < 256; ++v) {
    acc_s += source[v];
    acc_r += reference[v];
    cdf_src[v] = acc_s;
    cdf_ref[v] = acc_r;
  }
  if (acc_s == 0 || acc_r == 0) throw DegenerateInput("histogram_match: empty histogram");
  std::array<std::uint8_t, 256> lut{};
  // CDF_ref(r)/N_ref >= CDF_src(v)/N_src, compared in integers.
  int r = 0;
  for (int v = 0; v < 256; ++v) {
    while (r < 255 && cdf_ref[r] * acc_s < cdf_src[v] * acc_r) ++r;
    lut[v] = static_cast<std::uint8_t>(r);
  }
  return lut;
}

RasterImage histogram_match(const RasterImage& source, const ChannelHistograms& reference) {
  if (source.channels != reference.channels()) {
    throw InvalidInput("histogram_match: source has " + std::to_string(source.channels) +
                       " channels, reference " + std::to_string(reference.channels()));
  }
  const ChannelHistograms src = ChannelHistograms::of(source);
  std::vector<std::array<std::uint8_t, 256>> luts;
  for (int c = 0; c < source.channels; ++c) luts.push_back(match_lut(src.bins[c], reference.bins[c]));
  RasterImage out = source;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    out.data[i] = luts[i % out.channels][static_cast<int>(out.data[i])];
  }
  return out;
}

RasterImage histogram_match(const RasterImage& source, const RasterImage& reference) {
  if (source.channels != reference.channels) {
    throw InvalidInput("histogram_match: source has " + std::to_string(source.channels) +
                       " channels, reference " + std::to_string(reference.channels));
  }
  return histogram_match(source, ChannelHistograms::of(reference));
}

}  // namespace semi2i
