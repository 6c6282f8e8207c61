#include "semi2i/raster.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "semi2i/errors.hpp"

namespace semi2i {

RasterImage::RasterImage(int h, int w, int c, ValueRange r, double fill)
    : height(h), width(w), channels(c), range(r),
      data(static_cast<std::size_t>(h) * w * c, fill) {}

void RasterImage::validate() const {
  if (height < 0 || width < 0 || channels < 0 ||
      data.size() != static_cast<std::size_t>(height) * width * channels) {
    throw InvalidInput("RasterImage: buffer does not match " + std::to_string(height) + "x" +
                       std::to_string(width) + "x" + std::to_string(channels));
  }
  for (double v : data) {
    if (!std::isfinite(v)) throw InvalidInput("RasterImage: non-finite value");
    if (range == ValueRange::kByte && (v < 0.0 || v > 255.0)) {
      throw InvalidInput("RasterImage: value outside 0..255");
    }
    if (range == ValueRange::kSigned && (v < -1.0 || v > 1.0)) {
      throw InvalidInput("RasterImage: value outside [-1, 1]");
    }
  }
}

LabelRaster::LabelRaster(int h, int w, std::uint8_t fill)
    : height(h), width(w), ids(static_cast<std::size_t>(h) * w, fill) {}

void LabelRaster::validate(int num_classes) const {
  if (ids.size() != static_cast<std::size_t>(height) * width) {
    throw InvalidInput("LabelRaster: buffer does not match dimensions");
  }
  for (auto id : ids) {
    if (id >= num_classes) throw InvalidInput("LabelRaster: class id " + std::to_string(id) + " out of range");
  }
}

const std::array<std::array<std::uint8_t, 3>, kNumClasses>& class_palette() {
  static const std::array<std::array<std::uint8_t, 3>, kNumClasses> palette{{
      {0, 0, 0},
      {255, 0, 0},
      {255, 255, 255},
      {0, 255, 0},
  }};
  return palette;
}

RasterImage normalize(const RasterImage& byte_image) {
  if (byte_image.range != ValueRange::kByte) throw InvalidInput("normalize: expected a byte-range image");
  RasterImage out = byte_image;
  out.range = ValueRange::kSigned;
  for (double& v : out.data) v = v / 127.5 - 1.0;
  return out;
}

RasterImage denormalize(const RasterImage& signed_image) {
  RasterImage out = signed_image;
  out.range = ValueRange::kByte;
  for (double& v : out.data) v = std::clamp(std::round((v + 1.0) * 127.5), 0.0, 255.0);
  return out;
}

Tensor to_tensor(const RasterImage& image) {
  const int h = image.height, w = image.width, c = image.channels;
  std::vector<double> v(image.data.size());
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  for (std::size_t p = 0; p < plane; ++p) {
    for (int ch = 0; ch < c; ++ch) v[ch * plane + p] = image.data[p * c + ch];
  }
  return Tensor(Shape{1, c, h, w}, std::move(v));
}

RasterImage from_tensor(const Tensor& t, ValueRange range) {
  if (t.rank() != 4 || t.dim(0) != 1) {
    throw InvalidInput("from_tensor: expected 1 x C x H x W, got " + to_string(t.shape()));
  }
  const int c = t.dim(1), h = t.dim(2), w = t.dim(3);
  RasterImage out(h, w, c, range);
  const std::size_t plane = static_cast<std::size_t>(h) * w;
  auto v = t.values();
  for (std::size_t p = 0; p < plane; ++p) {
    for (int ch = 0; ch < c; ++ch) out.data[p * c + ch] = v[ch * plane + p];
  }
  return out;
}

namespace {

struct PngReader {
  png_image image;
  std::vector<png_byte> buffer;

  explicit PngReader(const std::filesystem::path& path, bool force_rgb) {
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
      throw DataError("cannot read PNG " + path.string() + ": " + image.message);
    }
    const bool color = force_rgb || (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    buffer.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
      const std::string msg = image.message;
      png_image_free(&image);
      throw DataError("cannot decode PNG " + path.string() + ": " + msg);
    }
  }
  int channels() const { return (image.format & PNG_FORMAT_FLAG_COLOR) ? 3 : 1; }
};

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
  PngReader reader(path, false);
  const int c = reader.channels();
  RasterImage out(static_cast<int>(reader.image.height), static_cast<int>(reader.image.width), c,
                  ValueRange::kByte);
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = reader.buffer[i];
  return out;
}

void write_png(const std::filesystem::path& path, const RasterImage& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidInput("write_png: only 1- or 3-channel images are supported");
  }
  std::vector<png_byte> buffer(image.data.size());
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::clamp(std::round(image.data[i]), 0.0, 255.0));
  }
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = image.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  ensure_parent(path);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, buffer.data(), 0, nullptr)) {
    throw DataError("cannot write PNG " + path.string() + ": " + png.message);
  }
}

LabelRaster read_label_png(const std::filesystem::path& path) {
  PngReader reader(path, false);
  LabelRaster out(static_cast<int>(reader.image.height), static_cast<int>(reader.image.width));
  if (reader.channels() == 1) {
    std::copy(reader.buffer.begin(), reader.buffer.end(), out.ids.begin());
  } else {
    const auto& palette = class_palette();
    for (std::size_t p = 0; p < out.ids.size(); ++p) {
      const png_byte* px = &reader.buffer[p * 3];
      int id = -1;
      for (int k = 0; k < kNumClasses; ++k) {
        if (px[0] == palette[k][0] && px[1] == palette[k][1] && px[2] == palette[k][2]) id = k;
      }
      if (id < 0) throw DataError("label PNG " + path.string() + " contains a colour outside the class palette");
      out.ids[p] = static_cast<std::uint8_t>(id);
    }
  }
  out.validate();
  return out;
}

void write_label_png(const std::filesystem::path& path, const LabelRaster& labels) {
  labels.validate();
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(labels.width);
  png.height = static_cast<png_uint_32>(labels.height);
  png.format = PNG_FORMAT_RGB_COLORMAP;
  png.colormap_entries = kNumClasses;
  std::array<png_byte, 3 * kNumClasses> colormap{};
  for (int k = 0; k < kNumClasses; ++k) {
    for (int ch = 0; ch < 3; ++ch) colormap[k * 3 + ch] = class_palette()[k][ch];
  }
  ensure_parent(path);
  if (!png_image_write_to_file(&png, path.string().c_str(), 0, labels.ids.data(), 0, colormap.data())) {
    throw DataError("cannot write label PNG " + path.string() + ": " + png.message);
  }
}

}  // namespace semi2i
