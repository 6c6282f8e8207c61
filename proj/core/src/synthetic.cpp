#include "semi2i/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "semi2i/errors.hpp"

namespace semi2i {

namespace {

using Rgb = std::array<double, 3>;

constexpr Rgb kGround{125.0, 112.0, 82.0};
constexpr Rgb kRoof{182.0, 96.0, 78.0};
constexpr Rgb kAsphalt{150.0, 150.0, 148.0};
constexpr Rgb kCanopy{52.0, 104.0, 46.0};

int poisson(double mean, std::mt19937_64& rng) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

int uniform_int(int lo, int hi, std::mt19937_64& rng) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

double byte_clamp(double v) { return std::clamp(std::round(v), 0.0, 255.0); }

}  // namespace

void SynthConfig::validate() const {
  if (n_images < 1) throw InvalidConfig("synthetic data: n_images must be positive");
  if (height < 16 || width < 16) throw InvalidConfig("synthetic data: images must be at least 16x16");
  for (double v : {prior_a.buildings, prior_a.roads, prior_a.trees, shift.prior_b.buildings, shift.prior_b.roads,
                   shift.prior_b.trees}) {
    if (!(v >= 0.0)) throw InvalidConfig("synthetic data: object densities must be non-negative");
  }
  for (const auto& c : shift.channels) {
    if (!(c.gamma > 0.0)) throw InvalidConfig("synthetic data: gamma must be positive");
  }
  if (!(shift.noise_std >= 0.0)) throw InvalidConfig("synthetic data: noise_std must be non-negative");
}

LabelRaster render_labels(int height, int width, const ScenePrior& prior, std::mt19937_64& rng) {
  LabelRaster labels(height, width, kBackground);
  const double area = static_cast<double>(height) * width / 4096.0;

  const int roads = poisson(prior.roads * std::sqrt(area), rng);
  for (int i = 0; i < roads; ++i) {
    const bool horizontal = uniform_int(0, 1, rng) == 1;
    const int thickness = uniform_int(3, 6, rng);
    const int pos = uniform_int(0, (horizontal ? height : width) - thickness, rng);
    for (int t = 0; t < thickness; ++t) {
      if (horizontal) {
        for (int c = 0; c < width; ++c) labels.at(pos + t, c) = kRoad;
      } else {
        for (int r = 0; r < height; ++r) labels.at(r, pos + t) = kRoad;
      }
    }
  }

  const int buildings = poisson(prior.buildings * area, rng);
  for (int i = 0; i < buildings; ++i) {
    const int bh = uniform_int(5, 14, rng);
    const int bw = uniform_int(5, 14, rng);
    const int r0 = uniform_int(0, height - bh, rng);
    const int c0 = uniform_int(0, width - bw, rng);
    for (int r = r0; r < r0 + bh; ++r) {
      for (int c = c0; c < c0 + bw; ++c) {
        if (labels.at(r, c) != kRoad) labels.at(r, c) = kBuilding;
      }
    }
  }

  const int trees = poisson(prior.trees * area, rng);
  for (int i = 0; i < trees; ++i) {
    const int radius = uniform_int(3, 7, rng);
    const int cr = uniform_int(0, height - 1, rng);
    const int cc = uniform_int(0, width - 1, rng);
    for (int r = std::max(0, cr - radius); r <= std::min(height - 1, cr + radius); ++r) {
      for (int c = std::max(0, cc - radius); c <= std::min(width - 1, cc + radius); ++c) {
        const int dr = r - cr;
        const int dc = c - cc;
        if (dr * dr + dc * dc <= radius * radius && labels.at(r, c) == kBackground) labels.at(r, c) = kTree;
      }
    }
  }
  return labels;
}

RasterImage render_appearance(const LabelRaster& labels, std::mt19937_64& rng) {
  labels.validate();
  const int h = labels.height;
  const int w = labels.width;
  RasterImage img(h, w, 3, ValueRange::kByte);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);

  // Slowly varying ground brightness.
  const double fr = 2.0 * std::numbers::pi / uniform_int(24, 64, rng);
  const double fc = 2.0 * std::numbers::pi / uniform_int(24, 64, rng);
  const double pr = phase(rng);
  const double pc = phase(rng);
  // One roof tint per image keeps the generator cheap but still varied.
  const Rgb roof{kRoof[0] + 12.0 * unit(rng), kRoof[1] + 10.0 * unit(rng), kRoof[2] + 10.0 * unit(rng)};

  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double wave = 10.0 * std::sin(fr * r + pr) * std::cos(fc * c + pc);
      Rgb base{};
      double texture = 0.0;
      switch (labels.at(r, c)) {
        case kBuilding:
          base = roof;
          texture = 5.0;
          break;
        case kRoad:
          base = kAsphalt;
          texture = 4.0;
          break;
        case kTree:
          base = kCanopy;
          texture = 12.0;
          break;
        default:
          base = {kGround[0] + wave, kGround[1] + wave, kGround[2] + 0.6 * wave};
          texture = 8.0;
          break;
      }
      const double shade = texture * unit(rng);
      for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = byte_clamp(base[ch] + shade + 2.0 * unit(rng));
    }
  }
  return img;
}

double shift_value(double x, const ChannelShift& s) {
  const double src = s.invert ? 255.0 - x : x;
  return s.offset + s.gain * 255.0 * std::pow(std::clamp(src, 0.0, 255.0) / 255.0, s.gamma);
}

RasterImage apply_shift(const RasterImage& img, const ShiftSpec& shift, std::mt19937_64& rng) {
  if (img.range != ValueRange::kByte || img.channels != 3) {
    throw InvalidInput("apply_shift: expected an 8-bit RGB image");
  }
  std::normal_distribution<double> noise(0.0, 1.0);
  RasterImage out = img;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double y = shift_value(out.data[i], shift.channels[i % 3]);
    out.data[i] = byte_clamp(y + shift.noise_std * noise(rng));
  }
  return out;
}

std::vector<double> mean_color(std::span<const SyntheticScene> scenes) {
  std::vector<double> sum(3, 0.0);
  double count = 0.0;
  for (const auto& s : scenes) {
    for (std::size_t i = 0; i < s.image.data.size(); ++i) sum[i % 3] += s.image.data[i];
    count += static_cast<double>(s.image.data.size()) / 3.0;
  }
  if (count > 0.0) {
    for (auto& v : sum) v /= count;
  }
  return sum;
}

SyntheticDomains make_synthetic_domains(const SynthConfig& cfg) {
  cfg.validate();
  std::seed_seq seq_a{cfg.seed, std::uint64_t{0xA}};
  std::seed_seq seq_b{cfg.seed, std::uint64_t{0xB}};
  std::mt19937_64 rng_a(seq_a);
  std::mt19937_64 rng_b(seq_b);
  SyntheticDomains out;
  for (int i = 0; i < cfg.n_images; ++i) {
    SyntheticScene s;
    s.labels = render_labels(cfg.height, cfg.width, cfg.prior_a, rng_a);
    s.image = render_appearance(s.labels, rng_a);
    out.a.push_back(std::move(s));
  }
  for (int i = 0; i < cfg.n_images; ++i) {
    SyntheticScene s;
    if (cfg.paired) {
      s.labels = out.a[i].labels;
      s.image = apply_shift(render_appearance(s.labels, rng_b), cfg.shift, rng_b);
    } else {
      s.labels = render_labels(cfg.height, cfg.width, cfg.shift.prior_b, rng_b);
      s.image = apply_shift(render_appearance(s.labels, rng_b), cfg.shift, rng_b);
    }
    out.b.push_back(std::move(s));
  }
  const auto ma = mean_color(out.a);
  const auto mb = mean_color(out.b);
  double gap = 0.0;
  for (int c = 0; c < 3; ++c) gap += (ma[c] - mb[c]) * (ma[c] - mb[c]);
  out.mean_gap = std::sqrt(gap);
  if (out.mean_gap < cfg.shift.min_mean_gap) {
    throw DegenerateInput("synthetic domains differ in mean colour by only " + std::to_string(out.mean_gap) +
                          " (threshold " + std::to_string(cfg.shift.min_mean_gap) + ")");
  }
  return out;
}

}  // namespace semi2i
