#include "semi2i/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "semi2i/errors.hpp"

namespace semi2i::ops {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

struct Dims4 {
  int n, c, h, w;
  std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
  std::size_t sample() const { return static_cast<std::size_t>(c) * plane(); }
};

Dims4 dims4(const Tensor& t, const char* op) {
  if (t.rank() != 4) {
    throw InvalidInput(std::string(op) + ": expected NCHW tensor, got " + to_string(t.shape()));
  }
  return {t.dim(0), t.dim(1), t.dim(2), t.dim(3)};
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw InvalidInput(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                       to_string(b.shape()));
  }
}

void require_scalar(const Tensor& t, const char* op) {
  if (t.numel() != 1) throw InvalidInput(std::string(op) + ": expected single-element tensor");
}

// Lays out the k x k receptive fields of a C x H x W image as the columns of
// a (C*k*k) x (out_h*out_w) matrix.
void im2col(const double* img, int channels, int height, int width, int k, int stride, int pad,
            int out_h, int out_w, double* cols) {
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        double* dst = cols + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * out_plane;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - pad + ki;
          double* row = dst + static_cast<std::size_t>(oh) * out_w;
          if (ih < 0 || ih >= height) {
            std::fill(row, row + out_w, 0.0);
            continue;
          }
          const double* src = img + (static_cast<std::size_t>(c) * height + ih) * width;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - pad + kj;
            row[ow] = (iw >= 0 && iw < width) ? src[iw] : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add inverse of im2col.
void col2im(const double* cols, int channels, int height, int width, int k, int stride, int pad,
            int out_h, int out_w, double* img) {
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  for (int c = 0; c < channels; ++c) {
    for (int ki = 0; ki < k; ++ki) {
      for (int kj = 0; kj < k; ++kj) {
        const double* src = cols + (static_cast<std::size_t>(c) * k * k + ki * k + kj) * out_plane;
        for (int oh = 0; oh < out_h; ++oh) {
          const int ih = oh * stride - pad + ki;
          if (ih < 0 || ih >= height) continue;
          const double* row = src + static_cast<std::size_t>(oh) * out_w;
          double* dst = img + (static_cast<std::size_t>(c) * height + ih) * width;
          for (int ow = 0; ow < out_w; ++ow) {
            const int iw = ow * stride - pad + kj;
            if (iw >= 0 && iw < width) dst[iw] += row[ow];
          }
        }
      }
    }
  }
}

template <typename Fn, typename Deriv>
Tensor unary(const Tensor& x, Fn fn, Deriv deriv) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(xv[i]);
  return make_result(x.shape(), std::move(out), {x}, [x, deriv](std::span<const double> g) {
    auto gx = accumulate_grad(x);
    auto xv = x.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * deriv(xv[i]);
  });
}

int clamp_index(int i, int n) { return i < 0 ? 0 : (i >= n ? n - 1 : i); }

constexpr double kSobelX[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
constexpr double kSobelY[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};

Tensor sobel(const Tensor& x, const double (&kernel)[3][3], const char* op) {
  const Dims4 d = dims4(x, op);
  if (d.h < 3 || d.w < 3) {
    throw InvalidInput(std::string(op) + ": image must be at least 3x3, got " + to_string(x.shape()));
  }
  const bool horizontal = kernel[1][0] != 0.0;
  std::vector<double> out(x.numel(), 0.0);
  auto xv = x.values();
  const std::size_t planes = static_cast<std::size_t>(d.n) * d.c;
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * d.plane();
    double* dst = out.data() + p * d.plane();
    for (int r = 0; r < d.h; ++r) {
      for (int c = 0; c < d.w; ++c) {
        // both kernels are antisymmetric; summing differences keeps flat regions at exactly zero
        auto px = [&](int i, int j) {
          return src[static_cast<std::size_t>(clamp_index(r + i - 1, d.h)) * d.w + clamp_index(c + j - 1, d.w)];
        };
        double acc = 0.0;
        for (int k = 0; k < 3; ++k) {
          acc += horizontal ? kernel[k][2] * (px(k, 2) - px(k, 0)) : kernel[2][k] * (px(2, k) - px(0, k));
        }
        dst[static_cast<std::size_t>(r) * d.w + c] = acc;
      }
    }
  }
  return make_result(x.shape(), std::move(out), {x}, [x, d, planes, &kernel](std::span<const double> g) {
    auto gx = accumulate_grad(x);
    for (std::size_t p = 0; p < planes; ++p) {
      const double* gp = g.data() + p * d.plane();
      double* dst = gx.data() + p * d.plane();
      for (int r = 0; r < d.h; ++r) {
        for (int c = 0; c < d.w; ++c) {
          const double gv = gp[static_cast<std::size_t>(r) * d.w + c];
          if (gv == 0.0) continue;
          for (int i = 0; i < 3; ++i) {
            const int rr = clamp_index(r + i - 1, d.h);
            for (int j = 0; j < 3; ++j) {
              if (kernel[i][j] == 0.0) continue;
              dst[static_cast<std::size_t>(rr) * d.w + clamp_index(c + j - 1, d.w)] += kernel[i][j] * gv;
            }
          }
        }
      }
    }
  });
}

// Per-channel population moments over (N, H, W).
void channel_moments(const Tensor& x, std::vector<double>& mean, std::vector<double>& stddev) {
  const Dims4 d = dims4(x, "channel statistics");
  const std::size_t count = static_cast<std::size_t>(d.n) * d.plane();
  if (count == 0 || d.c == 0) throw InvalidInput("channel statistics: empty tensor");
  auto xv = x.values();
  mean.assign(d.c, 0.0);
  stddev.assign(d.c, 0.0);
  for (int c = 0; c < d.c; ++c) {
    double sum = 0.0;
    for (int n = 0; n < d.n; ++n) {
      const double* p = xv.data() + n * d.sample() + c * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) sum += p[i];
    }
    const double m = sum / static_cast<double>(count);
    double sq = 0.0;
    for (int n = 0; n < d.n; ++n) {
      const double* p = xv.data() + n * d.sample() + c * d.plane();
      for (std::size_t i = 0; i < d.plane(); ++i) sq += (p[i] - m) * (p[i] - m);
    }
    mean[c] = m;
    stddev[c] = std::sqrt(sq / static_cast<double>(count));
  }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    for (const Tensor* t : {&a, &b}) {
      auto gt = accumulate_grad(*t);
      for (std::size_t i = 0; i < gt.size(); ++i) gt[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  std::vector<double> out(a.numel());
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return make_result(a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    auto ga = accumulate_grad(a);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
    auto gb = accumulate_grad(b);
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
  });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double v) { return v * factor; }, [factor](double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double offset) {
  return unary(a, [offset](double v) { return v + offset; }, [](double) { return 1.0; });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  return unary(
      x, [negative_slope](double v) { return v > 0.0 ? v : negative_slope * v; },
      [negative_slope](double v) { return v > 0.0 ? 1.0 : negative_slope; });
}

Tensor relu(const Tensor& x) { return leaky_relu(x, 0.0); }

Tensor tanh(const Tensor& x) {
  std::vector<double> out(x.numel());
  auto xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  if (!grad_enabled() || !x.requires_grad()) return make_result(x.shape(), std::move(out), {x}, nullptr);
  auto y = std::make_shared<const std::vector<double>>(out);
  return make_result(x.shape(), std::move(out), {x}, [x, y](std::span<const double> g) {
    auto gx = accumulate_grad(x);
    const auto& yv = *y;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * (1.0 - yv[i] * yv[i]);
  });
}

Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding) {
  const Dims4 in = dims4(x, "conv2d");
  const Dims4 wd = dims4(weight, "conv2d weight");
  if (wd.c != in.c || wd.h != wd.w) {
    throw InvalidInput("conv2d: weight " + to_string(weight.shape()) + " incompatible with input " +
                       to_string(x.shape()));
  }
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(wd.n)) {
    throw InvalidInput("conv2d: bias size mismatch");
  }
  if (stride < 1 || padding < 0) throw InvalidInput("conv2d: invalid stride/padding");
  const int k = wd.h;
  const int out_h = (in.h + 2 * padding - k) / stride + 1;
  const int out_w = (in.w + 2 * padding - k) / stride + 1;
  if (in.h + 2 * padding < k || in.w + 2 * padding < k || out_h <= 0 || out_w <= 0) {
    throw InvalidInput("conv2d: input " + to_string(x.shape()) + " too small for kernel " +
                       std::to_string(k));
  }
  const int cout = wd.n;
  const int kk = in.c * k * k;
  const int cols_n = out_h * out_w;

  std::vector<double> out(static_cast<std::size_t>(in.n) * cout * cols_n);
  std::vector<double> cols(static_cast<std::size_t>(kk) * cols_n);
  CMapR wm(weight.values().data(), cout, kk);
  for (int n = 0; n < in.n; ++n) {
    im2col(x.values().data() + n * in.sample(), in.c, in.h, in.w, k, stride, padding, out_h, out_w,
           cols.data());
    MapR on(out.data() + static_cast<std::size_t>(n) * cout * cols_n, cout, cols_n);
    on.noalias() = wm * CMapR(cols.data(), kk, cols_n);
    if (bias.defined()) {
      auto bv = bias.values();
      for (int c = 0; c < cout; ++c) on.row(c).array() += bv[c];
    }
  }

  return make_result(
      Shape{in.n, cout, out_h, out_w}, std::move(out), {x, weight, bias},
      [=](std::span<const double> g) {
        auto gx = accumulate_grad(x);
        auto gw = accumulate_grad(weight);
        auto gb = accumulate_grad(bias);
        CMapR wm(weight.values().data(), cout, kk);
        std::vector<double> cols(static_cast<std::size_t>(kk) * cols_n);
        for (int n = 0; n < in.n; ++n) {
          CMapR gn(g.data() + static_cast<std::size_t>(n) * cout * cols_n, cout, cols_n);
          if (!gb.empty()) {
            // sequential on purpose: Eigen's vectorized sum depends on buffer alignment
            for (int c = 0; c < cout; ++c) {
              double acc = 0.0;
              for (Eigen::Index i = 0; i < cols_n; ++i) acc += gn(c, i);
              gb[c] += acc;
            }
          }
          if (!gw.empty()) {
            im2col(x.values().data() + n * in.sample(), in.c, in.h, in.w, k, stride, padding, out_h,
                   out_w, cols.data());
            MapR(gw.data(), cout, kk).noalias() += gn * CMapR(cols.data(), kk, cols_n).transpose();
          }
          if (!gx.empty()) {
            MapR(cols.data(), kk, cols_n).noalias() = wm.transpose() * gn;
            col2im(cols.data(), in.c, in.h, in.w, k, stride, padding, out_h, out_w,
                   gx.data() + n * in.sample());
          }
        }
      });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
                        int padding, int output_padding) {
  const Dims4 in = dims4(x, "conv_transpose2d");
  const Dims4 wd = dims4(weight, "conv_transpose2d weight");
  if (wd.n != in.c || wd.h != wd.w) {
    throw InvalidInput("conv_transpose2d: weight " + to_string(weight.shape()) +
                       " incompatible with input " + to_string(x.shape()));
  }
  if (stride < 1 || padding < 0 || output_padding < 0 || output_padding >= stride) {
    throw InvalidInput("conv_transpose2d: invalid stride/padding");
  }
  const int cout = wd.c;
  if (bias.defined() && bias.numel() != static_cast<std::size_t>(cout)) {
    throw InvalidInput("conv_transpose2d: bias size mismatch");
  }
  const int k = wd.h;
  const int out_h = (in.h - 1) * stride - 2 * padding + k + output_padding;
  const int out_w = (in.w - 1) * stride - 2 * padding + k + output_padding;
  if (out_h <= 0 || out_w <= 0) throw InvalidInput("conv_transpose2d: empty output");
  const int kk = cout * k * k;
  const int cols_n = in.h * in.w;
  const std::size_t out_sample = static_cast<std::size_t>(cout) * out_h * out_w;

  std::vector<double> out(static_cast<std::size_t>(in.n) * out_sample, 0.0);
  std::vector<double> cols(static_cast<std::size_t>(kk) * cols_n);
  CMapR wm(weight.values().data(), in.c, kk);
  for (int n = 0; n < in.n; ++n) {
    CMapR xn(x.values().data() + n * in.sample(), in.c, cols_n);
    MapR(cols.data(), kk, cols_n).noalias() = wm.transpose() * xn;
    double* on = out.data() + n * out_sample;
    col2im(cols.data(), cout, out_h, out_w, k, stride, padding, in.h, in.w, on);
    if (bias.defined()) {
      auto bv = bias.values();
      const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
      for (int c = 0; c < cout; ++c) {
        for (std::size_t i = 0; i < plane; ++i) on[c * plane + i] += bv[c];
      }
    }
  }

  return make_result(
      Shape{in.n, cout, out_h, out_w}, std::move(out), {x, weight, bias},
      [=](std::span<const double> g) {
        auto gx = accumulate_grad(x);
        auto gw = accumulate_grad(weight);
        auto gb = accumulate_grad(bias);
        CMapR wm(weight.values().data(), in.c, kk);
        std::vector<double> cols(static_cast<std::size_t>(kk) * cols_n);
        const std::size_t plane = static_cast<std::size_t>(out_h) * out_w;
        for (int n = 0; n < in.n; ++n) {
          const double* gn = g.data() + n * out_sample;
          if (!gb.empty()) {
            for (int c = 0; c < cout; ++c) {
              double s = 0.0;
              for (std::size_t i = 0; i < plane; ++i) s += gn[c * plane + i];
              gb[c] += s;
            }
          }
          if (gx.empty() && gw.empty()) continue;
          im2col(gn, cout, out_h, out_w, k, stride, padding, in.h, in.w, cols.data());
          CMapR gcols(cols.data(), kk, cols_n);
          if (!gx.empty()) {
            MapR(gx.data() + n * in.sample(), in.c, cols_n).noalias() += wm * gcols;
          }
          if (!gw.empty()) {
            CMapR xn(x.values().data() + n * in.sample(), in.c, cols_n);
            MapR(gw.data(), in.c, kk).noalias() += xn * gcols.transpose();
          }
        }
      });
}

Tensor instance_norm(const Tensor& x, double eps) {
  const Dims4 d = dims4(x, "instance_norm");
  if (d.plane() == 0) throw InvalidInput("instance_norm: empty spatial extent");
  const std::size_t planes = static_cast<std::size_t>(d.n) * d.c;
  const std::size_t m = d.plane();
  std::vector<double> out(x.numel());
  std::vector<double> inv_std(planes);
  auto xv = x.values();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * m;
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += src[i];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (std::size_t i = 0; i < m; ++i) var += (src[i] - mean) * (src[i] - mean);
    var /= static_cast<double>(m);
    const double is = 1.0 / std::sqrt(var + eps);
    inv_std[p] = is;
    double* dst = out.data() + p * m;
    for (std::size_t i = 0; i < m; ++i) dst[i] = (src[i] - mean) * is;
  }
  if (!grad_enabled() || !x.requires_grad()) return make_result(x.shape(), std::move(out), {x}, nullptr);
  auto y = std::make_shared<const std::vector<double>>(out);
  return make_result(x.shape(), std::move(out), {x},
                     [x, y, inv_std, planes, m](std::span<const double> g) {
                       auto gx = accumulate_grad(x);
                       const auto& yv = *y;
                       for (std::size_t p = 0; p < planes; ++p) {
                         const double* gp = g.data() + p * m;
                         const double* yp = yv.data() + p * m;
                         double mean_g = 0.0;
                         double mean_gy = 0.0;
                         for (std::size_t i = 0; i < m; ++i) {
                           mean_g += gp[i];
                           mean_gy += gp[i] * yp[i];
                         }
                         mean_g /= static_cast<double>(m);
                         mean_gy /= static_cast<double>(m);
                         double* dst = gx.data() + p * m;
                         for (std::size_t i = 0; i < m; ++i) {
                           dst[i] += inv_std[p] * (gp[i] - mean_g - yp[i] * mean_gy);
                         }
                       }
                     });
}

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  const Dims4 da = dims4(a, "concat_channels");
  const Dims4 db = dims4(b, "concat_channels");
  if (da.n != db.n || da.h != db.h || da.w != db.w) {
    throw InvalidInput("concat_channels: incompatible shapes " + to_string(a.shape()) + " and " +
                       to_string(b.shape()));
  }
  const std::size_t sa = da.sample();
  const std::size_t sb = db.sample();
  std::vector<double> out(a.numel() + b.numel());
  for (int n = 0; n < da.n; ++n) {
    std::copy_n(a.values().data() + n * sa, sa, out.data() + n * (sa + sb));
    std::copy_n(b.values().data() + n * sb, sb, out.data() + n * (sa + sb) + sa);
  }
  return make_result(Shape{da.n, da.c + db.c, da.h, da.w}, std::move(out), {a, b},
                     [a, b, sa, sb, n = da.n](std::span<const double> g) {
                       auto ga = accumulate_grad(a);
                       auto gb = accumulate_grad(b);
                       for (int i = 0; i < n; ++i) {
                         const double* src = g.data() + i * (sa + sb);
                         if (!ga.empty()) {
                           for (std::size_t j = 0; j < sa; ++j) ga[i * sa + j] += src[j];
                         }
                         if (!gb.empty()) {
                           for (std::size_t j = 0; j < sb; ++j) gb[i * sb + j] += src[sa + j];
                         }
                       }
                     });
}

Tensor concat_batch(std::span<const Tensor> parts) {
  if (parts.empty()) throw InvalidInput("concat_batch: no tensors");
  const Dims4 first = dims4(parts[0], "concat_batch");
  int total = 0;
  for (const auto& p : parts) {
    const Dims4 d = dims4(p, "concat_batch");
    if (d.c != first.c || d.h != first.h || d.w != first.w) {
      throw InvalidInput("concat_batch: incompatible shapes");
    }
    total += d.n;
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(total) * first.sample());
  std::vector<Tensor> parents(parts.begin(), parts.end());
  for (const auto& p : parts) out.insert(out.end(), p.values().begin(), p.values().end());
  return make_result(Shape{total, first.c, first.h, first.w}, std::move(out), parents,
                     [parents](std::span<const double> g) {
                       std::size_t offset = 0;
                       for (const auto& p : parents) {
                         auto gp = accumulate_grad(p);
                         for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += g[offset + i];
                         offset += p.numel();
                       }
                     });
}

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  const Dims4 d = dims4(x, "resize_bilinear");
  if (out_h <= 0 || out_w <= 0) throw InvalidInput("resize_bilinear: invalid target size");
  if (out_h == d.h && out_w == d.w) return x;

  struct Tap {
    int i0, i1;
    double t;
  };
  auto taps = [](int in, int out) {
    std::vector<Tap> v(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      double src = (o + 0.5) * scale - 0.5;
      if (src < 0.0) src = 0.0;
      int i0 = static_cast<int>(src);
      if (i0 > in - 1) i0 = in - 1;
      const int i1 = i0 + 1 < in ? i0 + 1 : in - 1;
      v[o] = {i0, i1, src - i0};
    }
    return v;
  };
  const auto th = taps(d.h, out_h);
  const auto tw = taps(d.w, out_w);
  const std::size_t planes = static_cast<std::size_t>(d.n) * d.c;
  const std::size_t out_plane = static_cast<std::size_t>(out_h) * out_w;
  std::vector<double> out(planes * out_plane);
  auto xv = x.values();
  for (std::size_t p = 0; p < planes; ++p) {
    const double* src = xv.data() + p * d.plane();
    double* dst = out.data() + p * out_plane;
    for (int oh = 0; oh < out_h; ++oh) {
      const Tap& a = th[oh];
      for (int ow = 0; ow < out_w; ++ow) {
        const Tap& b = tw[ow];
        const double top = src[a.i0 * d.w + b.i0] * (1 - b.t) + src[a.i0 * d.w + b.i1] * b.t;
        const double bot = src[a.i1 * d.w + b.i0] * (1 - b.t) + src[a.i1 * d.w + b.i1] * b.t;
        dst[oh * out_w + ow] = top * (1 - a.t) + bot * a.t;
      }
    }
  }
  return make_result(Shape{d.n, d.c, out_h, out_w}, std::move(out), {x},
                     [x, d, th, tw, planes, out_plane, out_h, out_w](std::span<const double> g) {
                       auto gx = accumulate_grad(x);
                       for (std::size_t p = 0; p < planes; ++p) {
                         const double* gp = g.data() + p * out_plane;
                         double* dst = gx.data() + p * d.plane();
                         for (int oh = 0; oh < out_h; ++oh) {
                           const Tap& a = th[oh];
                           for (int ow = 0; ow < out_w; ++ow) {
                             const Tap& b = tw[ow];
                             const double gv = gp[oh * out_w + ow];
                             dst[a.i0 * d.w + b.i0] += gv * (1 - a.t) * (1 - b.t);
                             dst[a.i0 * d.w + b.i1] += gv * (1 - a.t) * b.t;
                             dst[a.i1 * d.w + b.i0] += gv * a.t * (1 - b.t);
                             dst[a.i1 * d.w + b.i1] += gv * a.t * b.t;
                           }
                         }
                       }
                     });
}

Tensor max_pool2x2(const Tensor& x) {
  const Dims4 d = dims4(x, "max_pool2x2");
  if (d.h % 2 || d.w % 2) throw InvalidInput("max_pool2x2: spatial size must be even");
  const int oh = d.h / 2;
  const int ow = d.w / 2;
  const std::size_t planes = static_cast<std::size_t>(d.n) * d.c;
  const std::size_t out_plane = static_cast<std::size_t>(oh) * ow;
  std::vector<double> out(planes * out_plane);
  std::vector<std::size_t> arg(out.size());
  auto xv = x.values();
  for (std::size_t p = 0; p < planes; ++p) {
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        std::size_t best = p * d.plane() + static_cast<std::size_t>(2 * r) * d.w + 2 * c;
        for (int i = 0; i < 2; ++i) {
          for (int j = 0; j < 2; ++j) {
            const std::size_t idx = p * d.plane() + static_cast<std::size_t>(2 * r + i) * d.w + 2 * c + j;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = p * out_plane + static_cast<std::size_t>(r) * ow + c;
        out[o] = xv[best];
        arg[o] = best;
      }
    }
  }
  return make_result(Shape{d.n, d.c, oh, ow}, std::move(out), {x},
                     [x, arg = std::move(arg)](std::span<const double> g) {
                       auto gx = accumulate_grad(x);
                       for (std::size_t i = 0; i < arg.size(); ++i) gx[arg[i]] += g[i];
                     });
}

Tensor channel_mean(const Tensor& x) {
  std::vector<double> mean, stddev;
  channel_moments(x, mean, stddev);
  const Dims4 d = dims4(x, "channel_mean");
  const double count = static_cast<double>(d.n) * static_cast<double>(d.plane());
  return make_result(Shape{d.c}, std::move(mean), {x}, [x, d, count](std::span<const double> g) {
    auto gx = accumulate_grad(x);
    for (int n = 0; n < d.n; ++n) {
      for (int c = 0; c < d.c; ++c) {
        double* p = gx.data() + n * d.sample() + c * d.plane();
        for (std::size_t i = 0; i < d.plane(); ++i) p[i] += g[c] / count;
      }
    }
  });
}

Tensor channel_std(const Tensor& x) {
  std::vector<double> mean, stddev;
  channel_moments(x, mean, stddev);
  const Dims4 d = dims4(x, "channel_std");
  const double count = static_cast<double>(d.n) * static_cast<double>(d.plane());
  std::vector<double> sd = stddev;
  return make_result(Shape{d.c}, std::move(stddev), {x},
                     [x, d, count, mean, sd](std::span<const double> g) {
                       auto gx = accumulate_grad(x);
                       auto xv = x.values();
                       for (int c = 0; c < d.c; ++c) {
                         // d sigma / d x_j = (x_j - mean) / (count * sigma); zero at sigma == 0.
                         if (sd[c] <= 0.0) continue;
                         const double f = g[c] / (count * sd[c]);
                         for (int n = 0; n < d.n; ++n) {
                           const std::size_t base = n * d.sample() + c * d.plane();
                           for (std::size_t i = 0; i < d.plane(); ++i) {
                             gx[base + i] += f * (xv[base + i] - mean[c]);
                           }
                         }
                       }
                     });
}

Tensor adain(const Tensor& x, const Tensor& mu, const Tensor& sigma, double eps) {
  const Dims4 d = dims4(x, "adain");
  if (mu.numel() != static_cast<std::size_t>(d.c) || sigma.numel() != static_cast<std::size_t>(d.c)) {
    throw InvalidInput("adain: style has " + std::to_string(mu.numel()) + "/" +
                       std::to_string(sigma.numel()) + " channels, embedding has " +
                       std::to_string(d.c));
  }
  if (!(eps > 0.0)) throw InvalidInput("adain: eps must be positive");
  std::vector<double> mean, stddev;
  channel_moments(x, mean, stddev);
  const double count = static_cast<double>(d.n) * static_cast<double>(d.plane());
  auto xv = x.values();
  auto mv = mu.values();
  auto sv = sigma.values();
  std::vector<double> out(x.numel());
  for (int n = 0; n < d.n; ++n) {
    for (int c = 0; c < d.c; ++c) {
      const std::size_t base = n * d.sample() + c * d.plane();
      const double inv = 1.0 / (stddev[c] + eps);
      for (std::size_t i = 0; i < d.plane(); ++i) {
        out[base + i] = sv[c] * (xv[base + i] - mean[c]) * inv + mv[c];
      }
    }
  }
  return make_result(
      x.shape(), std::move(out), {x, mu, sigma},
      [x, mu, sigma, d, eps, count, mean, stddev](std::span<const double> g) {
        auto gx = accumulate_grad(x);
        auto gmu = accumulate_grad(mu);
        auto gsigma = accumulate_grad(sigma);
        auto xv = x.values();
        auto sv = sigma.values();
        for (int c = 0; c < d.c; ++c) {
          const double denom = stddev[c] + eps;
          double sum_g = 0.0;
          double sum_g_centered = 0.0;
          for (int n = 0; n < d.n; ++n) {
            const std::size_t base = n * d.sample() + c * d.plane();
            for (std::size_t i = 0; i < d.plane(); ++i) {
              sum_g += g[base + i];
              sum_g_centered += g[base + i] * (xv[base + i] - mean[c]);
            }
          }
          if (!gmu.empty()) gmu[c] += sum_g;
          if (!gsigma.empty()) gsigma[c] += sum_g_centered / denom;
          if (gx.empty()) continue;
          // Chain through the normalized value with g~ = g * sigma_target.
          const double mean_gt = sv[c] * sum_g / count;
          const double dot = sv[c] * sum_g_centered;
          const double corr = stddev[c] > 0.0 ? dot / (denom * denom * count * stddev[c]) : 0.0;
          for (int n = 0; n < d.n; ++n) {
            const std::size_t base = n * d.sample() + c * d.plane();
            for (std::size_t i = 0; i < d.plane(); ++i) {
              gx[base + i] += (sv[c] * g[base + i] - mean_gt) / denom - (xv[base + i] - mean[c]) * corr;
            }
          }
        }
      });
}

Tensor sobel_x(const Tensor& x) { return sobel(x, kSobelX, "sobel_x"); }
Tensor sobel_y(const Tensor& x) { return sobel(x, kSobelY, "sobel_y"); }

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw InvalidInput("mean: empty tensor");
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double count = static_cast<double>(x.numel());
  return make_result(Shape{}, {s / count}, {x}, [x, count](std::span<const double> g) {
    auto gx = accumulate_grad(x);
    for (double& v : gx) v += g[0] / count;
  });
}

Tensor l1_mean(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "l1_mean");
  if (a.numel() == 0) throw InvalidInput("l1_mean: empty tensors");
  auto av = a.values();
  auto bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) s += std::abs(av[i] - bv[i]);
  const double count = static_cast<double>(av.size());
  return make_result(Shape{}, {s / count}, {a, b}, [a, b, count](std::span<const double> g) {
    auto ga = accumulate_grad(a);
    auto gb = accumulate_grad(b);
    auto av = a.values();
    auto bv = b.values();
    const double f = g[0] / count;
    for (std::size_t i = 0; i < av.size(); ++i) {
      const double diff = av[i] - bv[i];
      const double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      if (!ga.empty()) ga[i] += f * sgn;
      if (!gb.empty()) gb[i] -= f * sgn;
    }
  });
}

Tensor mse_to_constant(const Tensor& x, double target) {
  if (x.numel() == 0) throw InvalidInput("mse_to_constant: empty tensor");
  double s = 0.0;
  for (double v : x.values()) s += (v - target) * (v - target);
  const double count = static_cast<double>(x.numel());
  return make_result(Shape{}, {s / count}, {x}, [x, target, count](std::span<const double> g) {
    auto gx = accumulate_grad(x);
    auto xv = x.values();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0] * 2.0 * (xv[i] - target) / count;
  });
}

Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights) {
  if (terms.size() != weights.size()) throw InvalidInput("weighted_sum: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require_scalar(terms[i], "weighted_sum");
    s += weights[i] * terms[i].item();
  }
  std::vector<Tensor> parents(terms.begin(), terms.end());
  std::vector<double> w(weights.begin(), weights.end());
  return make_result(Shape{}, {s}, parents, [parents, w](std::span<const double> g) {
    for (std::size_t i = 0; i < parents.size(); ++i) {
      auto gp = accumulate_grad(parents[i]);
      if (!gp.empty()) gp[0] += g[0] * w[i];
    }
  });
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  const Dims4 d = dims4(logits, "softmax_cross_entropy");
  const std::size_t pixels = static_cast<std::size_t>(d.n) * d.plane();
  if (labels.size() != pixels) throw InvalidInput("softmax_cross_entropy: label count mismatch");
  auto lv = logits.values();
  std::vector<double> prob(logits.numel());
  double loss = 0.0;
  for (int n = 0; n < d.n; ++n) {
    for (std::size_t i = 0; i < d.plane(); ++i) {
      const int label = labels[n * d.plane() + i];
      if (label < 0 || label >= d.c) {
        throw InvalidInput("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
      }
      double mx = lv[n * d.sample() + i];
      for (int c = 1; c < d.c; ++c) mx = std::max(mx, lv[n * d.sample() + c * d.plane() + i]);
      double z = 0.0;
      for (int c = 0; c < d.c; ++c) {
        const std::size_t idx = n * d.sample() + c * d.plane() + i;
        prob[idx] = std::exp(lv[idx] - mx);
        z += prob[idx];
      }
      for (int c = 0; c < d.c; ++c) prob[n * d.sample() + c * d.plane() + i] /= z;
      loss -= std::log(std::max(prob[n * d.sample() + label * d.plane() + i], 1e-300));
    }
  }
  const double count = static_cast<double>(pixels);
  std::vector<int> lab(labels.begin(), labels.end());
  return make_result(Shape{}, {loss / count}, {logits},
                     [logits, d, prob = std::move(prob), lab = std::move(lab), count](std::span<const double> g) {
                       auto gl = accumulate_grad(logits);
                       const double f = g[0] / count;
                       for (int n = 0; n < d.n; ++n) {
                         for (std::size_t i = 0; i < d.plane(); ++i) {
                           const int label = lab[n * d.plane() + i];
                           for (int c = 0; c < d.c; ++c) {
                             const std::size_t idx = n * d.sample() + c * d.plane() + i;
                             gl[idx] += f * (prob[idx] - (c == label ? 1.0 : 0.0));
                           }
                         }
                       }
                     });
}

}  // namespace semi2i::ops
