#include "semi2i/nn.hpp"

#include <algorithm>
#include <cmath>

#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"

namespace semi2i {

std::size_t parameter_count(const ParameterList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

void zero_grad(const ParameterList& params) {
  for (auto p : params) p.tensor.zero_grad();
}

bool all_finite(const ParameterList& params) {
  for (const auto& p : params) {
    for (double v : p.tensor.values()) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

void copy_values(const ParameterList& src, const ParameterList& dst) {
  if (src.size() != dst.size()) throw InvalidInput("copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < src.size(); ++i) {
    if (src[i].name != dst[i].name || src[i].tensor.shape() != dst[i].tensor.shape()) {
      throw InvalidInput("copy_values: mismatch at parameter " + dst[i].name);
    }
    Tensor target = dst[i].tensor;
    std::ranges::copy(src[i].tensor.values(), target.mutable_values().begin());
  }
}

std::vector<double> gaussian_values(std::size_t count, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(count);
  for (double& x : v) x = dist(rng);
  return v;
}

Conv2d::Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
               double init_std, std::mt19937_64& rng)
    : stride_(stride), padding_(padding) {
  const Shape ws{out_channels, in_channels, kernel, kernel};
  weight_ = Tensor(ws, gaussian_values(numel(ws), init_std, rng), true);
  bias_ = Tensor(Shape{out_channels}, 0.0, true);
}

Tensor Conv2d::operator()(const Tensor& x) const {
  return ops::conv2d(x, weight_, bias_, stride_, padding_);
}

void Conv2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

ConvTranspose2d::ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride,
                                 int padding, int output_padding, double init_std,
                                 std::mt19937_64& rng)
    : stride_(stride), padding_(padding), output_padding_(output_padding) {
  const Shape ws{in_channels, out_channels, kernel, kernel};
  weight_ = Tensor(ws, gaussian_values(numel(ws), init_std, rng), true);
  bias_ = Tensor(Shape{out_channels}, 0.0, true);
}

Tensor ConvTranspose2d::operator()(const Tensor& x) const {
  return ops::conv_transpose2d(x, weight_, bias_, stride_, padding_, output_padding_);
}

void ConvTranspose2d::collect(const std::string& prefix, ParameterList& out) const {
  out.push_back({prefix + ".weight", weight_});
  out.push_back({prefix + ".bias", bias_});
}

}  // namespace semi2i
