#pragma once

#include <random>
#include <string>
#include <vector>

#include "semi2i/tensor.hpp"

namespace semi2i {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

/// Parameters in a fixed, deterministic order. The tensors are shared
/// handles: mutating them mutates the owning layer.
using ParameterList = std::vector<NamedTensor>;

std::size_t parameter_count(const ParameterList& params);
void zero_grad(const ParameterList& params);
bool all_finite(const ParameterList& params);
/// Copies values from `src` into `dst` matched by name and shape.
void copy_values(const ParameterList& src, const ParameterList& dst);

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_channels, int out_channels, int kernel, int stride, int padding,
         double init_std, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

  int out_channels() const { return weight_.defined() ? weight_.dim(0) : 0; }

 private:
  Tensor weight_;
  Tensor bias_;
  int stride_ = 1;
  int padding_ = 0;
};

class ConvTranspose2d {
 public:
  ConvTranspose2d() = default;
  ConvTranspose2d(int in_channels, int out_channels, int kernel, int stride, int padding,
                  int output_padding, double init_std, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;
  void collect(const std::string& prefix, ParameterList& out) const;

 private:
  Tensor weight_;
  Tensor bias_;
  int stride_ = 1;
  int padding_ = 0;
  int output_padding_ = 0;
};

/// Zero-mean Gaussian samples; the engine draws in row-major order so a seed
/// fully determines the initialization.
std::vector<double> gaussian_values(std::size_t count, double stddev, std::mt19937_64& rng);

}  // namespace semi2i
