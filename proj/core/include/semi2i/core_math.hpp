#pragma once

// Closed-form style kernels: per-channel statistics, adaptive instance
// normalization, moving-average global statistics and Sobel gradients.

#include <vector>

#include "semi2i/tensor.hpp"

namespace semi2i {

using ImageTensor = Tensor;      // N x C x H x W, values in [-1, 1]
using EmbeddingTensor = Tensor;  // N x C x H x W encoder output

/// Per-channel mean and population standard deviation of an embedding.
struct ChannelStats {
  std::vector<double> mu;
  std::vector<double> sigma;

  static ChannelStats zeros(int channels);
  int channels() const { return static_cast<int>(mu.size()); }
  /// Throws InvalidInput unless sizes agree and every sigma is >= 0 and finite.
  void validate() const;
  bool operator==(const ChannelStats&) const = default;
};

/// Statistics over batch and spatial positions of each channel (1/N variance).
ChannelStats instance_stats(const EmbeddingTensor& emb);

/// Re-normalizes each channel of `emb` to the target mean/std:
///   out[c] = target.sigma[c] * (emb[c] - mu_c) / (sigma_c + eps) + target.mu[c]
/// Differentiable with respect to `emb`.
EmbeddingTensor adain(const EmbeddingTensor& emb, const ChannelStats& target, double eps = 1e-5);

/// d_rate * global + (1 - d_rate) * current, elementwise on mu and sigma.
ChannelStats ema_update(const ChannelStats& global, const ChannelStats& current, double d_rate);

struct SobelGradients {
  ImageTensor gx;
  ImageTensor gy;
};

/// Per-channel 3x3 Sobel cross-correlation, edge-replicated borders, output
/// the same size as the input. Differentiable.
SobelGradients sobel_gradients(const ImageTensor& image);

/// Stats as differentiable [C] tensors, for use inside training graphs.
struct StatsTensors {
  Tensor mu;
  Tensor sigma;
  ChannelStats values() const;
};
StatsTensors stats_tensors(const EmbeddingTensor& emb);

}  // namespace semi2i
