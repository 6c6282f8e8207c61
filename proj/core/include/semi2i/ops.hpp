#pragma once

// Differentiable tensor operations. Image-like tensors are NCHW.

#include <span>
#include <vector>

#include "semi2i/tensor.hpp"

namespace semi2i::ops {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double offset);

Tensor leaky_relu(const Tensor& x, double negative_slope);
Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);

/// Cross-correlation with zero padding. `weight` is Cout x Cin x k x k,
/// `bias` (optional) has Cout entries.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride, int padding);

/// Adjoint of conv2d. `weight` is Cin x Cout x k x k; output side is
/// (in - 1) * stride - 2 * padding + k + output_padding.
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride,
                        int padding, int output_padding);

/// Per (sample, channel) normalization over spatial positions, no affine.
Tensor instance_norm(const Tensor& x, double eps);

Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Concatenates along the batch axis.
Tensor concat_batch(std::span<const Tensor> parts);

/// Half-pixel-centred bilinear resampling; identity when sizes match.
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);

Tensor max_pool2x2(const Tensor& x);

/// Per-channel mean over batch and spatial axes; shape [C].
Tensor channel_mean(const Tensor& x);
/// Per-channel population standard deviation over batch and spatial axes.
Tensor channel_std(const Tensor& x);

/// out = sigma[c] * (x - mean_c(x)) / (std_c(x) + eps) + mu[c]
Tensor adain(const Tensor& x, const Tensor& mu, const Tensor& sigma, double eps);

/// 3x3 Sobel responses per channel with edge-replicated borders.
Tensor sobel_x(const Tensor& x);
Tensor sobel_y(const Tensor& x);

Tensor mean(const Tensor& x);
/// mean(|a - b|)
Tensor l1_mean(const Tensor& a, const Tensor& b);
/// mean((x - target)^2)
Tensor mse_to_constant(const Tensor& x, double target);
/// sum_i weights[i] * terms[i] over single-element tensors.
Tensor weighted_sum(std::span<const Tensor> terms, std::span<const double> weights);

/// Mean pixelwise cross-entropy. `labels` holds N*H*W class ids in [0, K).
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

}  // namespace semi2i::ops
