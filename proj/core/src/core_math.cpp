#include "semi2i/core_math.hpp"

#include <cmath>
#include <string>

#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"

namespace semi2i {

namespace {

void require_finite(const Tensor& t, const char* what) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) throw InvalidInput(std::string(what) + ": non-finite entry");
  }
}

}  // namespace

ChannelStats ChannelStats::zeros(int channels) {
  return {std::vector<double>(channels, 0.0), std::vector<double>(channels, 0.0)};
}

void ChannelStats::validate() const {
  if (mu.size() != sigma.size()) {
    throw InvalidInput("ChannelStats: mu has " + std::to_string(mu.size()) + " entries, sigma has " +
                       std::to_string(sigma.size()));
  }
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (!std::isfinite(mu[i]) || !std::isfinite(sigma[i]) || sigma[i] < 0.0) {
      throw InvalidInput("ChannelStats: invalid entry at channel " + std::to_string(i));
    }
  }
}

ChannelStats instance_stats(const EmbeddingTensor& emb) {
  if (emb.rank() != 4 || emb.numel() == 0) {
    throw InvalidInput("instance_stats: expected a non-empty NCHW tensor, got " + to_string(emb.shape()));
  }
  require_finite(emb, "instance_stats");
  NoGradGuard no_grad;
  return stats_tensors(emb).values();
}

StatsTensors stats_tensors(const EmbeddingTensor& emb) {
  return {ops::channel_mean(emb), ops::channel_std(emb)};
}

ChannelStats StatsTensors::values() const {
  return {std::vector<double>(mu.values().begin(), mu.values().end()),
          std::vector<double>(sigma.values().begin(), sigma.values().end())};
}

EmbeddingTensor adain(const EmbeddingTensor& emb, const ChannelStats& target, double eps) {
  target.validate();
  if (emb.rank() != 4 || target.channels() != emb.dim(1)) {
    throw InvalidInput("adain: target has " + std::to_string(target.channels()) +
                       " channels, embedding shape is " + to_string(emb.shape()));
  }
  const Shape cs{target.channels()};
  return ops::adain(emb, Tensor(cs, target.mu), Tensor(cs, target.sigma), eps);
}

ChannelStats ema_update(const ChannelStats& global, const ChannelStats& current, double d_rate) {
  if (!(d_rate > 0.0 && d_rate < 1.0)) {
    throw InvalidConfig("ema_update: d_rate must lie in (0, 1), got " + std::to_string(d_rate));
  }
  if (global.channels() != current.channels() || global.sigma.size() != current.sigma.size()) {
    throw InvalidInput("ema_update: channel count mismatch");
  }
  ChannelStats out = global;
  for (std::size_t c = 0; c < out.mu.size(); ++c) {
    // increment form: a fixed point stays bit-exact
    out.mu[c] = global.mu[c] + (1.0 - d_rate) * (current.mu[c] - global.mu[c]);
    out.sigma[c] = global.sigma[c] + (1.0 - d_rate) * (current.sigma[c] - global.sigma[c]);
  }
  return out;
}

SobelGradients sobel_gradients(const ImageTensor& image) {
  return {ops::sobel_x(image), ops::sobel_y(image)};
}

}  // namespace semi2i
