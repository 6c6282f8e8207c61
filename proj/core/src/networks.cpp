#include "semi2i/networks.hpp"

#include <algorithm>
#include <string>

#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"

namespace semi2i {

namespace {

constexpr double kDiscriminatorSlope = 0.2;

Tensor maybe_norm(const Tensor& x, NormKind kind, double eps) {
  return kind == NormKind::kInstance ? ops::instance_norm(x, eps) : x;
}

// Channel width after `k` downsampling stages.
int stage_channels(const NetworkConfig& cfg, int k) {
  if (k == cfg.num_downsamples) return cfg.embedding_channels;
  return cfg.base_channels << k;
}

void require_image(const Tensor& x, int channels, const char* what) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw InvalidInput(std::string(what) + ": expected N x " + std::to_string(channels) +
                       " x H x W, got " + to_string(x.shape()));
  }
}

}  // namespace

void NetworkConfig::validate() const {
  if (in_channels < 1 || in_channels_b < 0) throw InvalidConfig("in_channels must be positive");
  if (num_downsamples < 1) throw InvalidConfig("num_downsamples must be >= 1");
  if (base_channels < 4) throw InvalidConfig("base_channels must be >= 4");
  if (embedding_channels < 1) throw InvalidConfig("embedding_channels must be positive");
  if (num_res_blocks < 0) throw InvalidConfig("num_res_blocks must be >= 0");
  if (disc_layers < 1 || disc_base_channels < 1) throw InvalidConfig("invalid discriminator config");
  if (!(init_std > 0.0) || !(norm_eps > 0.0)) throw InvalidConfig("init_std and norm_eps must be positive");
}

Encoder::Encoder(const NetworkConfig& cfg, int in_channels, std::mt19937_64& rng)
    : cfg_(cfg), in_channels_(in_channels) {
  cfg.validate();
  stem_ = Conv2d(in_channels, cfg.base_channels, 7, 1, 3, cfg.init_std, rng);
  for (int k = 0; k < cfg.num_downsamples; ++k) {
    down_.emplace_back(stage_channels(cfg, k), stage_channels(cfg, k + 1), 3, 2, 1, cfg.init_std, rng);
  }
  for (int r = 0; r < 2 * cfg.num_res_blocks; ++r) {
    res_.emplace_back(cfg.embedding_channels, cfg.embedding_channels, 3, 1, 1, cfg.init_std, rng);
  }
}

Encoded Encoder::operator()(const ImageTensor& image) const {
  require_image(image, in_channels_, "encode");
  const int div = cfg_.spatial_divisor();
  if (image.dim(2) % div || image.dim(3) % div) {
    throw InvalidInput("encode: spatial size " + to_string(image.shape()) + " not divisible by " +
                       std::to_string(div));
  }
  const double slope = cfg_.negative_slope;
  const double eps = cfg_.norm_eps;
  Tensor low = ops::leaky_relu(stem_(image), slope);
  Tensor h = low;
  const int blocks = cfg_.num_res_blocks;
  for (int k = 0; k < cfg_.num_downsamples; ++k) {
    h = down_[k](h);
    const bool final_stage = blocks == 0 && k + 1 == cfg_.num_downsamples;
    if (!final_stage) h = maybe_norm(h, cfg_.encoder_norm, eps);
    h = ops::leaky_relu(h, slope);
  }
  for (int r = 0; r < blocks; ++r) {
    Tensor t = ops::leaky_relu(maybe_norm(res_[2 * r](h), cfg_.encoder_norm, eps), slope);
    t = res_[2 * r + 1](t);
    // The last residual branch feeds the embedding directly: no normalization.
    if (r + 1 < blocks) t = maybe_norm(t, cfg_.encoder_norm, eps);
    h = ops::add(h, t);
  }
  return {h, low};
}

ParameterList Encoder::parameters(const std::string& prefix) const {
  ParameterList out;
  stem_.collect(prefix + "stem", out);
  for (std::size_t k = 0; k < down_.size(); ++k) down_[k].collect(prefix + "down" + std::to_string(k), out);
  for (std::size_t r = 0; r < res_.size(); ++r) {
    res_[r].collect(prefix + "res" + std::to_string(r / 2) + "." + std::to_string(r % 2), out);
  }
  return out;
}

Decoder::Decoder(const NetworkConfig& cfg, int out_channels, std::mt19937_64& rng)
    : cfg_(cfg), out_channels_(out_channels) {
  cfg.validate();
  for (int r = 0; r < 2 * cfg.num_res_blocks; ++r) {
    res_.emplace_back(cfg.embedding_channels, cfg.embedding_channels, 3, 1, 1, cfg.init_std, rng);
  }
  for (int k = cfg.num_downsamples; k >= 1; --k) {
    up_.emplace_back(stage_channels(cfg, k) + cfg.base_channels, stage_channels(cfg, k - 1), 3, 2, 1, 1,
                     cfg.init_std, rng);
  }
  out_ = Conv2d(cfg.base_channels, out_channels, 7, 1, 3, cfg.init_std, rng);
}

ImageTensor Decoder::operator()(const EmbeddingTensor& emb, const ImageTensor& lowlevel) const {
  require_image(emb, cfg_.embedding_channels, "decode embedding");
  require_image(lowlevel, cfg_.base_channels, "decode lowlevel");
  const int div = cfg_.spatial_divisor();
  if (lowlevel.dim(0) != emb.dim(0) || lowlevel.dim(2) != emb.dim(2) * div ||
      lowlevel.dim(3) != emb.dim(3) * div) {
    throw InvalidInput("decode: lowlevel " + to_string(lowlevel.shape()) + " does not match embedding " +
                       to_string(emb.shape()));
  }
  const double slope = cfg_.negative_slope;
  const double eps = cfg_.norm_eps;
  Tensor h = emb;
  for (int r = 0; r < cfg_.num_res_blocks; ++r) {
    Tensor t = ops::leaky_relu(maybe_norm(res_[2 * r](h), cfg_.decoder_norm, eps), slope);
    t = maybe_norm(res_[2 * r + 1](t), cfg_.decoder_norm, eps);
    h = ops::add(h, t);
  }
  for (const auto& up : up_) {
    Tensor skip = ops::resize_bilinear(lowlevel, h.dim(2), h.dim(3));
    h = up(ops::concat_channels(h, skip));
    h = ops::leaky_relu(maybe_norm(h, cfg_.decoder_norm, eps), slope);
  }
  return ops::tanh(out_(h));
}

ParameterList Decoder::parameters(const std::string& prefix) const {
  ParameterList out;
  for (std::size_t r = 0; r < res_.size(); ++r) {
    res_[r].collect(prefix + "res" + std::to_string(r / 2) + "." + std::to_string(r % 2), out);
  }
  for (std::size_t k = 0; k < up_.size(); ++k) up_[k].collect(prefix + "up" + std::to_string(k), out);
  out_.collect(prefix + "out", out);
  return out;
}

Discriminator::Discriminator(const NetworkConfig& cfg, int in_channels, std::mt19937_64& rng)
    : cfg_(cfg) {
  cfg.validate();
  const int ndf = cfg.disc_base_channels;
  int prev = in_channels;
  int width = ndf;
  for (int i = 0; i < cfg.disc_layers; ++i) {
    width = ndf * std::min(1 << i, 8);
    layers_.emplace_back(prev, width, 4, 2, 1, cfg.init_std, rng);
    prev = width;
  }
  width = ndf * std::min(1 << cfg.disc_layers, 8);
  layers_.emplace_back(prev, width, 4, 1, 1, cfg.init_std, rng);
  layers_.emplace_back(width, 1, 4, 1, 1, cfg.init_std, rng);
}

Tensor Discriminator::operator()(const ImageTensor& image) const {
  if (image.rank() != 4) throw InvalidInput("discriminate: expected NCHW image");
  Tensor h = image;
  const std::size_t last = layers_.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    h = layers_[i](h);
    if (i > 0) h = maybe_norm(h, NormKind::kInstance, cfg_.norm_eps);
    h = ops::leaky_relu(h, kDiscriminatorSlope);
  }
  return layers_[last](h);
}

ParameterList Discriminator::parameters(const std::string& prefix) const {
  ParameterList out;
  for (std::size_t i = 0; i < layers_.size(); ++i) layers_[i].collect(prefix + "conv" + std::to_string(i), out);
  return out;
}

TranslationNetworks::TranslationNetworks(const NetworkConfig& cfg, std::mt19937_64& rng)
    : config(cfg),
      encoder_a(cfg, cfg.channels_a(), rng),
      encoder_b(cfg, cfg.channels_b(), rng),
      decoder_a(cfg, cfg.channels_a(), rng),
      decoder_b(cfg, cfg.channels_b(), rng),
      discriminator_a(cfg, cfg.channels_a(), rng),
      discriminator_b(cfg, cfg.channels_b(), rng) {}

ParameterList TranslationNetworks::generator_parameters() const {
  ParameterList out;
  for (auto&& part : {encoder_a.parameters("encoder_a/"), encoder_b.parameters("encoder_b/"),
                      decoder_a.parameters("decoder_a/"), decoder_b.parameters("decoder_b/")}) {
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

ParameterList TranslationNetworks::discriminator_parameters() const {
  ParameterList out = discriminator_a.parameters("discriminator_a/");
  auto b = discriminator_b.parameters("discriminator_b/");
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

Domain other(Domain d) { return d == Domain::kA ? Domain::kB : Domain::kA; }
char domain_letter(Domain d) { return d == Domain::kA ? 'A' : 'B'; }

TranslationState make_translation_state(const NetworkConfig& cfg, std::uint64_t seed, AdamOptions adam) {
  TranslationState s;
  s.rng.seed(seed);
  s.nets = TranslationNetworks(cfg, s.rng);
  s.global_stats_a = ChannelStats::zeros(cfg.embedding_channels);
  s.global_stats_b = ChannelStats::zeros(cfg.embedding_channels);
  s.generator_optimizer = Adam(s.nets.generator_parameters(), adam);
  s.discriminator_optimizer = Adam(s.nets.discriminator_parameters(), adam);
  return s;
}

Encoded encode(const Encoder& encoder, const ImageTensor& image) { return encoder(image); }

ImageTensor decode(const Decoder& decoder, const EmbeddingTensor& emb, const ImageTensor& lowlevel) {
  return decoder(emb, lowlevel);
}

Tensor discriminate(const Discriminator& disc, const ImageTensor& image) { return disc(image); }

ImageTensor translate(const ImageTensor& content_image, const Encoder& src_encoder,
                      const Decoder& tgt_decoder, const ChannelStats& style, double eps) {
  const Encoded enc = src_encoder(content_image);
  return tgt_decoder(adain(enc.embedding, style, eps), enc.lowlevel);
}

}  // namespace semi2i
