#pragma once

// Encoder / decoder / patch-discriminator definitions and the compositions
// that form the six generator paths:
//
//   fake A  = dec_B(adain(enc_A(A), style B))     fake B  = dec_A(adain(enc_B(B), style A))
//   A'      = dec_A(enc_A(A))                      B'      = dec_B(enc_B(B))
//   A''     = dec_A(adain(enc_B(fake A), style A)) B''     = dec_B(adain(enc_A(fake B), style B))
//
// Four generator parameter sets (two encoders, two decoders) serve all six.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "semi2i/core_math.hpp"
#include "semi2i/nn.hpp"
#include "semi2i/optim.hpp"

namespace semi2i {

enum class NormKind { kNone, kInstance };

struct NetworkConfig {
  int in_channels = 3;
  /// Channel count of domain B images; 0 means "same as in_channels".
  int in_channels_b = 0;
  int base_channels = 64;
  int num_downsamples = 2;
  int embedding_channels = 256;
  int num_res_blocks = 2;
  double negative_slope = 0.2;
  /// Applied to interior encoder stages. The stem (skip source) and the
  /// final embedding stage are never normalized.
  NormKind encoder_norm = NormKind::kInstance;
  NormKind decoder_norm = NormKind::kInstance;
  int disc_base_channels = 64;
  /// Number of stride-2 convolutions in the patch discriminator.
  int disc_layers = 3;
  double init_std = 0.02;
  double norm_eps = 1e-5;

  int channels_a() const { return in_channels; }
  int channels_b() const { return in_channels_b > 0 ? in_channels_b : in_channels; }
  /// Spatial divisor every input side must be a multiple of.
  int spatial_divisor() const { return 1 << num_downsamples; }
  void validate() const;
};

struct Encoded {
  EmbeddingTensor embedding;
  /// Activation of the first convolution (full input resolution).
  ImageTensor lowlevel;
};

class Encoder {
 public:
  Encoder() = default;
  Encoder(const NetworkConfig& cfg, int in_channels, std::mt19937_64& rng);

  Encoded operator()(const ImageTensor& image) const;
  ParameterList parameters(const std::string& prefix) const;

 private:
  NetworkConfig cfg_;
  int in_channels_ = 0;
  Conv2d stem_;
  std::vector<Conv2d> down_;
  std::vector<Conv2d> res_;  // two convolutions per residual block
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const NetworkConfig& cfg, int out_channels, std::mt19937_64& rng);

  /// `lowlevel` is resized bilinearly and concatenated before every
  /// transposed convolution. Output is tanh-bounded to [-1, 1].
  ImageTensor operator()(const EmbeddingTensor& emb, const ImageTensor& lowlevel) const;
  ParameterList parameters(const std::string& prefix) const;

 private:
  NetworkConfig cfg_;
  int out_channels_ = 0;
  std::vector<Conv2d> res_;
  std::vector<ConvTranspose2d> up_;
  Conv2d out_;
};

/// 70x70-receptive-field patch discriminator; raw (unbounded) scores.
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(const NetworkConfig& cfg, int in_channels, std::mt19937_64& rng);

  Tensor operator()(const ImageTensor& image) const;
  ParameterList parameters(const std::string& prefix) const;

 private:
  NetworkConfig cfg_;
  std::vector<Conv2d> layers_;
};

struct TranslationNetworks {
  NetworkConfig config;
  Encoder encoder_a, encoder_b;
  Decoder decoder_a, decoder_b;
  Discriminator discriminator_a, discriminator_b;

  TranslationNetworks() = default;
  TranslationNetworks(const NetworkConfig& cfg, std::mt19937_64& rng);

  ParameterList generator_parameters() const;
  ParameterList discriminator_parameters() const;
};

enum class Domain { kA, kB };
Domain other(Domain d);
char domain_letter(Domain d);

/// Everything needed to continue training or to generate fakes.
struct TranslationState {
  TranslationNetworks nets;
  ChannelStats global_stats_a;
  ChannelStats global_stats_b;
  /// Number of moving-average updates folded into each global stat.
  std::int64_t stats_updates_a = 0;
  std::int64_t stats_updates_b = 0;
  Adam generator_optimizer;
  Adam discriminator_optimizer;
  int epoch = 0;
  std::int64_t iteration = 0;
  std::mt19937_64 rng;

  const Encoder& encoder(Domain d) const { return d == Domain::kA ? nets.encoder_a : nets.encoder_b; }
  const Decoder& decoder(Domain d) const { return d == Domain::kA ? nets.decoder_a : nets.decoder_b; }
  const ChannelStats& global_stats(Domain d) const {
    return d == Domain::kA ? global_stats_a : global_stats_b;
  }
};

/// Fresh networks (seeded init), zero global stats, fresh optimizers.
TranslationState make_translation_state(const NetworkConfig& cfg, std::uint64_t seed,
                                        AdamOptions adam = {});

Encoded encode(const Encoder& encoder, const ImageTensor& image);
ImageTensor decode(const Decoder& decoder, const EmbeddingTensor& emb, const ImageTensor& lowlevel);
Tensor discriminate(const Discriminator& disc, const ImageTensor& image);

/// tgt_decoder(adain(emb, style), lowlevel) with (emb, lowlevel) from the
/// content encoder.
ImageTensor translate(const ImageTensor& content_image, const Encoder& src_encoder,
                      const Decoder& tgt_decoder, const ChannelStats& style, double eps = 1e-5);

}  // namespace semi2i
