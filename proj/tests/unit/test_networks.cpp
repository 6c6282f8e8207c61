#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "semi2i/errors.hpp"
#include "semi2i/networks.hpp"
#include "semi2i/ops.hpp"
#include "support/test_support.hpp"

using namespace semi2i;
using semi2i::testing::check_gradient;
using semi2i::testing::random_tensor;

namespace {

NetworkConfig toy_config() {
  NetworkConfig c;
  c.base_channels = 4;
  c.embedding_channels = 8;
  c.num_res_blocks = 1;
  c.disc_base_channels = 4;
  c.disc_layers = 1;
  return c;
}

std::size_t conv_params(std::size_t cin, std::size_t cout, std::size_t k) { return cout * cin * k * k + cout; }

// Independent count of the layer stack described in the README.
std::size_t expected_generator_params(const NetworkConfig& c, int channels) {
  std::size_t enc = conv_params(channels, c.base_channels, 7);
  std::vector<std::size_t> widths;
  for (int k = 0; k <= c.num_downsamples; ++k)
    widths.push_back(k == c.num_downsamples ? c.embedding_channels : c.base_channels << k);
  for (int k = 0; k < c.num_downsamples; ++k) enc += conv_params(widths[k], widths[k + 1], 3);
  const std::size_t res = 2 * c.num_res_blocks * conv_params(c.embedding_channels, c.embedding_channels, 3);
  enc += res;
  std::size_t dec = res;
  for (int k = c.num_downsamples; k >= 1; --k) dec += conv_params(widths[k] + c.base_channels, widths[k - 1], 3);
  dec += conv_params(c.base_channels, channels, 7);
  return enc + dec;
}

std::size_t expected_disc_params(const NetworkConfig& c, int channels) {
  std::size_t total = 0, prev = channels, width = 0;
  for (int i = 0; i <= c.disc_layers; ++i) {
    width = c.disc_base_channels * std::min(1 << i, 8);
    total += conv_params(prev, width, 4);
    prev = width;
  }
  return total + conv_params(prev, 1, 4);
}

}  // namespace

TEST(Networks, DefaultShapesAt256) {
  NetworkConfig cfg;
  std::mt19937_64 rng(1);
  const Encoder enc(cfg, 3, rng);
  const Decoder dec(cfg, 3, rng);
  const Tensor x = random_tensor({1, 3, 256, 256}, rng);
  const Encoded e = encode(enc, x);
  EXPECT_EQ(e.embedding.shape(), (Shape{1, 256, 64, 64}));
  EXPECT_EQ(e.lowlevel.shape(), (Shape{1, 64, 256, 256}));
  const Tensor y = decode(dec, e.embedding, e.lowlevel);
  EXPECT_EQ(y.shape(), (Shape{1, 3, 256, 256}));
  for (double v : y.values()) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Networks, DiscriminatorMapIs30x30At256) {
  NetworkConfig cfg;
  cfg.disc_base_channels = 8;  // width does not affect the map size
  std::mt19937_64 rng(2);
  const Discriminator d(cfg, 3, rng);
  const Tensor s = discriminate(d, random_tensor({1, 3, 256, 256}, rng));
  EXPECT_EQ(s.shape(), (Shape{1, 1, 30, 30}));
}

TEST(Networks, ParameterCountsFollowConfig) {
  for (int downs : {1, 2, 3}) {
    NetworkConfig cfg = toy_config();
    cfg.num_downsamples = downs;
    cfg.num_res_blocks = downs - 1;
    cfg.disc_layers = downs;
    std::mt19937_64 rng(3);
    const TranslationNetworks nets(cfg, rng);
    EXPECT_EQ(parameter_count(nets.generator_parameters()), 2 * expected_generator_params(cfg, 3));
    EXPECT_EQ(parameter_count(nets.discriminator_parameters()), 2 * expected_disc_params(cfg, 3));
  }
  // The default configuration, pinned.
  std::mt19937_64 rng(4);
  const TranslationNetworks def(NetworkConfig{}, rng);
  EXPECT_EQ(parameter_count(def.generator_parameters()), 2 * expected_generator_params(NetworkConfig{}, 3));
}

TEST(Networks, FourDisjointGeneratorSetsAndTwoDiscriminators) {
  std::mt19937_64 rng(5);
  const TranslationNetworks nets(toy_config(), rng);
  std::set<const void*> gen, disc;
  std::set<std::string> prefixes;
  for (const auto& p : nets.generator_parameters()) {
    gen.insert(p.tensor.node());
    prefixes.insert(p.name.substr(0, p.name.find('/')));
  }
  for (const auto& p : nets.discriminator_parameters()) {
    disc.insert(p.tensor.node());
    EXPECT_EQ(gen.count(p.tensor.node()), 0u);
  }
  EXPECT_EQ(prefixes, (std::set<std::string>{"encoder_a", "encoder_b", "decoder_a", "decoder_b"}));
  EXPECT_EQ(gen.size(), nets.generator_parameters().size());
}

TEST(Networks, DeterministicForward) {
  std::mt19937_64 rng(6);
  const TranslationNetworks nets(toy_config(), rng);
  const Tensor x = random_tensor({1, 3, 16, 16}, rng);
  const Encoded a = encode(nets.encoder_a, x);
  const Encoded b = encode(nets.encoder_a, x.clone());
  EXPECT_TRUE(std::equal(a.embedding.values().begin(), a.embedding.values().end(), b.embedding.values().begin()));
  EXPECT_TRUE(std::equal(a.lowlevel.values().begin(), a.lowlevel.values().end(), b.lowlevel.values().begin()));
  const Tensor da = decode(nets.decoder_b, a.embedding, a.lowlevel);
  const Tensor db = decode(nets.decoder_b, b.embedding, b.lowlevel);
  EXPECT_TRUE(std::equal(da.values().begin(), da.values().end(), db.values().begin()));
  const Tensor sa = discriminate(nets.discriminator_a, x);
  const Tensor sb = discriminate(nets.discriminator_a, x);
  EXPECT_TRUE(std::equal(sa.values().begin(), sa.values().end(), sb.values().begin()));
}

TEST(Networks, SameSeedSameWeights) {
  std::mt19937_64 r1(7), r2(7);
  const TranslationNetworks a(toy_config(), r1), b(toy_config(), r2);
  const auto pa = a.generator_parameters(), pb = b.generator_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ASSERT_EQ(pa[i].name, pb[i].name);
    EXPECT_TRUE(std::equal(pa[i].tensor.values().begin(), pa[i].tensor.values().end(),
                           pb[i].tensor.values().begin()));
  }
}

TEST(Networks, EmbeddingKeepsStyleStatistics) {
  std::mt19937_64 rng(8);
  const TranslationNetworks nets(toy_config(), rng);
  for (int trial = 0; trial < 5; ++trial) {
    const Encoded e = encode(nets.encoder_a, random_tensor({1, 3, 16, 16}, rng));
    for (double v : e.embedding.values()) ASSERT_TRUE(std::isfinite(v));
    for (double s : instance_stats(e.embedding).sigma) EXPECT_GT(s, 0.0);
  }
}

TEST(Networks, ShapeRoundTripAndRangeOnRandomSizes) {
  std::mt19937_64 rng(9);
  const TranslationNetworks nets(toy_config(), rng);
  for (auto [h, w] : {std::pair{8, 8}, std::pair{12, 20}, std::pair{24, 4}}) {
    const Tensor x = random_tensor({2, 3, h, w}, rng, -3.0, 3.0);
    const Encoded e = encode(nets.encoder_b, x);
    const Tensor y = decode(nets.decoder_a, e.embedding, e.lowlevel);
    EXPECT_EQ(y.shape(), x.shape());
    for (double v : y.values()) EXPECT_LE(std::abs(v), 1.0);
  }
}

TEST(Networks, InvalidInputs) {
  std::mt19937_64 rng(10);
  const TranslationNetworks nets(toy_config(), rng);
  EXPECT_THROW(encode(nets.encoder_a, Tensor({1, 3, 10, 16})), InvalidInput);
  EXPECT_THROW(encode(nets.encoder_a, Tensor({1, 1, 16, 16})), InvalidInput);
  const Encoded e = encode(nets.encoder_a, Tensor({1, 3, 16, 16}, 0.1));
  EXPECT_THROW(decode(nets.decoder_a, e.embedding, Tensor({1, 4, 8, 8})), InvalidInput);
  NetworkConfig bad = toy_config();
  bad.num_downsamples = 0;
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

TEST(Networks, TranslateWithOwnStatsIsTheSelfPath) {
  std::mt19937_64 rng(11);
  const TranslationNetworks nets(toy_config(), rng);
  const Tensor x = random_tensor({1, 3, 16, 16}, rng);
  const Encoded e = encode(nets.encoder_a, x);
  const Tensor self = decode(nets.decoder_a, e.embedding, e.lowlevel);
  const Tensor via = translate(x, nets.encoder_a, nets.decoder_a, instance_stats(e.embedding), 1e-5);
  for (std::size_t i = 0; i < self.numel(); ++i) EXPECT_NEAR(via.values()[i], self.values()[i], 1e-4);
}

TEST(Networks, DecoderGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const NetworkConfig cfg = toy_config();
  const Encoder enc(cfg, 3, rng);
  const Decoder dec(cfg, 3, rng);
  const Encoded e = encode(enc, random_tensor({1, 3, 16, 16}, rng));
  const Tensor emb = e.embedding.detach(), low = e.lowlevel.detach();
  const Tensor target = random_tensor({1, 3, 16, 16}, rng, -0.5, 0.5);
  auto loss = [&] { return ops::mse_to_constant(ops::sub(decode(dec, emb, low), target), 0.0); };
  std::size_t checked = 0, passed = 0;
  for (const auto& p : dec.parameters("")) {
    zero_grad(dec.parameters(""));
    backward(loss());
    const auto r = check_gradient(p.tensor, [&] {
      NoGradGuard g;
      return loss().item();
    }, 1e-3, 5);
    checked += r.checked;
    passed += r.passed;
  }
  ASSERT_GT(checked, 100u);
  EXPECT_GE(static_cast<double>(passed) / checked, 0.95) << passed << " of " << checked;
}

TEST(Networks, DiscriminatorInputGradientIsFinite) {
  std::mt19937_64 rng(13);
  const TranslationNetworks nets(toy_config(), rng);
  Tensor x = random_tensor({1, 3, 16, 16}, rng, -1.0, 1.0, true);
  backward(ops::mean(discriminate(nets.discriminator_b, x)));
  ASSERT_EQ(x.grad().size(), x.numel());
  bool nonzero = false;
  for (double g : x.grad()) {
    EXPECT_TRUE(std::isfinite(g));
    nonzero = nonzero || g != 0.0;
  }
  EXPECT_TRUE(nonzero);
}
