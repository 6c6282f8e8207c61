#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <fstream>

#include "semi2i/dataset.hpp"
#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"
#include "semi2i/synthetic.hpp"
#include "semi2i/tiling.hpp"
#include "semi2i/translation.hpp"
#include "support/test_support.hpp"

using namespace semi2i;
using semi2i::testing::random_tensor;
using semi2i::testing::read_bytes;
using semi2i::testing::TempDir;

namespace {

TrainingConfig toy_config(int epochs = 2) {
  TrainingConfig c;
  c.num_epochs = epochs;
  c.decay_epoch = 1;
  c.patch_size = 8;
  c.overlap = 4;
  c.network.base_channels = 4;
  c.network.embedding_channels = 8;
  c.network.num_res_blocks = 1;
  c.network.disc_base_channels = 4;
  c.network.disc_layers = 1;
  c.rng_seed = 17;
  return c;
}

std::vector<Tensor> random_patches(int count, int size, std::mt19937_64& rng) {
  std::vector<Tensor> out;
  for (int i = 0; i < count; ++i) out.push_back(random_tensor({1, 3, size, size}, rng, -0.9, 0.9));
  return out;
}

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

// Patches of the synthetic benchmark, normalized to [-1, 1].
std::vector<Tensor> synthetic_patches(const std::vector<SyntheticScene>& scenes, int size) {
  std::vector<Tensor> out;
  for (const auto& s : scenes) {
    for (const auto& p : extract_patches(normalize(s.image), size, size / 2).patches) out.push_back(to_tensor(p));
  }
  return out;
}

}  // namespace

TEST(LrSchedule, DefaultSpotValues) {
  const TrainingConfig cfg;
  EXPECT_EQ(cfg.num_epochs, 25);
  EXPECT_EQ(cfg.decay_epoch, 15);
  EXPECT_DOUBLE_EQ(lr_schedule(0, cfg), 0.001);
  EXPECT_DOUBLE_EQ(lr_schedule(10, cfg), 0.001);
  EXPECT_DOUBLE_EQ(lr_schedule(15, cfg), 0.001);
  EXPECT_NEAR(lr_schedule(20, cfg), 0.0005, 1e-15);
  EXPECT_NEAR(lr_schedule(24, cfg), 0.0001, 1e-15);
}

TEST(LrSchedule, NonIncreasingAndRangeChecked) {
  const TrainingConfig cfg;
  for (int e = 1; e < cfg.num_epochs; ++e) EXPECT_LE(lr_schedule(e, cfg), lr_schedule(e - 1, cfg));
  EXPECT_THROW(lr_schedule(-1, cfg), InvalidInput);
  EXPECT_THROW(lr_schedule(25, cfg), InvalidInput);
}

TEST(TrainingConfig, ValidationAndDefaults) {
  TrainingConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.d_rate, 0.95);
  EXPECT_EQ(c.patches_per_iteration, 1);
  EXPECT_EQ(c.patch_size, 256);
  EXPECT_EQ(c.overlap, 32);
  EXPECT_EQ(c.adam_beta1, 0.5);
  c.decay_epoch = 25;
  EXPECT_NO_THROW(c.validate());
  c.decay_epoch = 26;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c.decay_epoch = -1;
  EXPECT_THROW(c.validate(), InvalidConfig);
  c = TrainingConfig{};
  c.d_rate = 1.0;
  EXPECT_THROW(c.validate(), InvalidConfig);
}

TEST(TrainingConfig, JsonRoundTripAndUnknownKeys) {
  TrainingConfig c = toy_config();
  c.weights.lambda3 = 2.5;
  c.network.decoder_norm = NormKind::kNone;
  const TrainingConfig back = training_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.weights.lambda3, 2.5);
  EXPECT_EQ(back.network.decoder_norm, NormKind::kNone);
  const TrainingConfig partial = training_config_from_json(R"({"num_epochs": 30})");
  EXPECT_EQ(partial.num_epochs, 30);
  EXPECT_EQ(partial.decay_epoch, 15);
  EXPECT_THROW(training_config_from_json(R"({"num_epoch": 30})"), InvalidConfig);
  EXPECT_THROW(training_config_from_json("{not json"), InvalidConfig);
}

TEST(StepGraph, SixPathsOverFourGeneratorSets) {
  const TrainingConfig cfg = toy_config();
  TranslationState s = make_translation_state(cfg.network, 3);
  std::mt19937_64 rng(4);
  const Tensor a = random_tensor({1, 3, 8, 8}, rng), b = random_tensor({1, 3, 8, 8}, rng);
  const StepGraph g = build_step_graph(a, b, s.nets, cfg);
  for (const Tensor* t : {&g.fake_a, &g.fake_b, &g.self_a, &g.self_b, &g.cross_a, &g.cross_b})
    EXPECT_EQ(t->shape(), a.shape());
  // fake A is A's content decoded by decoder B with B's patch statistics.
  const Tensor want = translate(a, s.nets.encoder_a, s.nets.decoder_b, instance_stats(encode(s.nets.encoder_b, b).embedding),
                                cfg.eps);
  for (std::size_t i = 0; i < want.numel(); ++i) EXPECT_NEAR(g.fake_a.values()[i], want.values()[i], 1e-12);
}

TEST(StepGraph, DiscriminatorLossLeavesGeneratorUntouched) {
  const TrainingConfig cfg = toy_config();
  TranslationState s = make_translation_state(cfg.network, 5);
  std::mt19937_64 rng(6);
  const Tensor a = random_tensor({1, 3, 8, 8}, rng), b = random_tensor({1, 3, 8, 8}, rng);
  const StepGraph g = build_step_graph(a, b, s.nets, cfg);
  backward(g.total_d);
  for (const auto& p : s.nets.generator_parameters())
    for (double v : p.tensor.grad()) ASSERT_EQ(v, 0.0) << p.name;
  bool touched = false;
  for (const auto& p : s.nets.discriminator_parameters())
    for (double v : p.tensor.grad()) touched = touched || v != 0.0;
  EXPECT_TRUE(touched);
}

TEST(StepGraph, GeneratorGradientMatchesFiniteDifferences) {
  TrainingConfig cfg = toy_config();
  TranslationState s = make_translation_state(cfg.network, 7);
  std::mt19937_64 rng(8);
  const Tensor a = random_tensor({1, 3, 8, 8}, rng), b = random_tensor({1, 3, 8, 8}, rng);
  const ParameterList gen = s.nets.generator_parameters();
  zero_grad(gen);
  backward(build_step_graph(a, b, s.nets, cfg).total_g);
  std::size_t checked = 0, passed = 0;
  for (const auto& p : gen) {
    const auto r = semi2i::testing::check_gradient(p.tensor, [&] {
      NoGradGuard ng;
      return build_step_graph(a, b, s.nets, cfg).total_g.item();
    }, 1e-3, 23);
    checked += r.checked;
    passed += r.passed;
  }
  ASSERT_GT(checked, 50u);
  EXPECT_GE(static_cast<double>(passed) / checked, 0.95) << passed << " / " << checked;
}

TEST(TrainStep, ZeroWeightsAndZeroRateLeaveParametersBitIdentical) {
  TrainingConfig cfg = toy_config();
  cfg.base_lr = 0.0;
  cfg.weights = {0.0, 0.0, 0.0, 0.0};
  TranslationState s = make_translation_state(cfg.network, 9);
  const auto before_g = snapshot(s.nets.generator_parameters());
  const auto before_d = snapshot(s.nets.discriminator_parameters());
  std::mt19937_64 rng(10);
  train_step(random_tensor({1, 3, 8, 8}, rng), random_tensor({1, 3, 8, 8}, rng), s, cfg);
  EXPECT_EQ(snapshot(s.nets.generator_parameters()), before_g);
  EXPECT_EQ(snapshot(s.nets.discriminator_parameters()), before_d);
}

TEST(TrainStep, ReproducibleUnderFixedSeed) {
  const TrainingConfig cfg = toy_config();
  auto run = [&] {
    TranslationState s = make_translation_state(cfg.network, 11);
    std::mt19937_64 rng(12);
    const LossReport r = train_step(random_tensor({1, 3, 8, 8}, rng), random_tensor({1, 3, 8, 8}, rng), s, cfg);
    return std::pair{r.total_g, snapshot(s.nets.generator_parameters())};
  };
  const auto x = run(), y = run();
  EXPECT_EQ(x.first, y.first);
  EXPECT_EQ(x.second, y.second);
}

TEST(TrainStep, OneMovingAverageUpdatePerDomain) {
  const TrainingConfig cfg = toy_config();
  TranslationState s = make_translation_state(cfg.network, 13);
  std::mt19937_64 rng(14);
  const Tensor a = random_tensor({1, 3, 8, 8}, rng), b = random_tensor({1, 3, 8, 8}, rng);
  ChannelStats sa, sb;
  {
    NoGradGuard ng;
    sa = instance_stats(encode(s.nets.encoder_a, a).embedding);
    sb = instance_stats(encode(s.nets.encoder_b, b).embedding);
  }
  train_step(a, b, s, cfg);
  EXPECT_EQ(s.stats_updates_a, 1);
  EXPECT_EQ(s.stats_updates_b, 1);
  const ChannelStats wa = ema_update(ChannelStats::zeros(8), sa, cfg.d_rate);
  const ChannelStats wb = ema_update(ChannelStats::zeros(8), sb, cfg.d_rate);
  for (int c = 0; c < 8; ++c) {
    EXPECT_NEAR(s.global_stats_a.mu[c], wa.mu[c], 1e-12);
    EXPECT_NEAR(s.global_stats_a.sigma[c], wa.sigma[c], 1e-12);
    EXPECT_NEAR(s.global_stats_b.mu[c], wb.mu[c], 1e-12);
  }
  EXPECT_EQ(s.generator_optimizer.steps(), 1);
  EXPECT_EQ(s.discriminator_optimizer.steps(), 1);
}

TEST(TrainStep, NonFiniteInputIsReported) {
  const TrainingConfig cfg = toy_config();
  TranslationState s = make_translation_state(cfg.network, 15);
  Tensor a({1, 3, 8, 8}, 0.1);
  a.mutable_values()[5] = std::nan("");
  EXPECT_THROW(train_step(a, Tensor({1, 3, 8, 8}, 0.2), s, cfg), NumericalFailure);
}

TEST(Train, StepCountIsEpochsTimesSmallerDomain) {
  TrainingConfig cfg = toy_config(25);
  cfg.decay_epoch = 15;
  std::mt19937_64 rng(16);
  const auto a = random_patches(10, 8, rng), b = random_patches(7, 8, rng);
  int steps = 0, epochs = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const TranslationState&, const LossReport&) { ++steps; };
  hooks.on_epoch_end = [&](const TranslationState&) { ++epochs; };
  const TranslationState s = train(a, b, cfg, hooks);
  EXPECT_EQ(steps, 175);
  EXPECT_EQ(epochs, 25);
  EXPECT_EQ(s.iteration, 175);
  EXPECT_EQ(s.stats_updates_a, 175);
  EXPECT_NE(s.global_stats_a, ChannelStats::zeros(8));
  for (double v : s.global_stats_b.sigma) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
  EXPECT_THROW(train(std::span<const Tensor>{}, b, cfg), InvalidInput);
}

TEST(Train, SameSeedGivesByteIdenticalCheckpoints) {
  const TrainingConfig cfg = toy_config();
  std::mt19937_64 rng(18);
  const auto a = random_patches(3, 8, rng), b = random_patches(3, 8, rng);
  TempDir dir("ckpt_same");
  save_checkpoint(dir / "one.ckpt", train(a, b, cfg), cfg);
  save_checkpoint(dir / "two.ckpt", train(a, b, cfg), cfg);
  EXPECT_EQ(read_bytes(dir / "one.ckpt"), read_bytes(dir / "two.ckpt"));
}

TEST(Train, ResumeFromCheckpointMatchesUninterruptedRun) {
  const TrainingConfig cfg = toy_config(3);
  std::mt19937_64 rng(19);
  const auto a = random_patches(3, 8, rng), b = random_patches(4, 8, rng);
  TempDir dir("ckpt_resume");
  save_checkpoint(dir / "full.ckpt", train(a, b, cfg), cfg);

  TranslationState s = make_translation_state(cfg.network, cfg.rng_seed, {cfg.adam_beta1, cfg.adam_beta2});
  TrainingConfig first = cfg;
  first.num_epochs = 2;
  train(a, b, s, first);
  save_checkpoint(dir / "half.ckpt", s, cfg);
  TranslationCheckpoint ck = load_checkpoint(dir / "half.ckpt");
  EXPECT_EQ(ck.state.epoch, 2);
  train(a, b, ck.state, ck.config);
  save_checkpoint(dir / "resumed.ckpt", ck.state, ck.config);
  EXPECT_EQ(read_bytes(dir / "full.ckpt"), read_bytes(dir / "resumed.ckpt"));
}

TEST(Checkpoint, RoundTripPreservesEverything) {
  const TrainingConfig cfg = toy_config();
  std::mt19937_64 rng(20);
  const auto a = random_patches(2, 8, rng), b = random_patches(2, 8, rng);
  const TranslationState s = train(a, b, cfg);
  TempDir dir("ckpt_rt");
  save_checkpoint(dir / "x.ckpt", s, cfg);
  const TranslationCheckpoint ck = load_checkpoint(dir / "x.ckpt");
  EXPECT_EQ(to_json(ck.config), to_json(cfg));
  EXPECT_EQ(ck.state.global_stats_a, s.global_stats_a);
  EXPECT_EQ(ck.state.global_stats_b, s.global_stats_b);
  EXPECT_EQ(ck.state.iteration, s.iteration);
  EXPECT_EQ(ck.state.epoch, s.epoch);
  EXPECT_EQ(snapshot(ck.state.nets.generator_parameters()), snapshot(s.nets.generator_parameters()));
  EXPECT_EQ(snapshot(ck.state.nets.discriminator_parameters()), snapshot(s.nets.discriminator_parameters()));
  EXPECT_EQ(ck.state.rng, s.rng);
}

TEST(Checkpoint, CorruptOrMissingFilesAreRejected) {
  TempDir dir("ckpt_bad");
  EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), Error);
  {
    std::ofstream f(dir / "junk.ckpt", std::ios::binary);
    f << "not an archive";
  }
  EXPECT_THROW(load_checkpoint(dir / "junk.ckpt"), InvalidCheckpoint);
}

TEST(GenerateFake, DeterministicAndShapePreserving) {
  const TrainingConfig cfg = toy_config();
  std::mt19937_64 rng(21);
  const auto a = random_patches(2, 8, rng), b = random_patches(2, 8, rng);
  const TranslationState s = train(a, b, cfg);
  const Tensor x = random_tensor({1, 3, 16, 16}, rng);
  const Tensor f1 = generate_fake(s, x, Domain::kB, cfg.eps);
  const Tensor f2 = generate_fake(s, x, Domain::kB, cfg.eps);
  EXPECT_EQ(f1.shape(), x.shape());
  EXPECT_TRUE(std::equal(f1.values().begin(), f1.values().end(), f2.values().begin()));

  // A raster larger than a patch goes through tiling and stitching.
  RasterImage img = semi2i::testing::random_raster(20, 13, 3, ValueRange::kByte, rng);
  const TranslationCheckpoint ck{cfg, s};
  const std::vector<RasterImage> imgs{img};
  const auto out1 = generate_fake_dataset(ck, imgs, Domain::kB);
  const auto out2 = generate_fake_dataset(ck, imgs, Domain::kB);
  ASSERT_EQ(out1.size(), 1u);
  EXPECT_EQ(out1[0].height, 20);
  EXPECT_EQ(out1[0].width, 13);
  EXPECT_EQ(out1[0], out2[0]);
}

TEST(GenerateFake, MissingStatisticsIsInvalidCheckpoint) {
  const TrainingConfig cfg = toy_config();
  const TranslationState s = make_translation_state(cfg.network, 22);
  EXPECT_THROW(generate_fake(s, Tensor({1, 3, 8, 8}, 0.0), Domain::kB, cfg.eps), InvalidCheckpoint);
}

TEST(GenerateFake, UsesGlobalStatisticsOfTarget) {
  const TrainingConfig cfg = toy_config();
  TranslationState s = make_translation_state(cfg.network, 23);
  std::mt19937_64 rng(24);
  const Tensor x = random_tensor({1, 3, 8, 8}, rng);
  s.stats_updates_b = 1;
  s.global_stats_b = {std::vector<double>(8, 0.3), std::vector<double>(8, 0.7)};
  const Tensor got = generate_fake(s, x, Domain::kB, cfg.eps);
  const Tensor want = translate(x, s.nets.encoder_a, s.nets.decoder_b, s.global_stats_b, cfg.eps);
  EXPECT_TRUE(std::equal(got.values().begin(), got.values().end(), want.values().begin()));
}

TEST(Train, GeneratorLossDropsOverTwoHundredIterations) {
  TrainingConfig cfg = toy_config();
  cfg.patch_size = 16;
  cfg.overlap = 8;
  SynthConfig sc;
  sc.n_images = 2;
  sc.height = 32;
  sc.width = 32;
  std::vector<double> deltas;
  for (std::uint64_t seed : {1, 2, 3}) {
    sc.seed = seed;
    const SyntheticDomains d = make_synthetic_domains(sc);
    const auto a = synthetic_patches(d.a, 16), b = synthetic_patches(d.b, 16);
    TranslationState s = make_translation_state(cfg.network, seed, {cfg.adam_beta1, cfg.adam_beta2});
    std::vector<double> totals;
    for (int it = 0; it < 200; ++it) {
      const auto [pa, pb] = sample_pair(std::span<const Tensor>(a), std::span<const Tensor>(b), s.rng);
      totals.push_back(train_step(pa, pb, s, cfg).total_g);
    }
    deltas.push_back(totals.back() - totals.front());
  }
  std::sort(deltas.begin(), deltas.end());
  EXPECT_LT(deltas[1], 0.0);
}
