#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "semi2i/errors.hpp"
#include "semi2i/segmentation.hpp"
#include "semi2i/tiling.hpp"
#include "support/test_support.hpp"

using namespace semi2i;
using semi2i::testing::random_raster;
using semi2i::testing::TempDir;

namespace {

SegConfig toy_config(int classes = 4) {
  SegConfig c;
  c.num_classes = classes;
  c.base_channels = 4;
  c.depth = 2;
  c.patch_size = 8;
  c.overlap = 0;
  c.batch_size = 4;
  c.lr = 1e-3;
  c.initial_iterations = 300;
  c.finetune_iterations = 50;
  return c;
}

LabelRaster random_labels(int h, int w, int classes, std::mt19937_64& rng) {
  LabelRaster l(h, w);
  std::uniform_int_distribution<int> u(0, classes - 1);
  for (auto& v : l.ids) v = static_cast<std::uint8_t>(u(rng));
  return l;
}

// Bright pixels are class 1, dark ones class 0, plus noise.
void two_class_toy(int count, std::mt19937_64& rng, std::vector<RasterImage>& imgs, std::vector<LabelRaster>& labels) {
  std::normal_distribution<double> noise(0.0, 0.15);
  for (int i = 0; i < count; ++i) {
    LabelRaster l = random_labels(8, 8, 2, rng);
    RasterImage img(8, 8, 3, ValueRange::kSigned);
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        for (int ch = 0; ch < 3; ++ch)
          img.at(r, c, ch) = std::clamp((l.at(r, c) ? 0.5 : -0.5) + noise(rng), -1.0, 1.0);
    imgs.push_back(img);
    labels.push_back(l);
  }
}

// IoU by literal set intersection / union of pixel indices.
std::optional<double> brute_iou(const LabelRaster& pred, const LabelRaster& gt, int c) {
  std::set<std::size_t> p, g;
  for (std::size_t i = 0; i < pred.ids.size(); ++i) {
    if (pred.ids[i] == c) p.insert(i);
    if (gt.ids[i] == c) g.insert(i);
  }
  std::set<std::size_t> uni = p;
  uni.insert(g.begin(), g.end());
  if (uni.empty()) return std::nullopt;
  std::size_t inter = 0;
  for (auto i : p) inter += g.count(i);
  return static_cast<double>(inter) / uni.size();
}

std::vector<std::vector<double>> snapshot(const ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.emplace_back(p.tensor.values().begin(), p.tensor.values().end());
  return out;
}

}  // namespace

TEST(Iou, PerfectPredictionIsOne) {
  std::mt19937_64 rng(1);
  const LabelRaster gt = random_labels(9, 7, 4, rng);
  const IouReport r = evaluate_iou(gt, gt);
  for (const auto& v : r.per_class) {
    if (v) {
      EXPECT_EQ(*v, 1.0);
    }
  }
  EXPECT_EQ(r.overall, 1.0);
  EXPECT_EQ(r.pixels, 63);
}

TEST(Iou, HandCountedTwoByFourGrid) {
  LabelRaster gt(2, 4, kBuilding), pred(2, 4, kBuilding);
  for (int r = 0; r < 2; ++r)
    for (int c = 2; c < 4; ++c) gt.at(r, c) = kRoad;
  const IouReport rep = evaluate_iou(pred, gt);
  EXPECT_DOUBLE_EQ(*rep.per_class[kBuilding], 0.5);
  EXPECT_DOUBLE_EQ(*rep.per_class[kRoad], 0.0);
  EXPECT_FALSE(rep.per_class[kTree].has_value());
  EXPECT_FALSE(rep.per_class[kBackground].has_value());
  EXPECT_DOUBLE_EQ(*rep.overall, 0.25);
}

TEST(Iou, OverallIsThreeClassMean) {
  const std::vector<std::optional<double>> row{0.2361, 0.0091, 0.4053};
  EXPECT_NEAR(*overall_iou(row) * 100.0, 21.68, 0.005);
  const std::vector<std::optional<double>> none{std::nullopt, std::nullopt};
  EXPECT_FALSE(overall_iou(none).has_value());
}

TEST(Iou, BackgroundExcludedFromOverall) {
  LabelRaster gt(1, 4, kBackground), pred(1, 4, kBuilding);
  gt.at(0, 0) = kBuilding;
  const IouReport r = evaluate_iou(pred, gt);
  EXPECT_DOUBLE_EQ(*r.per_class[kBackground], 0.0);
  EXPECT_DOUBLE_EQ(*r.overall, 0.25);
}

TEST(Iou, MatchesSetOracleOnRandomRasters) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 50; ++t) {
    const LabelRaster gt = random_labels(6, 5, 4, rng), pred = random_labels(6, 5, 4, rng);
    ConfusionMatrix cm;
    cm.add(pred, gt);
    EXPECT_EQ(cm.total(), 30);
    for (int c = 0; c < 4; ++c) {
      const auto want = brute_iou(pred, gt, c), got = cm.iou(c);
      ASSERT_EQ(want.has_value(), got.has_value());
      if (want) {
        EXPECT_NEAR(*got, *want, 1e-15);
        EXPECT_GE(*got, 0.0);
        EXPECT_LE(*got, 1.0);
      }
    }
  }
}

TEST(Iou, ConsistentRelabelingPermutesScores) {
  std::mt19937_64 rng(3);
  const std::array<std::uint8_t, 4> perm{2, 0, 3, 1};
  for (int t = 0; t < 20; ++t) {
    LabelRaster gt = random_labels(5, 5, 4, rng), pred = random_labels(5, 5, 4, rng);
    const IouReport a = evaluate_iou(pred, gt);
    for (auto& v : gt.ids) v = perm[v];
    for (auto& v : pred.ids) v = perm[v];
    const IouReport b = evaluate_iou(pred, gt);
    for (int c = 0; c < 4; ++c) EXPECT_EQ(a.per_class[c], b.per_class[perm[c]]);
  }
}

TEST(Iou, PooledEvaluationUsesOneConfusionMatrix) {
  std::mt19937_64 rng(4);
  std::vector<LabelRaster> preds, gts;
  ConfusionMatrix cm;
  for (int i = 0; i < 3; ++i) {
    preds.push_back(random_labels(4, 4, 4, rng));
    gts.push_back(random_labels(4, 4, 4, rng));
    cm.add(preds.back(), gts.back());
  }
  const IouReport pooled = evaluate_iou(preds, gts);
  const IouReport want = iou_report(cm);
  EXPECT_EQ(pooled.per_class, want.per_class);
  EXPECT_EQ(pooled.pixels, 48);
}

TEST(Iou, DimensionMismatchIsInvalidInput) {
  EXPECT_THROW(evaluate_iou(LabelRaster(2, 2), LabelRaster(2, 3)), InvalidInput);
}

TEST(SegConfig, DefaultsAndJson) {
  const SegConfig d;
  EXPECT_EQ(d.initial_iterations, 8000);
  EXPECT_EQ(d.finetune_iterations, 2500);
  EXPECT_EQ(d.batch_size, 32);
  EXPECT_EQ(d.lr, 0.0001);
  EXPECT_EQ(d.num_classes, 4);
  const SegConfig t = toy_config();
  EXPECT_EQ(to_json(seg_config_from_json(to_json(t))), to_json(t));
  EXPECT_THROW(seg_config_from_json(R"({"iterations": 3})"), InvalidConfig);
  SegConfig bad = d;
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), InvalidConfig);
}

TEST(UNetTraining, ZeroIterationsLeaveModelUnchanged) {
  SegConfig cfg = toy_config();
  cfg.initial_iterations = 0;
  cfg.finetune_iterations = 0;
  std::mt19937_64 rng(5);
  std::vector<RasterImage> imgs{random_raster(8, 8, 3, ValueRange::kSigned, rng)};
  std::vector<LabelRaster> labels{random_labels(8, 8, 4, rng)};
  const SegModel fresh = make_seg_model(cfg);
  const SegModel trained = train_unet(imgs, labels, cfg);
  EXPECT_EQ(snapshot(trained.net.parameters()), snapshot(fresh.net.parameters()));
  const SegModel tuned = finetune_unet(trained, imgs, labels);
  EXPECT_EQ(snapshot(tuned.net.parameters()), snapshot(fresh.net.parameters()));
}

TEST(UNetTraining, LossDecreasesOnTwoClassToy) {
  const SegConfig cfg = toy_config(2);
  std::vector<double> deltas;
  for (std::uint64_t seed : {1, 2, 3}) {
    SegConfig c = cfg;
    c.seed = seed;
    std::mt19937_64 rng(seed);
    std::vector<RasterImage> imgs;
    std::vector<LabelRaster> labels;
    two_class_toy(16, rng, imgs, labels);
    std::vector<double> hist;
    train_unet(imgs, labels, c, &hist);
    ASSERT_EQ(hist.size(), 300u);
    deltas.push_back(hist.back() - hist.front());
  }
  std::sort(deltas.begin(), deltas.end());
  EXPECT_LT(deltas[1], 0.0);
}

TEST(UNetTraining, DeterministicUnderSeed) {
  SegConfig cfg = toy_config(2);
  cfg.initial_iterations = 20;
  std::mt19937_64 rng(6);
  std::vector<RasterImage> imgs;
  std::vector<LabelRaster> labels;
  two_class_toy(6, rng, imgs, labels);
  std::vector<double> h1, h2;
  const SegModel a = train_unet(imgs, labels, cfg, &h1);
  const SegModel b = train_unet(imgs, labels, cfg, &h2);
  EXPECT_NEAR(h1.back(), h2.back(), 1e-6);
  EXPECT_EQ(snapshot(a.net.parameters()), snapshot(b.net.parameters()));
  EXPECT_EQ(a.iterations, 20);
}

TEST(UNetTraining, FinetuneContinuesFromGivenWeights) {
  SegConfig cfg = toy_config(2);
  cfg.initial_iterations = 150;
  cfg.finetune_iterations = 30;
  std::mt19937_64 rng(7);
  std::vector<RasterImage> imgs;
  std::vector<LabelRaster> labels;
  two_class_toy(8, rng, imgs, labels);
  std::vector<double> base_hist, tune_hist;
  const SegModel base = train_unet(imgs, labels, cfg, &base_hist);
  const auto before = snapshot(base.net.parameters());
  const SegModel tuned = finetune_unet(base, imgs, labels, &tune_hist);
  EXPECT_EQ(snapshot(base.net.parameters()), before);  // input model untouched
  EXPECT_EQ(tuned.iterations, 180);
  // Same images as fakes: the loss picks up where training left off.
  EXPECT_LT(tune_hist.front(), base_hist.front());
}

TEST(UNetTraining, BadLabelsAndShapesAreInvalidInput) {
  const SegConfig cfg = toy_config(2);
  std::mt19937_64 rng(8);
  std::vector<RasterImage> imgs{random_raster(8, 8, 3, ValueRange::kSigned, rng)};
  std::vector<LabelRaster> bad{LabelRaster(8, 8, 3)};
  EXPECT_THROW(train_unet(imgs, bad, cfg), InvalidInput);
  std::vector<LabelRaster> wrong{LabelRaster(8, 6)};
  EXPECT_THROW(train_unet(imgs, wrong, cfg), InvalidInput);
}

TEST(PredictMap, SinglePatchMatchesDirectArgmax) {
  const SegConfig cfg = toy_config();
  const SegModel m = make_seg_model(cfg);
  std::mt19937_64 rng(9);
  const RasterImage img = random_raster(8, 8, 3, ValueRange::kSigned, rng);
  const LabelRaster got = predict_map(m, img);
  NoGradGuard ng;
  const Tensor logits = m.net(to_tensor(img));
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      int best = 0;
      for (int k = 1; k < 4; ++k)
        if (logits.at(0, k, r, c) > logits.at(0, best, r, c)) best = k;
      EXPECT_EQ(got.at(r, c), best);
    }
}

TEST(PredictMap, TiledWithoutOverlapEqualsPerTilePrediction) {
  const SegConfig cfg = toy_config();
  const SegModel m = make_seg_model(cfg);
  std::mt19937_64 rng(10);
  const RasterImage img = random_raster(16, 24, 3, ValueRange::kSigned, rng);
  const LabelRaster whole = predict_map(m, img);
  EXPECT_EQ(whole.height, 16);
  EXPECT_EQ(whole.width, 24);
  const PatchGrid g = make_patch_grid(16, 24, 8, 0);
  for (const auto& o : g.origins) {
    const LabelRaster tile = predict_map(m, crop(img, o, 8));
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c) EXPECT_EQ(whole.at(o.row + r, o.col + c), tile.at(r, c));
  }
  EXPECT_EQ(predict_map(m, img), whole);
}

TEST(SegCheckpoint, RoundTrip) {
  SegConfig cfg = toy_config(2);
  cfg.initial_iterations = 5;
  std::mt19937_64 rng(12);
  std::vector<RasterImage> imgs;
  std::vector<LabelRaster> labels;
  two_class_toy(4, rng, imgs, labels);
  const SegModel m = train_unet(imgs, labels, cfg);
  TempDir dir("unet");
  save_seg_model(dir / "u.ckpt", m);
  const SegModel back = load_seg_model(dir / "u.ckpt");
  EXPECT_EQ(to_json(back.config), to_json(m.config));
  EXPECT_EQ(back.iterations, 5);
  EXPECT_EQ(snapshot(back.net.parameters()), snapshot(m.net.parameters()));
  EXPECT_THROW(load_seg_model(dir / "missing.ckpt"), Error);
}
