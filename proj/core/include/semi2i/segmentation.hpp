#pragma once

// U-net segmentation: training on real patches, fine-tuning on translated
// patches, tiled whole-raster prediction and IoU scoring.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "semi2i/nn.hpp"
#include "semi2i/raster.hpp"

namespace semi2i {

struct SegConfig {
  int initial_iterations = 8000;
  int finetune_iterations = 2500;
  int batch_size = 32;
  double lr = 0.0001;
  int num_classes = kNumClasses;
  int in_channels = 3;
  int base_channels = 64;
  int depth = 4;  // number of 2x2 poolings
  int patch_size = 256;
  int overlap = 32;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string to_json(const SegConfig& cfg);
SegConfig seg_config_from_json(const std::string& text, const SegConfig& defaults = {});

/// Encoder of depth x (conv3-relu-conv3-relu, maxpool), a bottleneck block,
/// then depth x (2x2 stride-2 up-convolution, skip concat, conv block) and a
/// 1x1 classifier.
class UNet {
 public:
  UNet() = default;
  UNet(const SegConfig& cfg, std::mt19937_64& rng);

  /// N x C x H x W in [-1, 1] -> N x classes x H x W logits. H and W must be
  /// divisible by 2^depth.
  Tensor operator()(const Tensor& x) const;
  ParameterList parameters() const;
  int depth() const { return static_cast<int>(up_.size()); }

 private:
  struct Block {
    Conv2d a;
    Conv2d b;
  };
  static Block make_block(int in, int out, std::mt19937_64& rng);
  static Tensor run_block(const Block& blk, const Tensor& x);

  std::vector<Block> down_;
  Block bottleneck_;
  std::vector<ConvTranspose2d> up_;
  std::vector<Block> up_blocks_;
  Conv2d classifier_;
};

struct SegModel {
  SegConfig config;
  UNet net;
  std::int64_t iterations = 0;  // optimizer steps taken so far
};

SegModel make_seg_model(const SegConfig& cfg);

/// Runs cfg.initial_iterations Adam steps on random mini-batches (drawn with
/// replacement) of [-1, 1] patches. Per-step losses go to `loss_history`.
SegModel train_unet(std::span<const RasterImage> patches, std::span<const LabelRaster> labels, const SegConfig& cfg,
                    std::vector<double>* loss_history = nullptr);

/// Continues from `model` for finetune_iterations steps with a fresh
/// optimizer; the weights are never reinitialized.
SegModel finetune_unet(const SegModel& model, std::span<const RasterImage> fake_patches,
                       std::span<const LabelRaster> original_labels, std::vector<double>* loss_history = nullptr);

/// Shared loop behind train_unet and finetune_unet.
void optimize_unet(SegModel& model, std::span<const RasterImage> patches, std::span<const LabelRaster> labels,
                   int iterations, std::uint64_t seed, std::vector<double>* loss_history);

/// Class scores averaged over overlapping tiles, then argmax (lowest class on
/// ties). Input is a [-1, 1] raster.
LabelRaster predict_map(const SegModel& model, const RasterImage& signed_raster);

class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes = kNumClasses);

  void add(const LabelRaster& pred, const LabelRaster& gt);
  /// rows = ground truth, cols = prediction
  std::int64_t count(int gt, int pred) const { return counts_[gt * n_ + pred]; }
  std::int64_t total() const;
  int num_classes() const { return n_; }
  /// TP / (TP + FP + FN); empty when the class is absent from both maps.
  std::optional<double> iou(int c) const;

 private:
  int n_;
  std::vector<std::int64_t> counts_;
};

struct IouReport {
  std::vector<std::optional<double>> per_class;  // index = class id, background included
  std::optional<double> overall;                 // mean over defined foreground classes
  std::int64_t pixels = 0;
};

/// Mean of the defined entries; empty if none is defined.
std::optional<double> overall_iou(std::span<const std::optional<double>> foreground);

IouReport iou_report(const ConfusionMatrix& cm);
IouReport evaluate_iou(const LabelRaster& pred, const LabelRaster& gt, int num_classes = kNumClasses);
/// Pools one confusion matrix over all pairs.
IouReport evaluate_iou(std::span<const LabelRaster> preds, std::span<const LabelRaster> gts,
                       int num_classes = kNumClasses);

/// JSON report: per-class IoU (null when undefined) and overall.
std::string to_json(const IouReport& report);

void save_seg_model(const std::filesystem::path& path, const SegModel& model);
SegModel load_seg_model(const std::filesystem::path& path);

}  // namespace semi2i
