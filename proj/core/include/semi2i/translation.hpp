#pragma once

// Training loop, learning-rate schedule, global style statistics and
// deterministic fake generation for the two-domain translator.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "semi2i/losses.hpp"
#include "semi2i/networks.hpp"
#include "semi2i/raster.hpp"

namespace semi2i {

struct TrainingConfig {
  int num_epochs = 25;
  double base_lr = 0.001;
  int decay_epoch = 15;
  LossWeights weights;
  double d_rate = 0.95;
  int patches_per_iteration = 1;
  double eps = 1e-5;
  std::uint64_t rng_seed = 0;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int patch_size = 256;
  int overlap = 32;
  NetworkConfig network;

  void validate() const;
};

/// Pretty-printed JSON with every field.
std::string to_json(const TrainingConfig& cfg);
/// Reads the keys present in `text` on top of `defaults`; unknown keys are
/// rejected with InvalidConfig.
TrainingConfig training_config_from_json(const std::string& text, const TrainingConfig& defaults = {});

/// base_lr for epoch_no < decay_epoch, then
/// base_lr * (num_epochs - epoch_no) / (num_epochs - decay_epoch). Zero-based epochs.
double lr_schedule(int epoch_no, const TrainingConfig& cfg);

/// Every image and loss of one training step, still attached to the graph.
struct StepGraph {
  ImageTensor fake_a, fake_b;    // A content in B style, B content in A style
  ImageTensor self_a, self_b;    // A', B'
  ImageTensor cross_a, cross_b;  // A'', B''
  StatsTensors style_a, style_b;
  Tensor cross, self_, grad, adv_g, adv_d;
  Tensor total_g, total_d;
};

/// Forward pass of the six generator paths and both discriminators.
/// Discriminator terms score detached fakes.
StepGraph build_step_graph(const ImageTensor& patch_a, const ImageTensor& patch_b, const TranslationNetworks& nets,
                           const TrainingConfig& cfg);

/// One generator update then one discriminator update from a shared
/// forward pass, followed by one moving-average update of each domain's
/// global embedding statistics. Throws NumericalFailure naming the first
/// non-finite loss term.
LossReport train_step(const ImageTensor& patch_a, const ImageTensor& patch_b, TranslationState& state,
                      const TrainingConfig& cfg);

struct TrainHooks {
  /// Receives the tab-separated loss log (header first when starting at iteration 0).
  std::ostream* log = nullptr;
  std::function<void(const TranslationState&, const LossReport&)> on_step;
  std::function<void(const TranslationState&)> on_epoch_end;
};

std::size_t iterations_per_epoch(std::size_t patches_a, std::size_t patches_b);

/// Runs the remaining epochs of `state` (num_epochs x min(|A|, |B|) steps
/// from scratch), sampling one patch per domain uniformly at random.
void train(std::span<const ImageTensor> dataset_a, std::span<const ImageTensor> dataset_b,
           TranslationState& state, const TrainingConfig& cfg, const TrainHooks& hooks = {});

/// Fresh state seeded from cfg.rng_seed, then train().
TranslationState train(std::span<const ImageTensor> dataset_a, std::span<const ImageTensor> dataset_b,
                       const TrainingConfig& cfg, const TrainHooks& hooks = {});

struct TranslationCheckpoint {
  TrainingConfig config;
  TranslationState state;
};

void save_checkpoint(const std::filesystem::path& path, const TranslationState& state, const TrainingConfig& cfg);
TranslationCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Translates a [-1, 1] image tensor into the style of `target` using the
/// global statistics of that domain (content encoder = the other domain).
ImageTensor generate_fake(const TranslationState& state, const ImageTensor& image, Domain target, double eps);

/// Whole-raster translation of a [-1, 1] image through patch tiling and
/// averaged stitching.
RasterImage generate_fake_raster(const TranslationState& state, const TrainingConfig& cfg,
                                 const RasterImage& signed_image, Domain target);

/// Byte images of the source domain -> byte images styled as `target`.
std::vector<RasterImage> generate_fake_dataset(const TranslationCheckpoint& checkpoint,
                                               std::span<const RasterImage> images, Domain target);

}  // namespace semi2i
