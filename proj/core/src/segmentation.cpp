#include "semi2i/segmentation.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "semi2i/archive.hpp"
#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"
#include "semi2i/optim.hpp"
#include "semi2i/tiling.hpp"

namespace semi2i {

using nlohmann::json;

namespace {

json seg_to_json(const SegConfig& c) {
  return json{{"initial_iterations", c.initial_iterations},
              {"finetune_iterations", c.finetune_iterations},
              {"batch_size", c.batch_size},
              {"lr", c.lr},
              {"num_classes", c.num_classes},
              {"in_channels", c.in_channels},
              {"base_channels", c.base_channels},
              {"depth", c.depth},
              {"patch_size", c.patch_size},
              {"overlap", c.overlap},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"seed", c.seed}};
}

SegConfig seg_from_json(const json& j, SegConfig c) {
  if (!j.is_object()) throw InvalidConfig("segmentation config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "initial_iterations") c.initial_iterations = v.get<int>();
      else if (key == "finetune_iterations") c.finetune_iterations = v.get<int>();
      else if (key == "batch_size") c.batch_size = v.get<int>();
      else if (key == "lr") c.lr = v.get<double>();
      else if (key == "num_classes") c.num_classes = v.get<int>();
      else if (key == "in_channels") c.in_channels = v.get<int>();
      else if (key == "base_channels") c.base_channels = v.get<int>();
      else if (key == "depth") c.depth = v.get<int>();
      else if (key == "patch_size") c.patch_size = v.get<int>();
      else if (key == "overlap") c.overlap = v.get<int>();
      else if (key == "adam_beta1") c.adam_beta1 = v.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = v.get<double>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw InvalidConfig("unknown segmentation config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("malformed segmentation config: ") + e.what());
  }
  return c;
}

double he_std(int fan_in) { return std::sqrt(2.0 / fan_in); }

void check_training_set(std::span<const RasterImage> patches, std::span<const LabelRaster> labels,
                        const SegConfig& cfg, const char* what) {
  if (patches.size() != labels.size()) {
    throw InvalidInput(std::string(what) + ": " + std::to_string(patches.size()) + " patches but " +
                       std::to_string(labels.size()) + " label maps");
  }
  if (patches.empty()) throw InvalidInput(std::string(what) + ": empty training set");
  const int h = patches[0].height;
  const int w = patches[0].width;
  const int div = 1 << cfg.depth;
  if (h % div || w % div) {
    throw InvalidInput(std::string(what) + ": patch size must be divisible by " + std::to_string(div));
  }
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& p = patches[i];
    const auto& l = labels[i];
    if (p.height != h || p.width != w || p.channels != cfg.in_channels) {
      throw InvalidInput(std::string(what) + ": patch " + std::to_string(i) + " has a different shape");
    }
    if (l.height != h || l.width != w) {
      throw InvalidInput(std::string(what) + ": labels " + std::to_string(i) + " not aligned with the patch");
    }
    l.validate(cfg.num_classes);
  }
}

LabelRaster argmax(const RasterImage& scores) {
  LabelRaster out(scores.height, scores.width);
  for (int r = 0; r < scores.height; ++r) {
    for (int c = 0; c < scores.width; ++c) {
      int best = 0;
      for (int k = 1; k < scores.channels; ++k) {
        if (scores.at(r, c, k) > scores.at(r, c, best)) best = k;
      }
      out.at(r, c) = static_cast<std::uint8_t>(best);
    }
  }
  return out;
}

}  // namespace

void SegConfig::validate() const {
  if (initial_iterations < 0 || finetune_iterations < 0) throw InvalidConfig("iteration counts must be >= 0");
  if (batch_size < 1) throw InvalidConfig("batch_size must be positive");
  if (!(lr > 0.0)) throw InvalidConfig("lr must be positive");
  if (num_classes < 2 || num_classes > 256) throw InvalidConfig("num_classes must lie in [2, 256]");
  if (in_channels < 1 || base_channels < 1 || depth < 1) throw InvalidConfig("invalid U-net shape");
  if (patch_size < 1 || overlap < 0 || overlap >= patch_size) throw InvalidConfig("need 0 <= overlap < patch_size");
  if (patch_size % (1 << depth) != 0) throw InvalidConfig("patch_size must be divisible by 2^depth");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidConfig("Adam betas must lie in [0, 1)");
  }
}

std::string to_json(const SegConfig& cfg) { return seg_to_json(cfg).dump(2); }

SegConfig seg_config_from_json(const std::string& text, const SegConfig& defaults) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("cannot parse segmentation config: ") + e.what());
  }
  return seg_from_json(j, defaults);
}

UNet::Block UNet::make_block(int in, int out, std::mt19937_64& rng) {
  Block blk;
  blk.a = Conv2d(in, out, 3, 1, 1, he_std(in * 9), rng);
  blk.b = Conv2d(out, out, 3, 1, 1, he_std(out * 9), rng);
  return blk;
}

Tensor UNet::run_block(const Block& blk, const Tensor& x) { return ops::relu(blk.b(ops::relu(blk.a(x)))); }

UNet::UNet(const SegConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  int in = cfg.in_channels;
  for (int k = 0; k < cfg.depth; ++k) {
    const int width = cfg.base_channels << k;
    down_.push_back(make_block(in, width, rng));
    in = width;
  }
  bottleneck_ = make_block(in, cfg.base_channels << cfg.depth, rng);
  in = cfg.base_channels << cfg.depth;
  for (int k = cfg.depth - 1; k >= 0; --k) {
    const int width = cfg.base_channels << k;
    up_.emplace_back(in, width, 2, 2, 0, 0, he_std(in * 4), rng);
    up_blocks_.push_back(make_block(2 * width, width, rng));
    in = width;
  }
  classifier_ = Conv2d(in, cfg.num_classes, 1, 1, 0, he_std(in), rng);
}

Tensor UNet::operator()(const Tensor& x) const {
  const int div = 1 << depth();
  if (x.rank() != 4 || x.dim(2) % div || x.dim(3) % div) {
    throw InvalidInput("U-net input " + to_string(x.shape()) + " must be NCHW with H, W divisible by " +
                       std::to_string(div));
  }
  std::vector<Tensor> skips;
  Tensor h = x;
  for (const auto& blk : down_) {
    h = run_block(blk, h);
    skips.push_back(h);
    h = ops::max_pool2x2(h);
  }
  h = run_block(bottleneck_, h);
  for (std::size_t k = 0; k < up_.size(); ++k) {
    h = up_[k](h);
    h = run_block(up_blocks_[k], ops::concat_channels(skips[skips.size() - 1 - k], h));
  }
  return classifier_(h);
}

ParameterList UNet::parameters() const {
  ParameterList out;
  for (std::size_t k = 0; k < down_.size(); ++k) {
    down_[k].a.collect("down" + std::to_string(k) + ".0", out);
    down_[k].b.collect("down" + std::to_string(k) + ".1", out);
  }
  bottleneck_.a.collect("bottleneck.0", out);
  bottleneck_.b.collect("bottleneck.1", out);
  for (std::size_t k = 0; k < up_.size(); ++k) {
    up_[k].collect("upconv" + std::to_string(k), out);
    up_blocks_[k].a.collect("up" + std::to_string(k) + ".0", out);
    up_blocks_[k].b.collect("up" + std::to_string(k) + ".1", out);
  }
  classifier_.collect("classifier", out);
  return out;
}

SegModel make_seg_model(const SegConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  return SegModel{cfg, UNet(cfg, rng), 0};
}

void optimize_unet(SegModel& model, std::span<const RasterImage> patches, std::span<const LabelRaster> labels,
                   int iterations, std::uint64_t seed, std::vector<double>* loss_history) {
  const SegConfig& cfg = model.config;
  if (iterations < 0) throw InvalidConfig("iteration count must be >= 0");
  if (iterations == 0) return;
  check_training_set(patches, labels, cfg, "segmentation training");
  const ParameterList params = model.net.parameters();
  Adam opt(params, {cfg.adam_beta1, cfg.adam_beta2});
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, patches.size() - 1);
  const std::size_t plane = static_cast<std::size_t>(patches[0].height) * patches[0].width;
  for (int it = 0; it < iterations; ++it) {
    std::vector<Tensor> batch;
    std::vector<int> targets;
    targets.reserve(plane * cfg.batch_size);
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t i = pick(rng);
      batch.push_back(to_tensor(patches[i]));
      targets.insert(targets.end(), labels[i].ids.begin(), labels[i].ids.end());
    }
    const Tensor x = batch.size() == 1 ? batch[0] : ops::concat_batch(batch);
    zero_grad(params);
    const Tensor loss = ops::softmax_cross_entropy(model.net(x), targets);
    if (!std::isfinite(loss.item())) {
      throw NumericalFailure("non-finite segmentation loss at iteration " + std::to_string(model.iterations));
    }
    backward(loss);
    opt.step(params, cfg.lr);
    ++model.iterations;
    if (loss_history) loss_history->push_back(loss.item());
  }
  zero_grad(params);
}

SegModel train_unet(std::span<const RasterImage> patches, std::span<const LabelRaster> labels, const SegConfig& cfg,
                    std::vector<double>* loss_history) {
  SegModel model = make_seg_model(cfg);
  optimize_unet(model, patches, labels, cfg.initial_iterations, cfg.seed, loss_history);
  return model;
}

SegModel finetune_unet(const SegModel& model, std::span<const RasterImage> fake_patches,
                       std::span<const LabelRaster> original_labels, std::vector<double>* loss_history) {
  // Deep copy so the caller's model stays as it was.
  SegModel tuned = make_seg_model(model.config);
  copy_values(model.net.parameters(), tuned.net.parameters());
  tuned.iterations = model.iterations;
  optimize_unet(tuned, fake_patches, original_labels, model.config.finetune_iterations, model.config.seed + 1,
                loss_history);
  return tuned;
}

LabelRaster predict_map(const SegModel& model, const RasterImage& raster) {
  const SegConfig& cfg = model.config;
  if (raster.range != ValueRange::kSigned) throw InvalidInput("predict_map: expected a [-1, 1] raster");
  if (raster.channels != cfg.in_channels) throw InvalidInput("predict_map: channel count mismatch");
  raster.validate();
  NoGradGuard no_grad;
  auto scores = [&](const RasterImage& img) { return from_tensor(model.net(to_tensor(img)), ValueRange::kUnbounded); };
  const int div = 1 << cfg.depth;
  if (raster.height <= cfg.patch_size && raster.width <= cfg.patch_size) {
    if (raster.height % div || raster.width % div) {
      throw InvalidInput("predict_map: raster smaller than a patch must have dims divisible by " +
                         std::to_string(div));
    }
    return argmax(scores(raster));
  }
  const ImagePatches tiles = extract_patches(raster, cfg.patch_size, cfg.overlap);
  std::vector<RasterImage> out;
  out.reserve(tiles.patches.size());
  for (const auto& p : tiles.patches) out.push_back(scores(p));
  return argmax(stitch_patches(out, tiles.grid, raster.height, raster.width));
}

ConfusionMatrix::ConfusionMatrix(int num_classes) : n_(num_classes) {
  if (num_classes < 1) throw InvalidInput("ConfusionMatrix: need at least one class");
  counts_.assign(static_cast<std::size_t>(n_) * n_, 0);
}

void ConfusionMatrix::add(const LabelRaster& pred, const LabelRaster& gt) {
  if (pred.height != gt.height || pred.width != gt.width) {
    throw InvalidInput("evaluate_iou: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                       " vs ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
  }
  pred.validate(n_);
  gt.validate(n_);
  for (std::size_t i = 0; i < gt.ids.size(); ++i) ++counts_[gt.ids[i] * n_ + pred.ids[i]];
}

std::int64_t ConfusionMatrix::total() const {
  std::int64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

std::optional<double> ConfusionMatrix::iou(int c) const {
  std::int64_t tp = count(c, c);
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  for (int k = 0; k < n_; ++k) {
    if (k == c) continue;
    fp += count(k, c);
    fn += count(c, k);
  }
  const std::int64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return static_cast<double>(tp) / static_cast<double>(denom);
}

std::optional<double> overall_iou(std::span<const std::optional<double>> foreground) {
  double sum = 0.0;
  int defined = 0;
  for (const auto& v : foreground) {
    if (v) {
      sum += *v;
      ++defined;
    }
  }
  if (defined == 0) return std::nullopt;
  return sum / defined;
}

IouReport iou_report(const ConfusionMatrix& cm) {
  IouReport r;
  for (int c = 0; c < cm.num_classes(); ++c) r.per_class.push_back(cm.iou(c));
  r.overall = overall_iou(std::span(r.per_class).subspan(1));
  r.pixels = cm.total();
  return r;
}

IouReport evaluate_iou(const LabelRaster& pred, const LabelRaster& gt, int num_classes) {
  ConfusionMatrix cm(num_classes);
  cm.add(pred, gt);
  return iou_report(cm);
}

IouReport evaluate_iou(std::span<const LabelRaster> preds, std::span<const LabelRaster> gts, int num_classes) {
  if (preds.size() != gts.size()) throw InvalidInput("evaluate_iou: prediction and ground-truth counts differ");
  ConfusionMatrix cm(num_classes);
  for (std::size_t i = 0; i < preds.size(); ++i) cm.add(preds[i], gts[i]);
  return iou_report(cm);
}

std::string to_json(const IouReport& report) {
  json per_class = json::array();
  for (const auto& v : report.per_class) per_class.push_back(v ? json(*v) : json(nullptr));
  json j{{"per_class", per_class},
         {"overall", report.overall ? json(*report.overall) : json(nullptr)},
         {"pixels", report.pixels}};
  return j.dump(2);
}

void save_seg_model(const std::filesystem::path& path, const SegModel& model) {
  Archive ar;
  ar.metadata_json =
      json{{"format", "semi2i-unet"}, {"config", seg_to_json(model.config)}, {"iterations", model.iterations}}.dump();
  for (const auto& p : model.net.parameters()) ar.add(p.name, p.tensor);
  write_archive(path, ar);
}

SegModel load_seg_model(const std::filesystem::path& path) {
  const Archive ar = read_archive(path);
  json meta;
  try {
    meta = json::parse(ar.metadata_json);
    if (meta.value("format", "") != "semi2i-unet") throw InvalidCheckpoint(path.string() + " is not a U-net checkpoint");
    SegModel model = make_seg_model(seg_from_json(meta.at("config"), SegConfig{}));
    model.iterations = meta.at("iterations").get<std::int64_t>();
    load_parameters(ar, model.net.parameters());
    return model;
  } catch (const json::exception& e) {
    throw InvalidCheckpoint(std::string("corrupt U-net checkpoint metadata: ") + e.what());
  } catch (const InvalidConfig& e) {
    throw InvalidCheckpoint(std::string("U-net checkpoint config: ") + e.what());
  }
}

}  // namespace semi2i
