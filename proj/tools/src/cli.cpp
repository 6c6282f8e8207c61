#include "cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "semi2i/baselines.hpp"
#include "semi2i/dataset.hpp"
#include "semi2i/errors.hpp"
#include "semi2i/segmentation.hpp"
#include "semi2i/synthetic.hpp"
#include "semi2i/tiling.hpp"
#include "semi2i/translation.hpp"

namespace semi2i::cli {

namespace fs = std::filesystem;

namespace {

const char* const kClassNames[kNumClasses] = {"background", "building", "road", "tree"};

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << text << '\n';
}

// Assigns `value` to `target` only when the flag was given on the command line.
template <typename T, typename U>
void override_if_set(const CLI::Option* opt, const T& value, U& target) {
  if (opt->count() > 0) target = value;
}

struct PatchSet {
  std::vector<RasterImage> patches;  // [-1, 1]
  std::vector<LabelRaster> labels;
};

PatchSet load_patches(const fs::path& manifest_path, int patch_size, int overlap, bool need_labels) {
  const auto data = load_dataset(read_manifest(manifest_path));
  if (data.empty()) throw DataError("manifest " + manifest_path.string() + " lists no images");
  PatchSet set;
  for (const auto& item : data) {
    if (item.image.height < patch_size || item.image.width < patch_size) {
      throw DataError("image '" + item.name + "' is smaller than the " + std::to_string(patch_size) + " px patch");
    }
    ImagePatches tiles = extract_patches(normalize(item.image), patch_size, overlap);
    if (need_labels) {
      if (!item.label) throw DataError("image '" + item.name + "' has no label in " + manifest_path.string());
      for (auto& l : extract_label_patches(*item.label, tiles.grid)) set.labels.push_back(std::move(l));
    }
    for (auto& p : tiles.patches) set.patches.push_back(std::move(p));
  }
  return set;
}

std::vector<Tensor> to_tensors(const std::vector<RasterImage>& patches) {
  std::vector<Tensor> out;
  out.reserve(patches.size());
  for (const auto& p : patches) out.push_back(to_tensor(p));
  return out;
}

Domain parse_domain(const std::string& s) {
  if (s == "A" || s == "a") return Domain::kA;
  if (s == "B" || s == "b") return Domain::kB;
  throw InvalidConfig("domain must be A or B, got '" + s + "'");
}

void print_iou_block(std::ostream& out, const IouReport& r) {
  auto cell = [](const std::optional<double>& v) {
    std::ostringstream ss;
    if (v) {
      ss << std::fixed << std::setprecision(2) << 100.0 * *v;
    } else {
      ss << "n/a";
    }
    return ss.str();
  };
  out << std::left << std::setw(12) << "class" << "IoU (%)\n";
  for (int c = 1; c < static_cast<int>(r.per_class.size()); ++c) {
    const char* name = c < kNumClasses ? kClassNames[c] : "class";
    out << std::left << std::setw(12) << name << cell(r.per_class[c]) << '\n';
  }
  out << std::left << std::setw(12) << "Overall" << cell(r.overall) << '\n';
}

// --- synth-data -------------------------------------------------------------

struct SynthArgs {
  std::string out;
  SynthConfig cfg;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--seed", a.cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--n-images", a.cfg.n_images, "Images per domain")->capture_default_str();
  app.add_option("--height", a.cfg.height, "Image height")->capture_default_str();
  app.add_option("--width", a.cfg.width, "Image width")->capture_default_str();
  app.add_flag("--unpaired{false}", a.cfg.paired, "Draw domain B scenes independently with a different class mix");
  app.add_option("--noise", a.cfg.shift.noise_std, "Noise std added after the colour transform")
      ->capture_default_str();
  app.add_option("--min-gap", a.cfg.shift.min_mean_gap, "Required mean colour gap between domains")
      ->capture_default_str();
}

nlohmann::json synth_json(const SynthConfig& c, double gap) {
  nlohmann::json channels = nlohmann::json::array();
  for (const auto& ch : c.shift.channels) {
    channels.push_back({{"gamma", ch.gamma}, {"gain", ch.gain}, {"offset", ch.offset}, {"invert", ch.invert}});
  }
  auto prior = [](const ScenePrior& p) {
    return nlohmann::json{{"buildings", p.buildings}, {"roads", p.roads}, {"trees", p.trees}};
  };
  return {{"n_images", c.n_images}, {"height", c.height},          {"width", c.width},
          {"seed", c.seed},         {"paired", c.paired},          {"prior_a", prior(c.prior_a)},
          {"prior_b", prior(c.shift.prior_b)},
          {"shift", {{"channels", channels}, {"noise_std", c.shift.noise_std},
                     {"min_mean_gap", c.shift.min_mean_gap}}},
          {"measured_mean_gap", gap}};
}

int run_synth(const SynthArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  const SyntheticDomains d = make_synthetic_domains(a.cfg);
  auto write_domain = [&](const std::vector<SyntheticScene>& scenes, const std::string& name) {
    Manifest m;
    m.domain = name;
    const fs::path dir = root / name;
    for (std::size_t i = 0; i < scenes.size(); ++i) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "%s_%04zu.png", name.c_str(), i);
      const fs::path img = dir / "images" / stem;
      const fs::path lab = dir / "labels" / stem;
      write_png(img, scenes[i].image);
      write_label_png(lab, scenes[i].labels);
      m.entries.push_back({img, lab});
    }
    write_manifest(dir / "manifest.json", m);
  };
  write_domain(d.a, "A");
  write_domain(d.b, "B");
  write_text(root / "synth-data.config.json", synth_json(a.cfg, d.mean_gap).dump(2));
  out << "wrote " << d.a.size() << " + " << d.b.size() << " scenes to " << root.string() << " (mean colour gap "
      << std::fixed << std::setprecision(2) << d.mean_gap << ")\n";
  return kOk;
}

// --- translate-train ----------------------------------------------------------

struct TranslateTrainArgs {
  std::string manifest_a, manifest_b, config, out, resume;
  int epochs = 0, decay_epoch = 0, patch_size = 0, overlap = 0, patches_per_iteration = 0;
  int base_channels = 0, embedding_channels = 0, res_blocks = 0, downsamples = 0, disc_channels = 0,
      disc_layers = 0;
  double lr = 0.0, d_rate = 0.0;
  std::uint64_t seed = 0;
  std::vector<double> lambda;
  std::vector<CLI::Option*> opts;
};

void add_translate_train(CLI::App& app, TranslateTrainArgs& a) {
  app.add_option("--manifest-a", a.manifest_a, "Manifest of domain A (labelled training city)")->required();
  app.add_option("--manifest-b", a.manifest_b, "Manifest of domain B (test city)")->required();
  app.add_option("--config", a.config, "JSON training config; flags override it");
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_option("--resume", a.resume, "Continue from this translation checkpoint");
  a.opts = {
      app.add_option("--epochs", a.epochs, "Number of epochs"),
      app.add_option("--decay-epoch", a.decay_epoch, "Epoch where linear decay starts"),
      app.add_option("--lr", a.lr, "Base learning rate"),
      app.add_option("--d-rate", a.d_rate, "Moving-average rate of the global statistics"),
      app.add_option("--seed", a.seed, "Random seed"),
      app.add_option("--lambda", a.lambda, "Four loss weights: cross self grad adv")->expected(4),
      app.add_option("--patch-size", a.patch_size, "Training patch size"),
      app.add_option("--overlap", a.overlap, "Patch overlap"),
      app.add_option("--patches-per-iteration", a.patches_per_iteration, "Patches per domain and step"),
      app.add_option("--base-channels", a.base_channels, "Width of the first encoder layer"),
      app.add_option("--embedding-channels", a.embedding_channels, "Embedding width"),
      app.add_option("--res-blocks", a.res_blocks, "Residual blocks per encoder/decoder"),
      app.add_option("--downsamples", a.downsamples, "Stride-2 stages"),
      app.add_option("--disc-channels", a.disc_channels, "Width of the first discriminator layer"),
      app.add_option("--disc-layers", a.disc_layers, "Stride-2 discriminator layers"),
  };
}

TrainingConfig resolve_training_config(const TranslateTrainArgs& a, TrainingConfig cfg) {
  if (!a.config.empty()) cfg = training_config_from_json(read_text(a.config), cfg);
  const auto& o = a.opts;
  override_if_set(o[0], a.epochs, cfg.num_epochs);
  override_if_set(o[1], a.decay_epoch, cfg.decay_epoch);
  override_if_set(o[2], a.lr, cfg.base_lr);
  override_if_set(o[3], a.d_rate, cfg.d_rate);
  override_if_set(o[4], a.seed, cfg.rng_seed);
  if (o[5]->count() > 0) cfg.weights = {a.lambda[0], a.lambda[1], a.lambda[2], a.lambda[3]};
  override_if_set(o[6], a.patch_size, cfg.patch_size);
  override_if_set(o[7], a.overlap, cfg.overlap);
  override_if_set(o[8], a.patches_per_iteration, cfg.patches_per_iteration);
  override_if_set(o[9], a.base_channels, cfg.network.base_channels);
  override_if_set(o[10], a.embedding_channels, cfg.network.embedding_channels);
  override_if_set(o[11], a.res_blocks, cfg.network.num_res_blocks);
  override_if_set(o[12], a.downsamples, cfg.network.num_downsamples);
  override_if_set(o[13], a.disc_channels, cfg.network.disc_base_channels);
  override_if_set(o[14], a.disc_layers, cfg.network.disc_layers);
  // A shortened run keeps the decay start inside the schedule.
  if (o[0]->count() > 0 && o[1]->count() == 0 && cfg.decay_epoch > cfg.num_epochs) {
    cfg.decay_epoch = cfg.num_epochs / 2;
  }
  cfg.validate();
  return cfg;
}

int run_translate_train(const TranslateTrainArgs& a, std::ostream& out, std::ostream& err) {
  const fs::path root(a.out);
  TranslationCheckpoint ck;
  const bool resuming = !a.resume.empty();
  if (resuming) ck = load_checkpoint(a.resume);
  const TrainingConfig cfg = resolve_training_config(a, resuming ? ck.config : TrainingConfig{});
  if (resuming && cfg.network.embedding_channels != ck.config.network.embedding_channels) {
    throw InvalidConfig("network shape cannot change when resuming");
  }
  write_text(root / "translate-train.config.json", to_json(cfg));

  const auto set_a = to_tensors(load_patches(a.manifest_a, cfg.patch_size, cfg.overlap, false).patches);
  const auto set_b = to_tensors(load_patches(a.manifest_b, cfg.patch_size, cfg.overlap, false).patches);
  err << "translate-train: " << set_a.size() << " A patches, " << set_b.size() << " B patches, "
      << iterations_per_epoch(set_a.size(), set_b.size()) << " iterations per epoch\n";

  const fs::path ckpt = root / "checkpoints" / "translation.ckpt";
  fs::create_directories(root / "logs");
  std::ofstream log(root / "logs" / "translation_loss.tsv", resuming ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot open the loss log");
  TranslationState state = resuming ? ck.state
                                    : make_translation_state(cfg.network, cfg.rng_seed, {cfg.adam_beta1, cfg.adam_beta2});
  TrainHooks hooks;
  hooks.log = &log;
  hooks.on_epoch_end = [&](const TranslationState& s) {
    save_checkpoint(ckpt, s, cfg);
    err << "epoch " << s.epoch << "/" << cfg.num_epochs << " done, iteration " << s.iteration << '\n';
  };
  train(set_a, set_b, state, cfg, hooks);
  save_checkpoint(ckpt, state, cfg);
  out << "checkpoint " << ckpt.string() << '\n';
  return kOk;
}

// --- translate-apply ----------------------------------------------------------

struct TranslateApplyArgs {
  std::string checkpoint, manifest, out, target = "B";
};

void add_translate_apply(CLI::App& app, TranslateApplyArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "Translation checkpoint")->required();
  app.add_option("--manifest", a.manifest, "Images to translate (labels are carried over)")->required();
  app.add_option("--target", a.target, "Target style domain (A or B)")->capture_default_str();
  app.add_option("--out", a.out, "Output directory")->required();
}

int run_translate_apply(const TranslateApplyArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  const Domain target = parse_domain(a.target);
  const TranslationCheckpoint ck = load_checkpoint(a.checkpoint);
  const Manifest src = read_manifest(a.manifest);
  const auto data = load_dataset(src);
  write_text(root / "translate-apply.config.json",
             nlohmann::json{{"checkpoint", fs::absolute(a.checkpoint).string()},
                            {"manifest", fs::absolute(a.manifest).string()},
                            {"target", std::string(1, domain_letter(target))},
                            {"patch_size", ck.config.patch_size},
                            {"overlap", ck.config.overlap},
                            {"eps", ck.config.eps}}
                 .dump(2));
  Manifest fakes;
  fakes.domain = std::string("fake_") + domain_letter(target);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RasterImage img = data[i].image;
    const RasterImage fake = generate_fake_dataset(ck, std::span(&img, 1), target).front();
    const fs::path path = root / "fakes" / (data[i].name + ".png");
    write_png(path, fake);
    fakes.entries.push_back({path, src.entries[i].label});
  }
  write_manifest(root / "fakes" / "manifest.json", fakes);
  out << "wrote " << data.size() << " fakes to " << (root / "fakes").string() << '\n';
  return kOk;
}

// --- segment-train / segment-finetune -------------------------------------------

struct SegArgs {
  std::string manifest, config, out, checkpoint;
  int iterations = 0, batch_size = 0, base_channels = 0, depth = 0, patch_size = 0, overlap = 0;
  double lr = 0.0;
  std::uint64_t seed = 0;
  std::vector<CLI::Option*> opts;
};

void add_seg(CLI::App& app, SegArgs& a, bool finetune) {
  app.add_option("--manifest", a.manifest, finetune ? "Fake images with the original labels"
                                                    : "Labelled training images")
      ->required();
  app.add_option("--out", a.out, "Output directory")->required();
  if (finetune) {
    app.add_option("--checkpoint", a.checkpoint, "U-net checkpoint to continue from")->required();
  } else {
    app.add_option("--config", a.config, "JSON segmentation config; flags override it");
  }
  a.opts = {
      app.add_option("--iterations", a.iterations, "Optimizer steps"),
      app.add_option("--batch-size", a.batch_size, "Patches per mini-batch"),
      app.add_option("--lr", a.lr, "Learning rate"),
      app.add_option("--seed", a.seed, "Random seed"),
  };
  if (!finetune) {
    a.opts.push_back(app.add_option("--base-channels", a.base_channels, "U-net width"));
    a.opts.push_back(app.add_option("--depth", a.depth, "U-net pooling stages"));
    a.opts.push_back(app.add_option("--patch-size", a.patch_size, "Patch size"));
    a.opts.push_back(app.add_option("--overlap", a.overlap, "Patch overlap"));
  }
}

SegConfig resolve_seg_config(const SegArgs& a, SegConfig cfg, bool finetune) {
  if (!a.config.empty()) cfg = seg_config_from_json(read_text(a.config), cfg);
  const auto& o = a.opts;
  override_if_set(o[0], a.iterations, finetune ? cfg.finetune_iterations : cfg.initial_iterations);
  override_if_set(o[1], a.batch_size, cfg.batch_size);
  override_if_set(o[2], a.lr, cfg.lr);
  override_if_set(o[3], a.seed, cfg.seed);
  if (!finetune) {
    override_if_set(o[4], a.base_channels, cfg.base_channels);
    override_if_set(o[5], a.depth, cfg.depth);
    override_if_set(o[6], a.patch_size, cfg.patch_size);
    override_if_set(o[7], a.overlap, cfg.overlap);
  }
  cfg.validate();
  return cfg;
}

void write_losses(const fs::path& path, const std::vector<double>& losses, std::int64_t first_iteration) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream log(path);
  if (!log) throw DataError("cannot write " + path.string());
  log << "iteration\tloss\n" << std::setprecision(9);
  for (std::size_t i = 0; i < losses.size(); ++i) log << first_iteration + i << '\t' << losses[i] << '\n';
}

int run_segment_train(const SegArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  const SegConfig cfg = resolve_seg_config(a, SegConfig{}, false);
  write_text(root / "segment-train.config.json", to_json(cfg));
  const PatchSet set = load_patches(a.manifest, cfg.patch_size, cfg.overlap, true);
  std::vector<double> losses;
  const SegModel model = train_unet(set.patches, set.labels, cfg, &losses);
  const fs::path ckpt = root / "checkpoints" / "unet.ckpt";
  save_seg_model(ckpt, model);
  write_losses(root / "logs" / "segment_train_loss.tsv", losses, 0);
  out << "checkpoint " << ckpt.string() << '\n';
  return kOk;
}

int run_segment_finetune(const SegArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  SegModel model = load_seg_model(a.checkpoint);
  model.config = resolve_seg_config(a, model.config, true);
  write_text(root / "segment-finetune.config.json", to_json(model.config));
  const PatchSet set = load_patches(a.manifest, model.config.patch_size, model.config.overlap, true);
  std::vector<double> losses;
  const SegModel tuned = finetune_unet(model, set.patches, set.labels, &losses);
  const fs::path ckpt = root / "checkpoints" / "unet_finetuned.ckpt";
  save_seg_model(ckpt, tuned);
  write_losses(root / "logs" / "segment_finetune_loss.tsv", losses, model.iterations);
  out << "checkpoint " << ckpt.string() << '\n';
  return kOk;
}

// --- segment-predict ------------------------------------------------------------

struct PredictArgs {
  std::string checkpoint, manifest, out;
  bool gray_world = false;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  app.add_option("--checkpoint", a.checkpoint, "U-net checkpoint")->required();
  app.add_option("--manifest", a.manifest, "Images to segment")->required();
  app.add_option("--out", a.out, "Output directory")->required();
  app.add_flag("--gray-world", a.gray_world, "Apply gray-world correction before prediction");
}

int run_predict(const PredictArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  const SegModel model = load_seg_model(a.checkpoint);
  const Manifest src = read_manifest(a.manifest);
  const auto data = load_dataset(src);
  write_text(root / "segment-predict.config.json",
             nlohmann::json{{"checkpoint", fs::absolute(a.checkpoint).string()},
                            {"manifest", fs::absolute(a.manifest).string()},
                            {"gray_world", a.gray_world},
                            {"patch_size", model.config.patch_size},
                            {"overlap", model.config.overlap}}
                 .dump(2));
  Manifest preds;
  preds.domain = "predictions";
  // Entries pair each source image with its prediction.
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RasterImage img = a.gray_world ? gray_world(data[i].image) : data[i].image;
    const fs::path path = root / "predictions" / (data[i].name + ".png");
    write_label_png(path, predict_map(model, normalize(img)));
    preds.entries.push_back({src.entries[i].image, path});
  }
  write_manifest(root / "predictions" / "manifest.json", preds);
  out << "wrote " << data.size() << " prediction maps to " << (root / "predictions").string() << '\n';
  return kOk;
}

// --- evaluate -------------------------------------------------------------------

struct EvaluateArgs {
  std::string predictions, ground_truth, out;
};

void add_evaluate(CLI::App& app, EvaluateArgs& a) {
  app.add_option("--predictions", a.predictions, "Manifest whose labels are predicted maps")->required();
  app.add_option("--ground-truth", a.ground_truth, "Manifest with ground-truth labels")->required();
  app.add_option("--out", a.out, "Output directory")->required();
}

int run_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  const Manifest pm = read_manifest(a.predictions);
  const Manifest gm = read_manifest(a.ground_truth);
  std::map<std::string, fs::path> gt_by_stem;
  for (const auto& e : gm.entries) {
    if (!e.label) throw DataError("ground-truth entry " + e.image.string() + " has no label");
    gt_by_stem[e.image.stem().string()] = *e.label;
  }
  std::vector<LabelRaster> preds, gts;
  for (const auto& e : pm.entries) {
    if (!e.label) throw DataError("prediction entry " + e.image.string() + " has no label map");
    const auto it = gt_by_stem.find(e.image.stem().string());
    if (it == gt_by_stem.end()) throw DataError("no ground truth for " + e.image.stem().string());
    preds.push_back(read_label_png(*e.label));
    gts.push_back(read_label_png(it->second));
  }
  if (preds.empty()) throw DataError("no predictions to evaluate");
  const IouReport report = evaluate_iou(preds, gts);
  write_text(root / "reports" / "iou.json", to_json(report));
  write_text(root / "evaluate.config.json", nlohmann::json{{"predictions", fs::absolute(a.predictions).string()},
                                                           {"ground_truth", fs::absolute(a.ground_truth).string()}}
                                                .dump(2));
  print_iou_block(out, report);
  return kOk;
}

// --- baseline-apply -------------------------------------------------------------

struct BaselineArgs {
  std::string method, manifest, reference, out;
};

void add_baseline(CLI::App& app, BaselineArgs& a) {
  app.add_option("--method", a.method, "gray-world or histogram-match")
      ->required()
      ->check(CLI::IsMember({"gray-world", "histogram-match"}));
  app.add_option("--manifest", a.manifest, "Images to transform (labels are carried over)")->required();
  app.add_option("--reference", a.reference, "Reference manifest for histogram matching (pooled histogram)");
  app.add_option("--out", a.out, "Output directory")->required();
}

int run_baseline(const BaselineArgs& a, std::ostream& out) {
  const fs::path root(a.out);
  const bool hm = a.method == "histogram-match";
  if (hm && a.reference.empty()) throw InvalidConfig("histogram-match needs --reference");
  const Manifest src = read_manifest(a.manifest);
  const auto data = load_dataset(src);
  std::optional<ChannelHistograms> ref;
  if (hm) {
    for (const auto& item : load_dataset(read_manifest(a.reference))) {
      if (!ref) {
        ref = ChannelHistograms::of(item.image);
      } else {
        ref->accumulate(item.image);
      }
    }
    if (!ref) throw DataError("reference manifest lists no images");
  }
  const std::string dir = hm ? "histogram_match" : "gray_world";
  write_text(root / ("baseline-apply." + dir + ".config.json"),
             nlohmann::json{{"method", a.method},
                            {"manifest", fs::absolute(a.manifest).string()},
                            {"reference", a.reference.empty() ? "" : fs::absolute(a.reference).string()}}
                 .dump(2));
  Manifest result;
  result.domain = dir;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const RasterImage img = hm ? histogram_match(data[i].image, *ref) : gray_world(data[i].image);
    const fs::path path = root / "fakes" / dir / (data[i].name + ".png");
    write_png(path, img);
    result.entries.push_back({path, src.entries[i].label});
  }
  write_manifest(root / "fakes" / dir / "manifest.json", result);
  out << "wrote " << data.size() << " images to " << (root / "fakes" / dir).string() << '\n';
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semantically consistent image-to-image translation for segmentation domain adaptation", "semi2i"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "semi2i 0.1.0");

  SynthArgs synth;
  TranslateTrainArgs ttrain;
  TranslateApplyArgs tapply;
  SegArgs strain, sfine;
  PredictArgs predict;
  EvaluateArgs evaluate;
  BaselineArgs baseline;

  auto* c_synth = app.add_subcommand("synth-data", "Generate the synthetic two-domain benchmark");
  add_synth(*c_synth, synth);
  auto* c_ttrain = app.add_subcommand("translate-train", "Train the translation networks");
  add_translate_train(*c_ttrain, ttrain);
  auto* c_tapply = app.add_subcommand("translate-apply", "Translate a dataset with a trained checkpoint");
  add_translate_apply(*c_tapply, tapply);
  auto* c_strain = app.add_subcommand("segment-train", "Train a U-net on labelled images");
  add_seg(*c_strain, strain, false);
  auto* c_sfine = app.add_subcommand("segment-finetune", "Fine-tune a U-net on translated images");
  add_seg(*c_sfine, sfine, true);
  auto* c_predict = app.add_subcommand("segment-predict", "Predict label maps for whole images");
  add_predict(*c_predict, predict);
  auto* c_eval = app.add_subcommand("evaluate", "Per-class and overall IoU");
  add_evaluate(*c_eval, evaluate);
  auto* c_base = app.add_subcommand("baseline-apply", "Gray-world or histogram-matching colour transfer");
  add_baseline(*c_base, baseline);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_synth) return run_synth(synth, out);
    if (*c_ttrain) return run_translate_train(ttrain, out, err);
    if (*c_tapply) return run_translate_apply(tapply, out);
    if (*c_strain) return run_segment_train(strain, out);
    if (*c_sfine) return run_segment_finetune(sfine, out);
    if (*c_predict) return run_predict(predict, out);
    if (*c_eval) return run_evaluate(evaluate, out);
    if (*c_base) return run_baseline(baseline, out);
  } catch (const InvalidConfig& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace semi2i::cli
