#include "semi2i/translation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "semi2i/archive.hpp"
#include "semi2i/dataset.hpp"
#include "semi2i/errors.hpp"
#include "semi2i/ops.hpp"
#include "semi2i/tiling.hpp"

namespace semi2i {

using nlohmann::json;

namespace {

const char* norm_name(NormKind k) { return k == NormKind::kInstance ? "instance" : "none"; }

NormKind parse_norm(const json& j) {
  const auto s = j.get<std::string>();
  if (s == "instance") return NormKind::kInstance;
  if (s == "none") return NormKind::kNone;
  throw InvalidConfig("unknown norm kind '" + s + "'");
}

json network_to_json(const NetworkConfig& n) {
  return json{{"in_channels", n.in_channels},
              {"in_channels_b", n.in_channels_b},
              {"base_channels", n.base_channels},
              {"num_downsamples", n.num_downsamples},
              {"embedding_channels", n.embedding_channels},
              {"num_res_blocks", n.num_res_blocks},
              {"negative_slope", n.negative_slope},
              {"encoder_norm", norm_name(n.encoder_norm)},
              {"decoder_norm", norm_name(n.decoder_norm)},
              {"disc_base_channels", n.disc_base_channels},
              {"disc_layers", n.disc_layers},
              {"init_std", n.init_std},
              {"norm_eps", n.norm_eps}};
}

void network_from_json(const json& j, NetworkConfig& n) {
  for (const auto& [key, v] : j.items()) {
    if (key == "in_channels") n.in_channels = v.get<int>();
    else if (key == "in_channels_b") n.in_channels_b = v.get<int>();
    else if (key == "base_channels") n.base_channels = v.get<int>();
    else if (key == "num_downsamples") n.num_downsamples = v.get<int>();
    else if (key == "embedding_channels") n.embedding_channels = v.get<int>();
    else if (key == "num_res_blocks") n.num_res_blocks = v.get<int>();
    else if (key == "negative_slope") n.negative_slope = v.get<double>();
    else if (key == "encoder_norm") n.encoder_norm = parse_norm(v);
    else if (key == "decoder_norm") n.decoder_norm = parse_norm(v);
    else if (key == "disc_base_channels") n.disc_base_channels = v.get<int>();
    else if (key == "disc_layers") n.disc_layers = v.get<int>();
    else if (key == "init_std") n.init_std = v.get<double>();
    else if (key == "norm_eps") n.norm_eps = v.get<double>();
    else throw InvalidConfig("unknown network config key '" + key + "'");
  }
}

json config_to_json(const TrainingConfig& c) {
  return json{{"num_epochs", c.num_epochs},
              {"base_lr", c.base_lr},
              {"decay_epoch", c.decay_epoch},
              {"lambda", {c.weights.lambda1, c.weights.lambda2, c.weights.lambda3, c.weights.lambda4}},
              {"d_rate", c.d_rate},
              {"patches_per_iteration", c.patches_per_iteration},
              {"eps", c.eps},
              {"seed", c.rng_seed},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"patch_size", c.patch_size},
              {"overlap", c.overlap},
              {"network", network_to_json(c.network)}};
}

TrainingConfig config_from_json(const json& j, TrainingConfig c) {
  if (!j.is_object()) throw InvalidConfig("training config must be a JSON object");
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "num_epochs") c.num_epochs = v.get<int>();
      else if (key == "base_lr") c.base_lr = v.get<double>();
      else if (key == "decay_epoch") c.decay_epoch = v.get<int>();
      else if (key == "lambda") {
        const auto l = v.get<std::vector<double>>();
        if (l.size() != 4) throw InvalidConfig("'lambda' must hold 4 weights");
        c.weights = {l[0], l[1], l[2], l[3]};
      } else if (key == "d_rate") c.d_rate = v.get<double>();
      else if (key == "patches_per_iteration") c.patches_per_iteration = v.get<int>();
      else if (key == "eps") c.eps = v.get<double>();
      else if (key == "seed") c.rng_seed = v.get<std::uint64_t>();
      else if (key == "adam_beta1") c.adam_beta1 = v.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = v.get<double>();
      else if (key == "patch_size") c.patch_size = v.get<int>();
      else if (key == "overlap") c.overlap = v.get<int>();
      else if (key == "network") network_from_json(v, c.network);
      else throw InvalidConfig("unknown training config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("malformed training config: ") + e.what());
  }
  return c;
}

void check_finite(const Tensor& t, const char* term, std::int64_t iteration) {
  if (!std::isfinite(t.item())) {
    throw NumericalFailure(std::string("non-finite ") + term + " loss at iteration " + std::to_string(iteration));
  }
}

ParameterList concat(ParameterList a, const ParameterList& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void require_stats(const TranslationState& s, Domain target) {
  const auto updates = target == Domain::kA ? s.stats_updates_a : s.stats_updates_b;
  if (updates <= 0) {
    throw InvalidCheckpoint(std::string("checkpoint holds no global statistics for domain ") + domain_letter(target));
  }
}

}  // namespace

void TrainingConfig::validate() const {
  if (num_epochs < 1) throw InvalidConfig("num_epochs must be >= 1");
  // decay_epoch == num_epochs keeps the rate constant
  if (!(decay_epoch >= 0 && decay_epoch <= num_epochs)) {
    throw InvalidConfig("decay_epoch must satisfy 0 <= decay_epoch <= num_epochs");
  }
  if (!(base_lr >= 0.0)) throw InvalidConfig("base_lr must be non-negative");
  if (!(d_rate > 0.0 && d_rate < 1.0)) throw InvalidConfig("d_rate must lie in (0, 1)");
  if (patches_per_iteration < 1) throw InvalidConfig("patches_per_iteration must be >= 1");
  if (!(eps > 0.0)) throw InvalidConfig("eps must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw InvalidConfig("Adam betas must lie in [0, 1)");
  }
  if (patch_size < 1 || overlap < 0 || overlap >= patch_size) {
    throw InvalidConfig("need 0 <= overlap < patch_size");
  }
  if (patch_size % network.spatial_divisor() != 0) {
    throw InvalidConfig("patch_size must be divisible by 2^num_downsamples");
  }
  weights.validate();
  network.validate();
}

std::string to_json(const TrainingConfig& cfg) { return config_to_json(cfg).dump(2); }

TrainingConfig training_config_from_json(const std::string& text, const TrainingConfig& defaults) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("cannot parse training config: ") + e.what());
  }
  return config_from_json(j, defaults);
}

double lr_schedule(int epoch_no, const TrainingConfig& cfg) {
  if (epoch_no < 0 || epoch_no >= cfg.num_epochs) {
    throw InvalidInput("lr_schedule: epoch " + std::to_string(epoch_no) + " outside [0, " +
                       std::to_string(cfg.num_epochs) + ")");
  }
  if (epoch_no < cfg.decay_epoch) return cfg.base_lr;
  return cfg.base_lr * static_cast<double>(cfg.num_epochs - epoch_no) /
         static_cast<double>(cfg.num_epochs - cfg.decay_epoch);
}

StepGraph build_step_graph(const ImageTensor& a, const ImageTensor& b, const TranslationNetworks& n,
                           const TrainingConfig& cfg) {
  const double eps = cfg.eps;
  const LossWeights& w = cfg.weights;
  StepGraph g;

  // Style swap with the counterpart patch's statistics.
  const Encoded enc_a = n.encoder_a(a);
  const Encoded enc_b = n.encoder_b(b);
  g.style_a = stats_tensors(enc_a.embedding);
  g.style_b = stats_tensors(enc_b.embedding);
  g.fake_a = n.decoder_b(ops::adain(enc_a.embedding, g.style_b.mu, g.style_b.sigma, eps), enc_a.lowlevel);
  g.fake_b = n.decoder_a(ops::adain(enc_b.embedding, g.style_a.mu, g.style_a.sigma, eps), enc_b.lowlevel);

  g.self_a = n.decoder_a(enc_a.embedding, enc_a.lowlevel);
  g.self_b = n.decoder_b(enc_b.embedding, enc_b.lowlevel);

  // fake A carries B's style, so it goes back through encoder B.
  const Encoded enc_fake_a = n.encoder_b(g.fake_a);
  const Encoded enc_fake_b = n.encoder_a(g.fake_b);
  g.cross_a =
      n.decoder_a(ops::adain(enc_fake_a.embedding, g.style_a.mu, g.style_a.sigma, eps), enc_fake_a.lowlevel);
  g.cross_b =
      n.decoder_b(ops::adain(enc_fake_b.embedding, g.style_b.mu, g.style_b.sigma, eps), enc_fake_b.lowlevel);

  g.cross = cross_reconstruction_loss(a, g.cross_a, b, g.cross_b);
  g.self_ = self_reconstruction_loss(a, g.self_a, b, g.self_b);
  g.grad = gradient_loss(a, g.fake_a, b, g.fake_b);
  g.adv_g = ops::add(lsgan_generator_loss(n.discriminator_a(g.fake_b)),
                     lsgan_generator_loss(n.discriminator_b(g.fake_a)));
  const std::array<Tensor, 4> g_terms{g.cross, g.self_, g.grad, g.adv_g};
  const std::array<double, 4> g_weights{w.lambda1, w.lambda2, w.lambda3, w.lambda4};
  g.total_g = ops::weighted_sum(g_terms, g_weights);

  g.adv_d = ops::add(lsgan_discriminator_loss(n.discriminator_a(a), n.discriminator_a(g.fake_b.detach())),
                     lsgan_discriminator_loss(n.discriminator_b(b), n.discriminator_b(g.fake_a.detach())));
  g.total_d = ops::scale(g.adv_d, w.lambda4);
  return g;
}

LossReport train_step(const ImageTensor& a, const ImageTensor& b, TranslationState& s, const TrainingConfig& cfg) {
  const double lr = lr_schedule(s.epoch, cfg);
  const ParameterList gen = s.nets.generator_parameters();
  const ParameterList dis = s.nets.discriminator_parameters();
  zero_grad(gen);
  zero_grad(dis);

  const StepGraph g = build_step_graph(a, b, s.nets, cfg);
  check_finite(g.cross, "cross-reconstruction", s.iteration);
  check_finite(g.self_, "self-reconstruction", s.iteration);
  check_finite(g.grad, "gradient", s.iteration);
  check_finite(g.adv_g, "generator adversarial", s.iteration);
  check_finite(g.adv_d, "discriminator adversarial", s.iteration);

  backward(g.total_g);
  s.generator_optimizer.step(gen, lr);
  // Discriminator gradients picked up through L_G are discarded.
  zero_grad(dis);
  backward(g.total_d);
  s.discriminator_optimizer.step(dis, lr);
  zero_grad(gen);
  zero_grad(dis);

  s.global_stats_a = ema_update(s.global_stats_a, g.style_a.values(), cfg.d_rate);
  s.global_stats_b = ema_update(s.global_stats_b, g.style_b.values(), cfg.d_rate);
  ++s.stats_updates_a;
  ++s.stats_updates_b;
  ++s.iteration;

  if (!all_finite(gen) || !all_finite(dis)) {
    throw NumericalFailure("non-finite parameters after iteration " + std::to_string(s.iteration - 1));
  }

  return total_losses({g.cross.item(), g.self_.item(), g.grad.item(), g.adv_g.item(), g.adv_d.item()}, cfg.weights);
}

std::size_t iterations_per_epoch(std::size_t patches_a, std::size_t patches_b) {
  return std::min(patches_a, patches_b);
}

void train(std::span<const ImageTensor> dataset_a, std::span<const ImageTensor> dataset_b, TranslationState& s,
           const TrainingConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  if (dataset_a.empty() || dataset_b.empty()) throw InvalidInput("train: both datasets must be non-empty");
  const std::size_t per_epoch = iterations_per_epoch(dataset_a.size(), dataset_b.size());
  if (hooks.log && s.iteration == 0) write_loss_log_header(*hooks.log);
  while (s.epoch < cfg.num_epochs) {
    const double lr = lr_schedule(s.epoch, cfg);
    for (std::size_t it = 0; it < per_epoch; ++it) {
      std::vector<Tensor> batch_a, batch_b;
      for (int k = 0; k < cfg.patches_per_iteration; ++k) {
        const auto [pa, pb] = sample_pair(dataset_a, dataset_b, s.rng);
        batch_a.push_back(pa);
        batch_b.push_back(pb);
      }
      const Tensor a = batch_a.size() == 1 ? batch_a[0] : ops::concat_batch(batch_a);
      const Tensor b = batch_b.size() == 1 ? batch_b[0] : ops::concat_batch(batch_b);
      const std::int64_t iteration = s.iteration;
      const LossReport report = train_step(a, b, s, cfg);
      if (hooks.log) write_loss_log_line(*hooks.log, iteration, s.epoch, lr, report);
      if (hooks.on_step) hooks.on_step(s, report);
    }
    ++s.epoch;
    if (hooks.on_epoch_end) hooks.on_epoch_end(s);
  }
}

TranslationState train(std::span<const ImageTensor> dataset_a, std::span<const ImageTensor> dataset_b,
                       const TrainingConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  TranslationState s = make_translation_state(cfg.network, cfg.rng_seed, {cfg.adam_beta1, cfg.adam_beta2});
  train(dataset_a, dataset_b, s, cfg, hooks);
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const TranslationState& s, const TrainingConfig& cfg) {
  std::ostringstream rng;
  rng << s.rng;
  const json meta{{"format", "semi2i-translation"},
                  {"config", config_to_json(cfg)},
                  {"epoch", s.epoch},
                  {"iteration", s.iteration},
                  {"stats_updates_a", s.stats_updates_a},
                  {"stats_updates_b", s.stats_updates_b},
                  {"adam_steps_generator", s.generator_optimizer.steps()},
                  {"adam_steps_discriminator", s.discriminator_optimizer.steps()},
                  {"rng_state", rng.str()}};
  Archive ar;
  ar.metadata_json = meta.dump();
  const ParameterList gen = s.nets.generator_parameters();
  const ParameterList dis = s.nets.discriminator_parameters();
  for (const auto& p : concat(gen, dis)) ar.add(p.name, p.tensor);
  const Shape cs{static_cast<int>(s.global_stats_a.mu.size())};
  ar.add("global_stats_a/mu", Tensor(cs, s.global_stats_a.mu));
  ar.add("global_stats_a/sigma", Tensor(cs, s.global_stats_a.sigma));
  ar.add("global_stats_b/mu", Tensor(cs, s.global_stats_b.mu));
  ar.add("global_stats_b/sigma", Tensor(cs, s.global_stats_b.sigma));
  for (const auto& p : s.generator_optimizer.state(gen, "adam_generator/")) ar.add(p.name, p.tensor);
  for (const auto& p : s.discriminator_optimizer.state(dis, "adam_discriminator/")) ar.add(p.name, p.tensor);
  write_archive(path, ar);
}

TranslationCheckpoint load_checkpoint(const std::filesystem::path& path) {
  const Archive ar = read_archive(path);
  json meta;
  try {
    meta = json::parse(ar.metadata_json);
  } catch (const json::exception& e) {
    throw InvalidCheckpoint(std::string("corrupt checkpoint metadata: ") + e.what());
  }
  if (meta.value("format", "") != "semi2i-translation") {
    throw InvalidCheckpoint(path.string() + " is not a translation checkpoint");
  }
  TranslationCheckpoint ck;
  try {
    ck.config = config_from_json(meta.at("config"), TrainingConfig{});
  } catch (const InvalidConfig& e) {
    throw InvalidCheckpoint(std::string("checkpoint config: ") + e.what());
  }
  const TrainingConfig& cfg = ck.config;
  TranslationState& s = ck.state;
  s = make_translation_state(cfg.network, cfg.rng_seed, {cfg.adam_beta1, cfg.adam_beta2});
  const ParameterList gen = s.nets.generator_parameters();
  const ParameterList dis = s.nets.discriminator_parameters();
  load_parameters(ar, concat(gen, dis));
  auto stats = [&](const std::string& prefix) {
    ChannelStats st;
    const Tensor& mu = ar.get(prefix + "/mu");
    const Tensor& sigma = ar.get(prefix + "/sigma");
    st.mu.assign(mu.values().begin(), mu.values().end());
    st.sigma.assign(sigma.values().begin(), sigma.values().end());
    if (st.channels() != cfg.network.embedding_channels) {
      throw InvalidCheckpoint(prefix + " has the wrong channel count");
    }
    try {
      st.validate();
    } catch (const InvalidInput& e) {
      throw InvalidCheckpoint(prefix + ": " + e.what());
    }
    return st;
  };
  s.global_stats_a = stats("global_stats_a");
  s.global_stats_b = stats("global_stats_b");
  try {
    s.epoch = meta.at("epoch").get<int>();
    s.iteration = meta.at("iteration").get<std::int64_t>();
    s.stats_updates_a = meta.at("stats_updates_a").get<std::int64_t>();
    s.stats_updates_b = meta.at("stats_updates_b").get<std::int64_t>();
    ParameterList adam_entries;
    for (const auto& e : ar.entries) {
      if (e.name.starts_with("adam_")) adam_entries.push_back(e);
    }
    s.generator_optimizer.load_state(gen, adam_entries, "adam_generator/",
                                     meta.at("adam_steps_generator").get<std::int64_t>());
    s.discriminator_optimizer.load_state(dis, adam_entries, "adam_discriminator/",
                                         meta.at("adam_steps_discriminator").get<std::int64_t>());
    std::istringstream rng(meta.at("rng_state").get<std::string>());
    rng >> s.rng;
    if (!rng) throw InvalidCheckpoint("corrupt RNG state");
  } catch (const json::exception& e) {
    throw InvalidCheckpoint(std::string("incomplete checkpoint metadata: ") + e.what());
  }
  return ck;
}

ImageTensor generate_fake(const TranslationState& s, const ImageTensor& image, Domain target, double eps) {
  require_stats(s, target);
  NoGradGuard no_grad;
  return translate(image, s.encoder(other(target)), s.decoder(target), s.global_stats(target), eps);
}

RasterImage generate_fake_raster(const TranslationState& s, const TrainingConfig& cfg, const RasterImage& image,
                                 Domain target) {
  require_stats(s, target);
  if (image.range != ValueRange::kSigned) throw InvalidInput("generate_fake_raster: expected a [-1, 1] image");
  const int div = cfg.network.spatial_divisor();
  if (image.height <= cfg.patch_size && image.width <= cfg.patch_size && image.height % div == 0 &&
      image.width % div == 0) {
    return from_tensor(generate_fake(s, to_tensor(image), target, cfg.eps), ValueRange::kSigned);
  }
  ImagePatches tiles = extract_patches(image, cfg.patch_size, cfg.overlap);
  std::vector<RasterImage> fakes;
  fakes.reserve(tiles.patches.size());
  for (const auto& p : tiles.patches) {
    fakes.push_back(from_tensor(generate_fake(s, to_tensor(p), target, cfg.eps), ValueRange::kSigned));
  }
  return stitch_patches(fakes, tiles.grid, image.height, image.width);
}

std::vector<RasterImage> generate_fake_dataset(const TranslationCheckpoint& ck, std::span<const RasterImage> images,
                                               Domain target) {
  require_stats(ck.state, target);
  std::vector<RasterImage> out;
  out.reserve(images.size());
  for (const auto& img : images) {
    out.push_back(denormalize(generate_fake_raster(ck.state, ck.config, normalize(img), target)));
  }
  return out;
}

}  // namespace semi2i
