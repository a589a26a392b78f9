/* Copyright 2026 The facadegen Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "facade/trainkit/trainkit.h"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "facade/common/codec.h"
#include "facade/common/errors.h"

namespace facade::trainkit {

namespace fs = std::filesystem;

MaskMode parse_mask_mode(const std::string& s) {
  if (s == "none") return MaskMode::kNone;
  if (s == "semantics") return MaskMode::kSemantics;
  if (s == "dino") return MaskMode::kDino;
  throw InvalidArgument("unknown mask mode '" + s + "' (expected none, semantics or dino)");
}

std::string to_string(MaskMode m) {
  switch (m) {
    case MaskMode::kNone: return "none";
    case MaskMode::kSemantics: return "semantics";
    case MaskMode::kDino: return "dino";
  }
  return "none";
}

// ---- config ----------------------------------------------------------------------

void TrainConfig::validate() const {
  net.validate();
  weights.validate();
  if (batch_size <= 0) throw InvalidArgument("batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidArgument("learning_rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw InvalidArgument("optimizer betas must lie in [0, 1)");
  }
  if (steps < 0) throw InvalidArgument("steps must be >= 0");
  if (k_views < 1) throw InvalidArgument("k_views must be >= 1");
  if (checkpoint_every < 0 || eval_every < 0) throw InvalidArgument("cadences must be >= 0");
  if (!(r1_weight >= 0.0)) throw InvalidArgument("r1_weight must be >= 0");
  if (r1_interval < 1) throw InvalidArgument("r1_interval must be >= 1");
  if (!(offset_range > 0.0 && offset_range <= 1.0)) {
    throw InvalidArgument("offset_range must lie in (0, 1]");
  }
  if (adversarial_warmup < 0) throw InvalidArgument("adversarial_warmup must be >= 0");
  if (mask_mode == MaskMode::kDino && extractor.empty()) {
    throw InvalidArgument("mask mode dino needs an extractor path");
  }
}

nlohmann::json TrainConfig::to_json() const {
  return {{"net", net.to_json()},
          {"batch_size", batch_size},
          {"learning_rate", learning_rate},
          {"betas", {beta1, beta2}},
          {"steps", steps},
          {"k_views", k_views},
          {"mask_mode", trainkit::to_string(mask_mode)},
          {"weights", weights.to_json()},
          {"seed", seed},
          {"checkpoint_every", checkpoint_every},
          {"eval_every", eval_every},
          {"r1_weight", r1_weight},
          {"r1_interval", r1_interval},
          {"offset_range", offset_range},
          {"flip_augment", flip_augment},
          {"adversarial_warmup", adversarial_warmup},
          {"extractor", extractor}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> kKeys = {
      "net",        "batch_size",       "learning_rate", "betas",       "steps",
      "k_views",    "mask_mode",        "weights",       "seed",        "checkpoint_every",
      "eval_every", "r1_weight",        "r1_interval",   "offset_range", "flip_augment",
      "adversarial_warmup", "extractor"};
  if (!j.is_object()) throw InvalidArgument("train config must be an object");
  for (const auto& [k, v] : j.items()) {
    if (!kKeys.count(k)) throw InvalidArgument("unknown train config key '" + k + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("net")) c.net = nets::NetConfig::from_json(j.at("net"));
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    if (j.contains("betas")) {
      const auto& b = j.at("betas");
      if (!b.is_array() || b.size() != 2) throw InvalidArgument("betas must be [b1, b2]");
      c.beta1 = b[0].get<double>();
      c.beta2 = b[1].get<double>();
    }
    c.steps = j.value("steps", c.steps);
    c.k_views = j.value("k_views", c.k_views);
    if (j.contains("mask_mode")) c.mask_mode = parse_mask_mode(j.at("mask_mode").get<std::string>());
    if (j.contains("weights")) c.weights = losses::LossWeights::from_json(j.at("weights"));
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.r1_weight = j.value("r1_weight", c.r1_weight);
    c.r1_interval = j.value("r1_interval", c.r1_interval);
    c.offset_range = j.value("offset_range", c.offset_range);
    c.flip_augment = j.value("flip_augment", c.flip_augment);
    c.adversarial_warmup = j.value("adversarial_warmup", c.adversarial_warmup);
    c.extractor = j.value("extractor", c.extractor);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---- sampling and batching ----------------------------------------------------------

std::vector<viewgeom::ViewVectorPair> sample_novel_views(const viewgeom::ViewVectorPair& view,
                                                         int k, std::mt19937_64& rng,
                                                         double range) {
  if (k < 1) throw InvalidArgument("sample_novel_views: k must be >= 1");
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<viewgeom::ViewVectorPair> out;
  out.reserve(static_cast<std::size_t>(k));
  while (static_cast<int>(out.size()) < k) {
    const double dh = u(rng), dv = u(rng);
    auto v = viewgeom::offset_view_vectors(view, dh, dv);
    if (v == view) continue;
    out.push_back(std::move(v));
  }
  return out;
}

Batch make_batch(const std::vector<datakit::FacadeSample>& samples) {
  if (samples.empty()) throw InvalidArgument("empty batch");
  Batch b;
  std::vector<torch::Tensor> imgs;
  for (const auto& s : samples) {
    imgs.push_back(s.image);
    b.views.push_back(s.view);
  }
  b.images = torch::stack(imgs);
  b.samples = samples;
  return b;
}

// ---- masks --------------------------------------------------------------------------

MaskSource::MaskSource(MaskMode mode, maskmod::VitKeyExtractor extractor)
    : mode_(mode), extractor_(std::move(extractor)) {
  if (mode_ == MaskMode::kDino && !extractor_) {
    throw InvalidArgument("mask mode dino needs a feature extractor");
  }
}

torch::Tensor MaskSource::components(const datakit::FacadeSample& sample) {
  auto img = sample.image.to(torch::kFloat32).contiguous();
  const std::string key = sha256_hex(std::string_view(
      static_cast<const char*>(img.data_ptr()), static_cast<std::size_t>(img.nbytes())));
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;
  torch::Tensor channels;
  const auto features = maskmod::extract_patch_features(extractor_, img);
  try {
    channels = maskmod::fit_pca(features).channels;
  } catch (const DegenerateInput&) {
    // Featureless image: no editable region.
    channels = torch::zeros({maskmod::kNumComponents, features.rows(), features.cols()});
  }
  cache_.emplace(key, channels);
  return channels;
}

torch::Tensor MaskSource::masks(const Batch& batch, const torch::Tensor& blend_weights) {
  const auto B = batch.images.size(0), H = batch.images.size(2), W = batch.images.size(3);
  switch (mode_) {
    case MaskMode::kNone:
      return torch::zeros({B, H, W});
    case MaskMode::kSemantics: {
      std::vector<torch::Tensor> m;
      for (const auto& s : batch.samples) {
        if (!s.labels.defined()) {
          throw InvalidArgument("mask mode semantics needs labelled samples (" + s.id + ")");
        }
        m.push_back(maskmod::semantic_mask(s.labels, {datakit::kWindow, datakit::kDoor},
                                           datakit::kNumLabels)
                        .m);
      }
      return torch::stack(m);
    }
    case MaskMode::kDino: {
      std::vector<torch::Tensor> c;
      for (const auto& s : batch.samples) c.push_back(components(s));
      return maskmod::blend_mask(torch::stack(c), {blend_weights}, static_cast<int>(H),
                                 static_cast<int>(W))
          .m;
    }
  }
  return {};
}

MaskQuality mask_quality(MaskSource& masks, const torch::Tensor& blend_weights,
                         const datakit::Dataset& data, std::size_t max_samples) {
  torch::NoGradGuard no_grad;
  double in_sum = 0.0, out_sum = 0.0, in_n = 0.0, out_n = 0.0;
  const std::size_t n = std::min(max_samples, data.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto s = data.get(i);
    const auto m = masks.masks(make_batch({s}), blend_weights)[0].to(torch::kFloat64);
    const auto w = datakit::window_mask(s).to(torch::kFloat64);
    in_sum += (m * w).sum().item<double>();
    out_sum += (m * (1.0 - w)).sum().item<double>();
    in_n += w.sum().item<double>();
    out_n += (1.0 - w).sum().item<double>();
  }
  MaskQuality q;
  q.inside = in_n > 0 ? in_sum / in_n : 0.0;
  q.outside = out_n > 0 ? out_sum / out_n : 0.0;
  return q;
}

// ---- state ------------------------------------------------------------------------

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(std::vector<torch::Tensor> params,
                                              const TrainConfig& c) {
  return std::make_unique<torch::optim::Adam>(
      std::move(params),
      torch::optim::AdamOptions(c.learning_rate).betas({c.beta1, c.beta2}));
}

void attach_optimizers(TrainState& s, const TrainConfig& c) {
  s.opt_g = make_adam(s.model.generator_side_parameters(), c);
  s.opt_d = make_adam(s.model.discriminator->parameters(), c);
}

std::string param_key(const char* group, std::size_t i, const char* field) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "optim.%s.%04zu.%s", group, i, field);
  return buf;
}

nlohmann::json save_adam(torch::optim::Adam& opt, const char* group, TensorArchive& a) {
  nlohmann::json steps = nlohmann::json::array();
  const auto& params = opt.param_groups().at(0).params();
  auto& state = opt.state();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto it = state.find(params[i].unsafeGetTensorImpl());
    if (it == state.end()) {
      steps.push_back(-1);
      continue;
    }
    auto& st = static_cast<torch::optim::AdamParamState&>(*it->second);
    steps.push_back(st.step());
    a.tensors.emplace(param_key(group, i, "exp_avg"), st.exp_avg().detach().clone());
    a.tensors.emplace(param_key(group, i, "exp_avg_sq"), st.exp_avg_sq().detach().clone());
  }
  return steps;
}

void load_adam(torch::optim::Adam& opt, const char* group, const nlohmann::json& steps,
               const TensorArchive& a) {
  const auto& params = opt.param_groups().at(0).params();
  if (steps.size() != params.size()) {
    throw CorruptArchive(std::string("optimizer state for '") + group +
                         "' does not match the parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto step = steps[i].get<std::int64_t>();
    if (step < 0) continue;
    auto find = [&](const char* field) {
      auto it = a.tensors.find(param_key(group, i, field));
      if (it == a.tensors.end()) throw CorruptArchive("missing " + param_key(group, i, field));
      return it->second.clone();
    };
    auto st = std::make_unique<torch::optim::AdamParamState>();
    st->step(step);
    st->exp_avg(find("exp_avg"));
    st->exp_avg_sq(find("exp_avg_sq"));
    opt.state()[params[i].unsafeGetTensorImpl()] = std::move(st);
  }
}

}  // namespace

TrainState init_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.model = nets::ModelBundle::create(config.net, config.seed);
  attach_optimizers(s, config);
  s.rng.seed(config.seed);
  return s;
}

TensorArchive state_to_archive(const TrainState& state, const TrainConfig& config) {
  auto a = nets::bundle_to_archive(state.model);
  std::ostringstream rng;
  rng << state.rng;
  nlohmann::json train = {{"config", config.to_json()},
                          {"epoch", state.epoch},
                          {"cursor", state.cursor},
                          {"rng", rng.str()},
                          {"best_val", state.best_val}};
  train["opt_g_steps"] = save_adam(*state.opt_g, "g", a);
  train["opt_d_steps"] = save_adam(*state.opt_d, "d", a);
  a.meta["train"] = train;
  return a;
}

TrainState state_from_archive(const TensorArchive& archive, const TrainConfig& config) {
  if (!archive.meta.contains("train")) {
    throw CorruptArchive("checkpoint has no training state (model-only archive)");
  }
  const auto& t = archive.meta.at("train");
  TrainState s;
  s.model = nets::bundle_from_archive(archive);
  if (s.model.config.to_json() != config.net.to_json()) {
    throw InvalidArgument("checkpoint architecture differs from the train config");
  }
  attach_optimizers(s, config);
  load_adam(*s.opt_g, "g", t.at("opt_g_steps"), archive);
  load_adam(*s.opt_d, "d", t.at("opt_d_steps"), archive);
  std::istringstream rng(t.at("rng").get<std::string>());
  rng >> s.rng;
  if (!rng) throw CorruptArchive("checkpoint RNG state is unreadable");
  s.epoch = t.at("epoch").get<std::uint64_t>();
  s.cursor = t.at("cursor").get<std::size_t>();
  s.best_val = t.value("best_val", nlohmann::json());
  return s;
}

void save_state(const TrainState& state, const TrainConfig& config, const fs::path& path) {
  write_archive(path, state_to_archive(state, config));
}

TrainState load_state(const fs::path& path, const TrainConfig& config) {
  return state_from_archive(read_archive(path), config);
}

// ---- trainer ------------------------------------------------------------------------

namespace {

maskmod::VitKeyExtractor extractor_for(const TrainConfig& c) {
  if (c.mask_mode != MaskMode::kDino) return nullptr;
  return maskmod::load_extractor(c.extractor);
}

// Turns discriminator gradients off for the generator update.
class FreezeGuard {
 public:
  explicit FreezeGuard(torch::nn::Module& m) : params_(m.parameters()) {
    for (auto& p : params_) p.requires_grad_(false);
  }
  ~FreezeGuard() {
    for (auto& p : params_) p.requires_grad_(true);
  }

 private:
  std::vector<torch::Tensor> params_;
};

void require_finite(const torch::Tensor& t, const char* what) {
  const double v = t.item<double>();
  if (!std::isfinite(v)) {
    throw TrainingDivergence(std::string("non-finite ") + what, std::string(what) + "=" +
                                                                   std::to_string(v));
  }
}

}  // namespace

Trainer::Trainer(TrainConfig config, std::shared_ptr<const datakit::Dataset> train)
    : Trainer(config, std::move(train), init_state(config)) {}

Trainer::Trainer(TrainConfig config, std::shared_ptr<const datakit::Dataset> train,
                 TrainState state)
    : config_(std::move(config)), train_(std::move(train)), state_(std::move(state)) {
  config_.validate();
  if (!train_ || train_->size() == 0) throw InvalidArgument("training set is empty");
  masks_ = std::make_unique<MaskSource>(config_.mask_mode, extractor_for(config_));
  snapshot();
}

void Trainer::snapshot() { snapshot_ = state_to_archive(state_, config_); }

Batch Trainer::next_batch() {
  const std::size_t n = train_->size();
  std::vector<datakit::FacadeSample> samples;
  for (int b = 0; b < config_.batch_size; ++b) {
    if (state_.cursor >= n) {
      ++state_.epoch;
      state_.cursor = 0;
    }
    if (order_epoch_ != state_.epoch) {
      order_ = datakit::epoch_order(n, config_.seed, state_.epoch);
      order_epoch_ = state_.epoch;
    }
    auto s = train_->get(order_[state_.cursor++]);
    if (config_.flip_augment && (state_.rng() & 1u)) s = datakit::flip_horizontal(s);
    samples.push_back(std::move(s));
  }
  return make_batch(samples);
}

losses::LossReport Trainer::step() { return step(next_batch()); }

losses::LossReport Trainer::step(const Batch& batch) {
  try {
    return step_impl(batch);
  } catch (const TrainingDivergence&) {
    state_ = state_from_archive(snapshot_, config_);
    order_epoch_ = ~std::uint64_t{0};
    throw;
  }
}

losses::LossReport Trainer::step_impl(const Batch& batch) {
  auto& m = state_.model;
  const int k = config_.k_views;
  const auto x = batch.images;
  const auto B = x.size(0);

  std::vector<viewgeom::ViewVectorPair> novel(static_cast<std::size_t>(B * k));
  for (int64_t b = 0; b < B; ++b) {
    auto views = sample_novel_views(batch.views[b], k, state_.rng, config_.offset_range);
    for (int i = 0; i < k; ++i) novel[static_cast<std::size_t>(i * B + b)] = std::move(views[i]);
  }
  const auto views_gt = nets::ViewBatch::from_pairs(batch.views);
  const auto views_nov = nets::ViewBatch::from_pairs(novel);

  // E and G are untouched by the D update, so one forward pass serves both
  // updates; D only ever sees detached copies.
  const auto z = nets::encode(m, x);
  const auto f_rec = nets::generate(m, z, views_gt);
  const auto f_nov = nets::generate(m, z.repeat({k, 1, 1, 1}), views_nov);

  losses::LossReport report;
  {
    const bool lazy_r1 = config_.r1_weight > 0.0 && m.step % config_.r1_interval == 0;
    auto real = lazy_r1 ? x.detach().requires_grad_(true) : x;
    auto real_logits = nets::discriminate(m, real, views_gt);
    auto fake_logits = nets::discriminate(m, torch::cat({f_rec, f_nov}).detach(),
                                          nets::ViewBatch::cat({views_gt, views_nov}));
    auto d_loss = losses::loss_discriminator(real_logits, fake_logits);
    auto r1 = lazy_r1 ? losses::r1_penalty(real_logits, real, config_.r1_weight * config_.r1_interval)
                      : torch::zeros({});
    auto total_d = d_loss + r1;
    require_finite(total_d, "discriminator loss");
    state_.opt_d->zero_grad();
    total_d.backward();
    state_.opt_d->step();
    report.disc = d_loss.item<double>();
    report.r1 = r1.item<double>();
  }

  FreezeGuard freeze(*m.discriminator);
  const auto mask = masks_->masks(batch, m.blend_weights);
  losses::LossParts parts;
  parts.rec = losses::loss_rec(x, f_rec);
  parts.edit = losses::loss_edit_multi(x, f_nov.chunk(k), mask, losses::EditNorm::kL1,
                                       &parts.edit_per_view);
  parts.gan_dep = losses::loss_gan_generator(nets::discriminate(m, f_nov, views_nov));
  parts.gan_cons = losses::loss_gan_generator(nets::discriminate(m, f_rec, views_gt));
  auto weights = config_.weights;
  if (m.step < config_.adversarial_warmup) weights.gan_dep = weights.gan_cons = 0.0;
  const double disc = report.disc, r1 = report.r1;
  auto total = losses::total_loss(parts, weights, &report);
  report.disc = disc;
  report.r1 = r1;
  state_.opt_g->zero_grad();
  total.backward();
  state_.opt_g->step();
  ++m.step;
  return report;
}

// ---- fit ------------------------------------------------------------------------------

FitResult fit(const TrainConfig& config, std::shared_ptr<const datakit::Dataset> train,
              const FitOptions& options) {
  config.validate();
  std::unique_ptr<Trainer> trainer =
      options.resume ? std::make_unique<Trainer>(config, train, load_state(*options.resume, config))
                     : std::make_unique<Trainer>(config, train);
  std::ofstream log;
  const bool persist = !options.out_dir.empty();
  if (persist) {
    fs::create_directories(options.out_dir);
    log.open(options.out_dir / "train_log.jsonl",
             options.resume ? std::ios::app : std::ios::trunc);
  }
  FitResult result;
  auto record = [&](nlohmann::json j) {
    if (persist) log << j.dump() << '\n' << std::flush;
    result.log.push_back(std::move(j));
  };
  auto checkpoint = [&] {
    trainer->snapshot();
    if (persist) write_file_atomic(options.out_dir / "state.fckpt",
                                   serialize_archive(trainer->last_snapshot()));
  };

  const auto start = std::chrono::steady_clock::now();
  auto& state = trainer->state();
  while (state.model.step < config.steps) {
    if (options.stop && options.stop->load()) {
      result.interrupted = true;
      break;
    }
    losses::LossReport report;
    try {
      report = trainer->step();
    } catch (const TrainingDivergence& e) {
      record({{"event", "divergence"}, {"step", state.model.step}, {"reason", e.what()},
              {"diagnostics", e.diagnostics()}});
      throw;
    }
    const auto step = state.model.step;
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    auto rec = report.to_json();
    rec["step"] = step;
    rec["elapsed_s"] = elapsed;
    record(std::move(rec));
    ++result.steps_done;
    if (options.on_step) options.on_step(step, report);
    if (config.checkpoint_every > 0 && step % config.checkpoint_every == 0) checkpoint();
    if (config.eval_every > 0 && options.val && step % config.eval_every == 0) {
      auto frozen = state.model.clone();
      const auto metrics = evalkit::evaluate(frozen, *options.val, options.eval).to_json();
      if (state.best_val.is_null() || metrics["psnr"] > state.best_val["psnr"]) {
        state.best_val = metrics;
      }
      record({{"event", "val"}, {"step", step}, {"metrics", metrics}});
    }
  }
  if (persist) {
    checkpoint();
    if (!result.interrupted) nets::save_bundle(state.model, options.out_dir / "model.fckpt");
  }
  result.model = state.model.clone();
  return result;
}

}  // namespace facade::trainkit
