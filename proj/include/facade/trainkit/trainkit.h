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

#ifndef FACADE_TRAINKIT_TRAINKIT_H_
#define FACADE_TRAINKIT_TRAINKIT_H_

#include <torch/torch.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "facade/datakit/datakit.h"
#include "facade/evalkit/evalkit.h"
#include "facade/losses/losses.h"
#include "facade/maskmod/mask.h"
#include "facade/nets/nets.h"
#include "json.hpp"

namespace facade::trainkit {

enum class MaskMode { kNone, kSemantics, kDino };

MaskMode parse_mask_mode(const std::string& s);
std::string to_string(MaskMode m);

struct TrainConfig {
  nets::NetConfig net;  // image size lives here
  int batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.0;
  double beta2 = 0.99;
  std::int64_t steps = 5000;
  int k_views = 4;
  MaskMode mask_mode = MaskMode::kDino;
  losses::LossWeights weights;
  std::uint64_t seed = 0;
  std::int64_t checkpoint_every = 1000;
  std::int64_t eval_every = 0;  // 0 disables periodic validation
  double r1_weight = 1.0;
  int r1_interval = 4;  // lazy R1: every n-th D step, weight scaled by n
  double offset_range = 0.5;
  bool flip_augment = true;
  std::int64_t adversarial_warmup = 0;  // steps with lambda_3 = lambda_4 = 0
  std::string extractor;  // frozen ViT archive, required for kDino

  void validate() const;
  nlohmann::json to_json() const;
  // Missing keys keep their defaults; unknown keys are rejected.
  static TrainConfig from_json(const nlohmann::json& j);
};

// k offset copies of `view` with offsets ~ U[-range, range] per axis, none
// equal to the input (redrawn on collision).
std::vector<viewgeom::ViewVectorPair> sample_novel_views(const viewgeom::ViewVectorPair& view,
                                                         int k, std::mt19937_64& rng,
                                                         double range = 0.5);

struct Batch {
  torch::Tensor images;  // [B,3,H,W]
  std::vector<viewgeom::ViewVectorPair> views;
  std::vector<datakit::FacadeSample> samples;
};

Batch make_batch(const std::vector<datakit::FacadeSample>& samples);

// Supplies per-sample mask inputs for each mask mode.
class MaskSource {
 public:
  MaskSource(MaskMode mode, maskmod::VitKeyExtractor extractor);
  // [B,H,W] mask; attached to `blend` in dino mode.
  torch::Tensor masks(const Batch& batch, const torch::Tensor& blend_weights);
  // PCA channels ([4,h,w]) of one image, cached by image content.
  torch::Tensor components(const datakit::FacadeSample& sample);
  MaskMode mode() const { return mode_; }

 private:
  MaskMode mode_;
  maskmod::VitKeyExtractor extractor_{nullptr};
  std::map<std::string, torch::Tensor> cache_;
};

// Mean mask value inside annotated window/door regions vs on walls.
struct MaskQuality {
  double inside = 0.0;
  double outside = 0.0;
  double ratio() const { return outside > 0 ? inside / outside : 0.0; }
};
MaskQuality mask_quality(MaskSource& masks, const torch::Tensor& blend_weights,
                         const datakit::Dataset& data, std::size_t max_samples);

struct TrainState {
  nets::ModelBundle model;
  std::unique_ptr<torch::optim::Adam> opt_g;
  std::unique_ptr<torch::optim::Adam> opt_d;
  std::mt19937_64 rng;
  std::uint64_t epoch = 0;
  std::size_t cursor = 0;  // position inside the epoch order
  nlohmann::json best_val;
};

// Fresh state: model initialized from config.seed, optimizers empty.
TrainState init_state(const TrainConfig& config);

// Training checkpoint: the model archive plus optimizer moments, sampler
// position and RNG state. load_bundle() accepts it as a plain checkpoint.
TensorArchive state_to_archive(const TrainState& state, const TrainConfig& config);
TrainState state_from_archive(const TensorArchive& archive, const TrainConfig& config);
void save_state(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path);
TrainState load_state(const std::filesystem::path& path, const TrainConfig& config);

class Trainer {
 public:
  Trainer(TrainConfig config, std::shared_ptr<const datakit::Dataset> train);
  Trainer(TrainConfig config, std::shared_ptr<const datakit::Dataset> train, TrainState state);

  // One D update then one E/G(+blend) update. On a non-finite loss the state
  // is restored from the last snapshot and TrainingDivergence is rethrown.
  losses::LossReport step(const Batch& batch);
  // Draws the next batch from the training set (seeded epoch order, flips).
  Batch next_batch();
  losses::LossReport step();

  // Records the current state as the rollback target.
  void snapshot();
  const TensorArchive& last_snapshot() const { return snapshot_; }

  TrainState& state() { return state_; }
  const TrainConfig& config() const { return config_; }
  MaskSource& mask_source() { return *masks_; }

 private:
  losses::LossReport step_impl(const Batch& batch);

  TrainConfig config_;
  std::shared_ptr<const datakit::Dataset> train_;
  TrainState state_;
  std::unique_ptr<MaskSource> masks_;
  TensorArchive snapshot_;
  std::vector<std::size_t> order_;
  std::uint64_t order_epoch_ = ~std::uint64_t{0};
};

struct FitOptions {
  std::filesystem::path out_dir;  // checkpoints and log; empty keeps everything in memory
  std::shared_ptr<const datakit::Dataset> val;
  evalkit::EvalOptions eval;
  std::optional<std::filesystem::path> resume;
  const std::atomic<bool>* stop = nullptr;  // set asynchronously to request a clean exit
  std::function<void(std::int64_t, const losses::LossReport&)> on_step;
};

struct FitResult {
  nets::ModelBundle model;
  std::vector<nlohmann::json> log;
  bool interrupted = false;
  std::int64_t steps_done = 0;
};

// Runs until config.steps. Writes <out>/state.fckpt every checkpoint_every
// steps and on interruption, <out>/model.fckpt at the end, and one JSON
// record per step to <out>/train_log.jsonl.
FitResult fit(const TrainConfig& config, std::shared_ptr<const datakit::Dataset> train,
              const FitOptions& options);

}  // namespace facade::trainkit

#endif  // FACADE_TRAINKIT_TRAINKIT_H_
