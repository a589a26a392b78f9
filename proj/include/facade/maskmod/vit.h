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

#ifndef FACADE_MASKMOD_VIT_H_
#define FACADE_MASKMOD_VIT_H_

#include <torch/torch.h>

#include <filesystem>
#include <string>

#include "json.hpp"

namespace facade::maskmod {

struct VitConfig {
  int image_size = 32;  // size the position table was trained for
  int patch_size = 4;
  int embed_dim = 64;
  int depth = 4;
  int heads = 4;
  int mlp_ratio = 4;
  double ln_eps = 1e-6;

  nlohmann::json to_json() const;
  static VitConfig from_json(const nlohmann::json& j);
};

// Parameter names follow the common timm layout (patch_embed.proj.*,
// blocks.N.attn.qkv.*, ...) so external checkpoints convert by renaming
// nothing.
class VitBlockImpl : public torch::nn::Module {
 public:
  VitBlockImpl(int dim, int heads, int mlp_ratio, double ln_eps);

  torch::Tensor forward(const torch::Tensor& x);
  // Key projections of norm1(x), heads concatenated: [B, T, D].
  torch::Tensor keys(const torch::Tensor& x);

  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear qkv{nullptr}, proj{nullptr}, fc1{nullptr}, fc2{nullptr};

 private:
  int dim_;
  int heads_;
};
TORCH_MODULE(VitBlock);

class VitKeyExtractorImpl : public torch::nn::Module {
 public:
  explicit VitKeyExtractorImpl(const VitConfig& config);

  // images: [B,3,H,W] in [-1,1], H and W divisible by the patch size.
  // Returns the last block's attention keys of the patch tokens as
  // [B, H/p, W/p, D]. Runs without autograd.
  torch::Tensor forward(const torch::Tensor& images);

  const VitConfig& config() const { return config_; }

  torch::nn::Conv2d patch_proj{nullptr};
  torch::Tensor cls_token;
  torch::Tensor pos_embed;
  torch::nn::ModuleList blocks;

 private:
  torch::Tensor position_table(int grid_h, int grid_w);

  VitConfig config_;
};
TORCH_MODULE(VitKeyExtractor);

// Loads an extractor asset written by `save_extractor` (or converted from
// an external checkpoint). Throws AssetNotFound with instructions when the
// file does not exist, CorruptArchive on malformed content.
VitKeyExtractor load_extractor(const std::filesystem::path& path);
void save_extractor(const VitKeyExtractor& extractor, const std::filesystem::path& path);

// Deterministic, untrained extractor for desk-scale runs. Frozen after
// construction.
VitKeyExtractor make_seeded_extractor(const VitConfig& config, std::uint64_t seed);

}  // namespace facade::maskmod

#endif  // FACADE_MASKMOD_VIT_H_
