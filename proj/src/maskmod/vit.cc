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

#include "facade/maskmod/vit.h"

#include <cmath>

#include "facade/common/archive.h"
#include "facade/common/errors.h"

namespace facade::maskmod {

namespace F = torch::nn::functional;

nlohmann::json VitConfig::to_json() const {
  return {{"image_size", image_size}, {"patch_size", patch_size},
          {"embed_dim", embed_dim},   {"depth", depth},
          {"heads", heads},           {"mlp_ratio", mlp_ratio},
          {"ln_eps", ln_eps}};
}

VitConfig VitConfig::from_json(const nlohmann::json& j) {
  VitConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.depth = j.value("depth", c.depth);
  c.heads = j.value("heads", c.heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.ln_eps = j.value("ln_eps", c.ln_eps);
  if (c.patch_size <= 0 || c.embed_dim <= 0 || c.depth <= 0 || c.heads <= 0 ||
      c.embed_dim % c.heads != 0 || c.image_size % c.patch_size != 0) {
    throw InvalidArgument("invalid ViT configuration " + j.dump());
  }
  return c;
}

VitBlockImpl::VitBlockImpl(int dim, int heads, int mlp_ratio, double ln_eps)
    : dim_(dim), heads_(heads) {
  norm1 = register_module("norm1", torch::nn::LayerNorm(
                                       torch::nn::LayerNormOptions({dim}).eps(ln_eps)));
  auto attn = register_module("attn", std::make_shared<torch::nn::Module>());
  qkv = attn->register_module("qkv", torch::nn::Linear(dim, 3 * dim));
  proj = attn->register_module("proj", torch::nn::Linear(dim, dim));
  norm2 = register_module("norm2", torch::nn::LayerNorm(
                                       torch::nn::LayerNormOptions({dim}).eps(ln_eps)));
  auto mlp = register_module("mlp", std::make_shared<torch::nn::Module>());
  fc1 = mlp->register_module("fc1", torch::nn::Linear(dim, mlp_ratio * dim));
  fc2 = mlp->register_module("fc2", torch::nn::Linear(mlp_ratio * dim, dim));
}

torch::Tensor VitBlockImpl::forward(const torch::Tensor& x) {
  const auto b = x.size(0), t = x.size(1);
  const auto hd = dim_ / heads_;
  auto qkv_out = qkv->forward(norm1->forward(x))
                     .reshape({b, t, 3, heads_, hd})
                     .permute({2, 0, 3, 1, 4});
  auto q = qkv_out[0], k = qkv_out[1], v = qkv_out[2];
  auto attn = torch::softmax(torch::matmul(q, k.transpose(-2, -1)) / std::sqrt(double(hd)), -1);
  auto y = torch::matmul(attn, v).transpose(1, 2).reshape({b, t, dim_});
  auto h = x + proj->forward(y);
  return h + fc2->forward(F::gelu(fc1->forward(norm2->forward(h))));
}

torch::Tensor VitBlockImpl::keys(const torch::Tensor& x) {
  return qkv->forward(norm1->forward(x)).narrow(-1, dim_, dim_);
}

VitKeyExtractorImpl::VitKeyExtractorImpl(const VitConfig& config) : config_(config) {
  const int d = config.embed_dim;
  const int grid = config.image_size / config.patch_size;
  auto patch_embed = register_module("patch_embed", std::make_shared<torch::nn::Module>());
  patch_proj = patch_embed->register_module(
      "proj", torch::nn::Conv2d(
                  torch::nn::Conv2dOptions(3, d, config.patch_size).stride(config.patch_size)));
  cls_token = register_parameter("cls_token", torch::zeros({1, 1, d}));
  pos_embed = register_parameter("pos_embed", torch::zeros({1, 1 + grid * grid, d}));
  blocks = register_module("blocks", torch::nn::ModuleList());
  for (int i = 0; i < config.depth; ++i) {
    blocks->push_back(VitBlock(d, config.heads, config.mlp_ratio, config.ln_eps));
  }
}

torch::Tensor VitKeyExtractorImpl::position_table(int grid_h, int grid_w) {
  const int trained = config_.image_size / config_.patch_size;
  if (grid_h == trained && grid_w == trained) return pos_embed;
  // Bicubic interpolation of the patch part of the table, as DINO does for
  // off-size inputs.
  auto cls = pos_embed.narrow(1, 0, 1);
  auto patches = pos_embed.narrow(1, 1, trained * trained)
                     .reshape({1, trained, trained, config_.embed_dim})
                     .permute({0, 3, 1, 2});
  patches = F::interpolate(patches, F::InterpolateFuncOptions()
                                        .size(std::vector<int64_t>{grid_h, grid_w})
                                        .mode(torch::kBicubic)
                                        .align_corners(false));
  patches = patches.permute({0, 2, 3, 1}).reshape({1, grid_h * grid_w, config_.embed_dim});
  return torch::cat({cls, patches}, 1);
}

torch::Tensor VitKeyExtractorImpl::forward(const torch::Tensor& images) {
  torch::NoGradGuard no_grad;
  if (images.dim() != 4 || images.size(1) != 3) {
    throw InvalidArgument("extractor expects [B,3,H,W] images");
  }
  const auto h = images.size(2), w = images.size(3);
  const int p = config_.patch_size;
  if (h % p != 0 || w % p != 0) {
    throw InvalidArgument("image size " + std::to_string(h) + "x" + std::to_string(w) +
                          " not divisible by patch size " + std::to_string(p) +
                          "; resize first");
  }
  // [-1,1] -> ImageNet-normalized input, the convention self-supervised
  // checkpoints are trained with.
  static const auto mean = torch::tensor({0.485f, 0.456f, 0.406f}).view({1, 3, 1, 1});
  static const auto stdv = torch::tensor({0.229f, 0.224f, 0.225f}).view({1, 3, 1, 1});
  auto x = ((images.to(torch::kFloat32) + 1.0) * 0.5 - mean) / stdv;
  x = patch_proj->forward(x);  // [B,D,gh,gw]
  const auto gh = x.size(2), gw = x.size(3);
  x = x.flatten(2).transpose(1, 2);
  x = torch::cat({cls_token.expand({x.size(0), 1, config_.embed_dim}), x}, 1);
  x = x + position_table(static_cast<int>(gh), static_cast<int>(gw));
  const auto n = blocks->size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    x = blocks[i]->as<VitBlock>()->forward(x);
  }
  auto k = blocks[n - 1]->as<VitBlock>()->keys(x);
  return k.narrow(1, 1, gh * gw).reshape({x.size(0), gh, gw, config_.embed_dim}).contiguous();
}

VitKeyExtractor load_extractor(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw AssetNotFound(
        "feature extractor weights not found at '" + path.string() +
        "'. Create the desk-scale extractor with `facadectl mask make-extractor --out " +
        path.string() +
        "`, or convert a pretrained self-supervised ViT (e.g. DINO ViT-S/8) with "
        "`python3 tools/convert_vit_checkpoint.py --out " + path.string() + "`.");
  }
  auto archive = read_archive(path);
  if (archive.meta.value("kind", "") != "vit-keys") {
    throw CorruptArchive(path.string() + " is not a ViT extractor archive");
  }
  VitKeyExtractor vit(VitConfig::from_json(archive.meta.at("config")));
  torch::NoGradGuard no_grad;
  for (auto& item : vit->named_parameters()) {
    auto it = archive.tensors.find(item.key());
    if (it == archive.tensors.end()) {
      throw CorruptArchive("extractor archive missing tensor " + item.key());
    }
    if (it->second.sizes() != item.value().sizes()) {
      throw CorruptArchive("extractor tensor " + item.key() + " has wrong shape");
    }
    item.value().copy_(it->second);
  }
  vit->eval();
  for (auto& p : vit->parameters()) p.set_requires_grad(false);
  return vit;
}

void save_extractor(const VitKeyExtractor& extractor, const std::filesystem::path& path) {
  TensorArchive archive;
  archive.meta = {{"kind", "vit-keys"}, {"config", extractor->config().to_json()}};
  for (const auto& item : extractor->named_parameters()) {
    archive.tensors.emplace(item.key(), item.value().detach().clone());
  }
  write_archive(path, archive);
}

VitKeyExtractor make_seeded_extractor(const VitConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  VitKeyExtractor vit(config);
  {
    torch::NoGradGuard no_grad;
    vit->cls_token.normal_(0.0, 0.02);
    vit->pos_embed.normal_(0.0, 0.02);
  }
  vit->eval();
  for (auto& p : vit->parameters()) p.set_requires_grad(false);
  return vit;
}

}  // namespace facade::maskmod
