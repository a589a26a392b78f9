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

#ifndef FACADE_NETS_NETS_H_
#define FACADE_NETS_NETS_H_

#include <torch/torch.h>

#include <cstdint>
#include <string>
#include <vector>

#include "facade/common/archive.h"
#include "facade/viewgeom/viewgeom.h"
#include "json.hpp"

namespace facade::nets {

// Architecture hyper-parameters. Immutable once a ModelBundle is built.
struct NetConfig {
  int image_size = 32;
  int downsample_stages = 2;  // latent is image_size / 2^stages
  int encoder_channels = 32;  // stem width, doubled per stage (capped at 4x)
  int latent_channels = 64;   // C_z
  int generator_channels = 64;  // width at latent resolution, shrinks per stage
  int min_generator_channels = 32;
  int discriminator_channels = 32;
  bool view_injection = true;  // ablation: false removes every view input to G

  int latent_size() const { return image_size >> downsample_stages; }
  void validate() const;
  nlohmann::json to_json() const;
  static NetConfig from_json(const nlohmann::json& j);
};

// A batch of view conditioning vectors.
struct ViewBatch {
  torch::Tensor theta_h;  // [B, W]
  torch::Tensor theta_v;  // [B, H]

  int64_t size() const { return theta_h.size(0); }
  static ViewBatch from_pairs(const std::vector<viewgeom::ViewVectorPair>& views);
  static ViewBatch from_pair(const viewgeom::ViewVectorPair& view);
  // Repeats every row `times` times, grouped: [v0..vB, v0..vB, ...].
  ViewBatch tiled(int64_t times) const;
  static ViewBatch cat(const std::vector<ViewBatch>& parts);
};

// [2,H,W] map: channel 0 repeats theta_h down the rows, channel 1 repeats
// theta_v across the columns. Vectors of other lengths are linearly
// resampled to the requested size first.
torch::Tensor build_view_map(const viewgeom::ViewVectorPair& view, int height, int width);
// Batched form, [B,2,H,W]; vector lengths must equal W and H.
torch::Tensor build_view_map(const ViewBatch& views);

class EncoderImpl : public torch::nn::Module {
 public:
  explicit EncoderImpl(const NetConfig& config);
  torch::Tensor forward(const torch::Tensor& images);

 private:
  NetConfig config_;
  torch::nn::Conv2d stem{nullptr};
  torch::nn::ModuleList stages;
  torch::nn::Conv2d to_latent{nullptr};
};
TORCH_MODULE(Encoder);

// StyleGAN2-style modulated convolution with weight demodulation, computed
// in the non-fused form (scale inputs, convolve, rescale outputs).
class ModulatedConvImpl : public torch::nn::Module {
 public:
  ModulatedConvImpl(int in_channels, int out_channels, int kernel, int style_dim);
  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& style);

 private:
  int padding_;
  torch::Tensor weight_;
  torch::Tensor bias_;
  torch::nn::Linear affine{nullptr};
};
TORCH_MODULE(ModulatedConv);

class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const NetConfig& config);
  // z: [B,C_z,h,w]; view_map: [B,2,H,W] at output resolution (ignored when
  // view injection is disabled). Output [B,3,H,W] in [-1,1].
  torch::Tensor forward(const torch::Tensor& z, const torch::Tensor& view_map);

 private:
  torch::Tensor with_view(const torch::Tensor& x, const torch::Tensor& view_map) const;

  NetConfig config_;
  ModulatedConv input_conv{nullptr};
  torch::nn::ModuleList up_convs;
  torch::nn::Conv2d to_rgb{nullptr};
};
TORCH_MODULE(Generator);

// Conditional patch discriminator over [image || view map].
class DiscriminatorImpl : public torch::nn::Module {
 public:
  explicit DiscriminatorImpl(const NetConfig& config);
  // Returns per-patch logits, [B, P].
  torch::Tensor forward(const torch::Tensor& images, const torch::Tensor& view_map);

 private:
  torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(Discriminator);

struct ModelBundle {
  NetConfig config;
  Encoder encoder{nullptr};
  Generator generator{nullptr};
  Discriminator discriminator{nullptr};
  torch::Tensor blend_weights;  // [4], trainable
  int64_t step = 0;

  static ModelBundle create(const NetConfig& config, std::uint64_t seed);
  // Deep copy with independent parameter storage.
  ModelBundle clone() const;
  // Parameters of E and G plus the blend weights (the generator side).
  std::vector<torch::Tensor> generator_side_parameters() const;
};

// Forward passes with shape validation. Single images ([3,H,W] / [C,h,w])
// are accepted and returned without the batch dimension.
torch::Tensor encode(ModelBundle& model, const torch::Tensor& images);
torch::Tensor generate(ModelBundle& model, const torch::Tensor& z, const ViewBatch& views);
torch::Tensor generate(ModelBundle& model, const torch::Tensor& z,
                       const viewgeom::ViewVectorPair& view);
torch::Tensor discriminate(ModelBundle& model, const torch::Tensor& images,
                           const ViewBatch& views);

// Checkpoint container (see common/archive.h): tensors under
// "encoder.", "generator.", "discriminator.", "blend.weights"; meta carries
// {"kind": "facade-checkpoint", "format_version", "config", "step"}.
inline constexpr int kCheckpointFormatVersion = 1;
TensorArchive bundle_to_archive(const ModelBundle& model);
ModelBundle bundle_from_archive(const TensorArchive& archive);
void save_bundle(const ModelBundle& model, const std::filesystem::path& path);
ModelBundle load_bundle(const std::filesystem::path& path);

// SHA-256 over every named parameter (name order) of the bundle.
std::string parameter_checksum(const ModelBundle& model);
bool all_parameters_finite(const ModelBundle& model);

}  // namespace facade::nets

#endif  // FACADE_NETS_NETS_H_
