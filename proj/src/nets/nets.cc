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

#include "facade/nets/nets.h"

#include <ATen/CPUGeneratorImpl.h>

#include <cmath>

#include "facade/common/codec.h"
#include "facade/common/errors.h"

namespace facade::nets {

namespace F = torch::nn::functional;
using viewgeom::ViewVectorPair;

namespace {

constexpr double kLeak = 0.2;

torch::Tensor lrelu(const torch::Tensor& x) {
  return F::leaky_relu(x, F::LeakyReLUFuncOptions().negative_slope(kLeak));
}

torch::nn::Conv2d conv(int in, int out, int k, int stride = 1, int pad = -1, bool bias = true) {
  return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, k)
                               .stride(stride)
                               .padding(pad < 0 ? k / 2 : pad)
                               .bias(bias));
}

torch::Tensor resize_map(const torch::Tensor& view_map, int64_t h, int64_t w) {
  if (view_map.size(2) == h && view_map.size(3) == w) return view_map;
  return F::adaptive_avg_pool2d(view_map, F::AdaptiveAvgPool2dFuncOptions({h, w}));
}

// Residual downsampling block of the structure encoder.
class ResDownImpl : public torch::nn::Module {
 public:
  ResDownImpl(int in, int out) {
    conv1 = register_module("conv1", conv(in, in, 3));
    conv2 = register_module("conv2", conv(in, out, 3));
    skip = register_module("skip", conv(in, out, 1, 1, 0, false));
  }
  torch::Tensor forward(const torch::Tensor& x) {
    auto h = lrelu(conv2->forward(lrelu(conv1->forward(x))));
    h = F::avg_pool2d(h, F::AvgPool2dFuncOptions(2));
    auto s = skip->forward(F::avg_pool2d(x, F::AvgPool2dFuncOptions(2)));
    return (h + s) * M_SQRT1_2;
  }

 private:
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, skip{nullptr};
};
TORCH_MODULE(ResDown);

void check_images(const torch::Tensor& images, int size, const char* what) {
  if (images.dim() != 4 || images.size(1) != 3 || images.size(2) != size ||
      images.size(3) != size) {
    throw InvalidArgument(std::string(what) + ": expected [B,3," + std::to_string(size) + "," +
                          std::to_string(size) + "] images, got " +
                          c10::str(images.sizes()));
  }
}

void check_views(const ViewBatch& views, int64_t batch, int size, const char* what) {
  if (!views.theta_h.defined() || !views.theta_v.defined() || views.theta_h.dim() != 2 ||
      views.theta_v.dim() != 2 || views.theta_h.size(1) != size ||
      views.theta_v.size(1) != size) {
    throw InvalidArgument(std::string(what) + ": view vectors must have length " +
                          std::to_string(size));
  }
  if (views.theta_h.size(0) != batch || views.theta_v.size(0) != batch) {
    throw InvalidArgument(std::string(what) + ": view batch does not match input batch");
  }
}

}  // namespace

void NetConfig::validate() const {
  if (image_size <= 0 || downsample_stages < 1 ||
      image_size % (1 << downsample_stages) != 0 || latent_size() < 4) {
    throw InvalidArgument("image_size must be divisible by 2^stages with latent >= 4");
  }
  if (encoder_channels <= 0 || latent_channels <= 0 || generator_channels <= 0 ||
      min_generator_channels <= 0 || discriminator_channels <= 0) {
    throw InvalidArgument("channel widths must be positive");
  }
}

nlohmann::json NetConfig::to_json() const {
  return {{"image_size", image_size},
          {"downsample_stages", downsample_stages},
          {"encoder_channels", encoder_channels},
          {"latent_channels", latent_channels},
          {"generator_channels", generator_channels},
          {"min_generator_channels", min_generator_channels},
          {"discriminator_channels", discriminator_channels},
          {"view_injection", view_injection}};
}

NetConfig NetConfig::from_json(const nlohmann::json& j) {
  NetConfig c;
  c.image_size = j.value("image_size", c.image_size);
  c.downsample_stages = j.value("downsample_stages", c.downsample_stages);
  c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
  c.latent_channels = j.value("latent_channels", c.latent_channels);
  c.generator_channels = j.value("generator_channels", c.generator_channels);
  c.min_generator_channels = j.value("min_generator_channels", c.min_generator_channels);
  c.discriminator_channels = j.value("discriminator_channels", c.discriminator_channels);
  c.view_injection = j.value("view_injection", c.view_injection);
  c.validate();
  return c;
}

ViewBatch ViewBatch::from_pairs(const std::vector<ViewVectorPair>& views) {
  if (views.empty()) throw InvalidArgument("empty view batch");
  const auto w = static_cast<int64_t>(views.front().theta_h.size());
  const auto h = static_cast<int64_t>(views.front().theta_v.size());
  auto th = torch::empty({static_cast<int64_t>(views.size()), w});
  auto tv = torch::empty({static_cast<int64_t>(views.size()), h});
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (static_cast<int64_t>(views[i].theta_h.size()) != w ||
        static_cast<int64_t>(views[i].theta_v.size()) != h) {
      throw InvalidArgument("view batch entries differ in length");
    }
    std::copy(views[i].theta_h.begin(), views[i].theta_h.end(), th[i].data_ptr<float>());
    std::copy(views[i].theta_v.begin(), views[i].theta_v.end(), tv[i].data_ptr<float>());
  }
  return {th, tv};
}

ViewBatch ViewBatch::from_pair(const ViewVectorPair& view) { return from_pairs({view}); }

ViewBatch ViewBatch::tiled(int64_t times) const {
  return {theta_h.repeat({times, 1}), theta_v.repeat({times, 1})};
}

ViewBatch ViewBatch::cat(const std::vector<ViewBatch>& parts) {
  std::vector<torch::Tensor> hs, vs;
  for (const auto& p : parts) {
    hs.push_back(p.theta_h);
    vs.push_back(p.theta_v);
  }
  return {torch::cat(hs, 0), torch::cat(vs, 0)};
}

torch::Tensor build_view_map(const ViewVectorPair& view, int height, int width) {
  ViewVectorPair v{viewgeom::resample_linear(view.theta_h, width),
                   viewgeom::resample_linear(view.theta_v, height)};
  return build_view_map(ViewBatch::from_pair(v)).squeeze(0);
}

torch::Tensor build_view_map(const ViewBatch& views) {
  const auto b = views.theta_h.size(0);
  const auto w = views.theta_h.size(1);
  const auto h = views.theta_v.size(1);
  auto ch0 = views.theta_h.view({b, 1, 1, w}).expand({b, 1, h, w});
  auto ch1 = views.theta_v.view({b, 1, h, 1}).expand({b, 1, h, w});
  return torch::cat({ch0, ch1}, 1);
}

EncoderImpl::EncoderImpl(const NetConfig& config) : config_(config) {
  config.validate();
  int ch = config.encoder_channels;
  stem = register_module("stem", conv(3, ch, 3));
  stages = register_module("stages", torch::nn::ModuleList());
  for (int i = 0; i < config.downsample_stages; ++i) {
    const int next = std::min(ch * 2, config.encoder_channels * 4);
    stages->push_back(ResDown(ch, next));
    ch = next;
  }
  to_latent = register_module("to_latent", conv(ch, config.latent_channels, 1, 1, 0));
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& images) {
  auto x = lrelu(stem->forward(images));
  for (auto& stage : *stages) x = stage->as<ResDown>()->forward(x);
  return to_latent->forward(x);
}

ModulatedConvImpl::ModulatedConvImpl(int in_channels, int out_channels, int kernel,
                                     int style_dim)
    : padding_(kernel / 2) {
  weight_ = register_parameter(
      "weight", torch::randn({out_channels, in_channels, kernel, kernel}) /
                    std::sqrt(static_cast<double>(in_channels * kernel * kernel)));
  bias_ = register_parameter("bias", torch::zeros({out_channels}));
  affine = register_module("affine", torch::nn::Linear(style_dim, in_channels));
  torch::NoGradGuard no_grad;
  affine->bias.fill_(1.0);
}

torch::Tensor ModulatedConvImpl::forward(const torch::Tensor& x, const torch::Tensor& style) {
  auto s = affine->forward(style);  // [B, in]
  auto y = F::conv2d(x * s.unsqueeze(-1).unsqueeze(-1), weight_,
                     F::Conv2dFuncOptions().padding(padding_));
  // Demodulation: 1 / ||W_o * s||_2 per sample and output channel.
  auto w2 = weight_.square().sum({2, 3});                 // [out, in]
  auto demod = torch::rsqrt(torch::matmul(s.square(), w2.t()) + 1e-8);  // [B, out]
  return y * demod.unsqueeze(-1).unsqueeze(-1) + bias_.view({1, -1, 1, 1});
}

GeneratorImpl::GeneratorImpl(const NetConfig& config) : config_(config) {
  config.validate();
  const int extra = config.view_injection ? 2 : 0;
  const int style = config.latent_channels;
  int ch = config.generator_channels;
  input_conv = register_module(
      "input_conv", ModulatedConv(config.latent_channels + extra, ch, 3, style));
  up_convs = register_module("up_convs", torch::nn::ModuleList());
  for (int i = 0; i < config.downsample_stages; ++i) {
    const int next = std::max(config.min_generator_channels, ch * 3 / 4);
    up_convs->push_back(ModulatedConv(ch + extra, next, 3, style));
    up_convs->push_back(ModulatedConv(next, next, 3, style));
    ch = next;
  }
  to_rgb = register_module("to_rgb", conv(ch, 3, 1, 1, 0));
}

torch::Tensor GeneratorImpl::with_view(const torch::Tensor& x,
                                       const torch::Tensor& view_map) const {
  if (!config_.view_injection) return x;
  return torch::cat({x, resize_map(view_map, x.size(2), x.size(3))}, 1);
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& z, const torch::Tensor& view_map) {
  auto style = z.mean({2, 3});
  auto x = lrelu(input_conv->forward(with_view(z, view_map), style));
  for (std::size_t i = 0; i < up_convs->size(); i += 2) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .scale_factor(std::vector<double>{2.0, 2.0})
                              .mode(torch::kBilinear)
                              .align_corners(false));
    x = lrelu(up_convs[i]->as<ModulatedConv>()->forward(with_view(x, view_map), style));
    x = lrelu(up_convs[i + 1]->as<ModulatedConv>()->forward(x, style));
  }
  return torch::tanh(to_rgb->forward(x));
}

DiscriminatorImpl::DiscriminatorImpl(const NetConfig& config) {
  config.validate();
  const int d = config.discriminator_channels;
  auto act = [] { return torch::nn::LeakyReLU(torch::nn::LeakyReLUOptions().negative_slope(kLeak)); };
  body = register_module(
      "body", torch::nn::Sequential(conv(5, d, 3), act(), conv(d, 2 * d, 4, 2, 1), act(),
                                    conv(2 * d, 4 * d, 4, 2, 1), act(), conv(4 * d, 1, 3)));
}

torch::Tensor DiscriminatorImpl::forward(const torch::Tensor& images,
                                         const torch::Tensor& view_map) {
  return body->forward(torch::cat({images, view_map}, 1)).flatten(1);
}

namespace {

ModelBundle construct(const NetConfig& config) {
  config.validate();
  ModelBundle b;
  b.config = config;
  b.encoder = Encoder(config);
  b.generator = Generator(config);
  b.discriminator = Discriminator(config);
  b.blend_weights = torch::zeros({4}, torch::TensorOptions().requires_grad(true));
  return b;
}

}  // namespace

ModelBundle ModelBundle::create(const NetConfig& config, std::uint64_t seed) {
  torch::manual_seed(seed);
  return construct(config);
}

ModelBundle ModelBundle::clone() const {
  return bundle_from_archive(bundle_to_archive(*this));
}

std::vector<torch::Tensor> ModelBundle::generator_side_parameters() const {
  auto params = encoder->parameters();
  auto g = generator->parameters();
  params.insert(params.end(), g.begin(), g.end());
  params.push_back(blend_weights);
  return params;
}

torch::Tensor encode(ModelBundle& model, const torch::Tensor& images) {
  const bool single = images.dim() == 3;
  auto x = single ? images.unsqueeze(0) : images;
  check_images(x, model.config.image_size, "encode");
  auto z = model.encoder->forward(x);
  return single ? z.squeeze(0) : z;
}

torch::Tensor generate(ModelBundle& model, const torch::Tensor& z, const ViewBatch& views) {
  const bool single = z.dim() == 3;
  auto zz = single ? z.unsqueeze(0) : z;
  const auto ls = model.config.latent_size();
  if (zz.dim() != 4 || zz.size(1) != model.config.latent_channels || zz.size(2) != ls ||
      zz.size(3) != ls) {
    throw InvalidArgument("generate: latent shape " + c10::str(zz.sizes()) +
                          " incompatible with config");
  }
  check_views(views, zz.size(0), model.config.image_size, "generate");
  auto out = model.generator->forward(zz, build_view_map(views));
  return single ? out.squeeze(0) : out;
}

torch::Tensor generate(ModelBundle& model, const torch::Tensor& z, const ViewVectorPair& view) {
  return generate(model, z, ViewBatch::from_pair(view));
}

torch::Tensor discriminate(ModelBundle& model, const torch::Tensor& images,
                           const ViewBatch& views) {
  auto x = images.dim() == 3 ? images.unsqueeze(0) : images;
  check_images(x, model.config.image_size, "discriminate");
  check_views(views, x.size(0), model.config.image_size, "discriminate");
  return model.discriminator->forward(x, build_view_map(views));
}

TensorArchive bundle_to_archive(const ModelBundle& model) {
  TensorArchive a;
  a.meta = {{"kind", "facade-checkpoint"},
            {"format_version", kCheckpointFormatVersion},
            {"config", model.config.to_json()},
            {"step", model.step}};
  auto add = [&a](const std::string& prefix, const torch::nn::Module& m) {
    for (const auto& p : m.named_parameters()) {
      a.tensors.emplace(prefix + p.key(), p.value().detach().clone());
    }
  };
  add("encoder.", *model.encoder);
  add("generator.", *model.generator);
  add("discriminator.", *model.discriminator);
  a.tensors.emplace("blend.weights", model.blend_weights.detach().clone());
  return a;
}

ModelBundle bundle_from_archive(const TensorArchive& archive) {
  if (archive.meta.value("kind", "") != "facade-checkpoint") {
    throw CorruptArchive("archive is not a model checkpoint");
  }
  const int version = archive.meta.value("format_version", 0);
  if (version != kCheckpointFormatVersion) {
    throw CorruptArchive("unsupported checkpoint format version " + std::to_string(version));
  }
  // Parameters are overwritten below; initialization draws from the global
  // generator, so preserve its state.
  auto gen = at::detail::getDefaultCPUGenerator();
  const auto rng_state = gen.get_state();
  auto b = construct(NetConfig::from_json(archive.meta.at("config")));
  gen.set_state(rng_state);
  b.step = archive.meta.value("step", int64_t{0});
  torch::NoGradGuard no_grad;
  auto load = [&archive](const std::string& prefix, torch::nn::Module& m) {
    for (auto& p : m.named_parameters()) {
      auto it = archive.tensors.find(prefix + p.key());
      if (it == archive.tensors.end()) {
        throw CorruptArchive("checkpoint missing tensor " + prefix + p.key());
      }
      if (it->second.sizes() != p.value().sizes()) {
        throw CorruptArchive("checkpoint tensor " + prefix + p.key() + " has wrong shape");
      }
      p.value().copy_(it->second);
    }
  };
  load("encoder.", *b.encoder);
  load("generator.", *b.generator);
  load("discriminator.", *b.discriminator);
  auto it = archive.tensors.find("blend.weights");
  if (it == archive.tensors.end()) throw CorruptArchive("checkpoint missing blend.weights");
  b.blend_weights.copy_(it->second);
  return b;
}

void save_bundle(const ModelBundle& model, const std::filesystem::path& path) {
  write_archive(path, bundle_to_archive(model));
}

ModelBundle load_bundle(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw NotFound("checkpoint not found: " + path.string());
  return bundle_from_archive(read_archive(path));
}

std::string parameter_checksum(const ModelBundle& model) {
  const auto a = bundle_to_archive(model);
  std::string bytes;
  for (const auto& [name, t] : a.tensors) {
    bytes += name;
    auto c = t.contiguous();
    bytes.append(static_cast<const char*>(c.data_ptr()), c.numel() * c.element_size());
  }
  return sha256_hex(bytes);
}

bool all_parameters_finite(const ModelBundle& model) {
  for (const auto& [name, t] : bundle_to_archive(model).tensors) {
    if (!torch::isfinite(t).all().item<bool>()) return false;
  }
  return true;
}

}  // namespace facade::nets
