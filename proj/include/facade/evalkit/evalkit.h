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

#ifndef FACADE_EVALKIT_EVALKIT_H_
#define FACADE_EVALKIT_EVALKIT_H_

#include <torch/torch.h>

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "facade/datakit/datakit.h"
#include "facade/nets/nets.h"
#include "json.hpp"

namespace facade::evalkit {

inline constexpr double kPsnrCap = 99.0;

// Peak signal-to-noise ratio of two same-shape tensors in [0, 1]. Identical
// inputs report kPsnrCap.
double psnr(const torch::Tensor& a, const torch::Tensor& b);

// Mean local SSIM (11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03, data
// range 1, valid filtering). Inputs are [H,W], [C,H,W] or [B,C,H,W] in
// [0, 1]; three-channel inputs are converted to BT.601 luma first.
double ssim(const torch::Tensor& a, const torch::Tensor& b);

// [-1,1] network range to [0,1].
torch::Tensor to_unit(const torch::Tensor& x);

struct FidResult {
  double value = 0.0;
  bool regularized = false;  // a 1e-6 ridge was added to both covariances
};

// Frechet distance between Gaussians fitted to the rows of each matrix.
FidResult fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen);

// Frozen, seeded convolutional feature extractors. Weights are a function of
// the seed only, so metrics are deterministic.
class FeatureNet {
 public:
  virtual ~FeatureNet() = default;
  // Feature maps of each tapped layer for [B,3,H,W] inputs in [-1,1].
  virtual std::vector<torch::Tensor> taps(const torch::Tensor& images) = 0;
  // Whether each tap is unit-normalized over channels before differencing.
  virtual bool normalize() const { return true; }
};

std::unique_ptr<FeatureNet> make_alex_like(std::uint64_t seed);
std::unique_ptr<FeatureNet> make_vgg_like(std::uint64_t seed);
// Single tap equal to the input, no normalization.
std::unique_ptr<FeatureNet> make_identity_features();

// Sum over taps of the per-location squared L2 feature distance, averaged
// over locations; one value per batch element.
torch::Tensor perceptual_distance(FeatureNet& net, const torch::Tensor& a, const torch::Tensor& b);

// Pooled feature vectors ([B,D]) for FID.
Eigen::MatrixXd pooled_features(FeatureNet& net, const torch::Tensor& images);

struct InterpolationStrip {
  std::vector<torch::Tensor> frames;  // [3,H,W] each
  std::vector<double> offsets;
};

enum class Axis { kHorizontal, kVertical };

// Encodes once and generates `steps` frames at evenly spaced offsets in
// [-span, span] on one axis. `steps` must be odd so offset 0 is included;
// that frame is produced by the same call as a plain reconstruction.
InterpolationStrip interpolate(nets::ModelBundle& model, const torch::Tensor& f_ref,
                               const viewgeom::ViewVectorPair& view, Axis axis, int steps,
                               double span);

// Mean perceptual distance between consecutive frames over all strips.
double view_consistency(FeatureNet& net, const std::vector<InterpolationStrip>& strips);

// G(E(f_ref), theta_0) with theta_0 the all-zero view.
torch::Tensor improve_facade(nets::ModelBundle& model, const torch::Tensor& f_ref);

// 1 - mean |g - mirror(g)| over the mask and its mirror, g the [0,1] luma.
// 1 for a left/right symmetric image.
double symmetry_score(const torch::Tensor& image, const torch::Tensor& mask);

struct MetricsReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double fid_rec = 0.0;
  double fid_novel = 0.0;
  bool fid_regularized = false;
  double lpips_alex_like = 0.0;
  double lpips_vgg_like = 0.0;
  std::size_t num_images = 0;
  std::size_t num_strips = 0;

  nlohmann::json to_json() const;
};

struct EvalOptions {
  std::size_t max_samples = 64;
  int strip_steps = 5;
  double strip_span = 0.4;
  std::uint64_t extractor_seed = 1234;
  std::uint64_t seed = 0;  // novel-view offsets
  bool strips = true;
};

MetricsReport evaluate(nets::ModelBundle& model, const datakit::Dataset& data,
                       const EvalOptions& options);

// Conditioning effect: mean per-pixel |G(z, theta + d) - G(z, theta - d)|
// (horizontal axis) inside vs outside the given masks.
struct ConditioningEffect {
  double inside = 0.0;
  double outside = 0.0;
  double ratio() const { return outside > 0 ? inside / outside : 0.0; }
};
ConditioningEffect conditioning_effect(nets::ModelBundle& model, const datakit::Dataset& data,
                                       double delta, std::size_t max_samples);

}  // namespace facade::evalkit

#endif  // FACADE_EVALKIT_EVALKIT_H_
