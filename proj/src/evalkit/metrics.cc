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

#include <ATen/CPUGeneratorImpl.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "facade/common/errors.h"
#include "facade/evalkit/evalkit.h"

namespace facade::evalkit {

namespace F = torch::nn::functional;

torch::Tensor to_unit(const torch::Tensor& x) { return (x + 1.0) * 0.5; }

double psnr(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) {
    throw InvalidArgument("psnr: shape mismatch " + c10::str(a.sizes()) + " vs " +
                          c10::str(b.sizes()));
  }
  const double mse = (a.to(torch::kFloat64) - b.to(torch::kFloat64)).square().mean().item<double>();
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

torch::Tensor as_gray_maps(const torch::Tensor& x) {
  auto t = x.to(torch::kFloat64);
  if (t.dim() == 2) return t.unsqueeze(0).unsqueeze(0);
  if (t.dim() == 3) t = t.unsqueeze(0);
  if (t.dim() != 4) throw InvalidArgument("ssim: expected [H,W], [C,H,W] or [B,C,H,W]");
  if (t.size(1) == 3) {
    return (0.299 * t.select(1, 0) + 0.587 * t.select(1, 1) + 0.114 * t.select(1, 2))
        .unsqueeze(1);
  }
  if (t.size(1) != 1) throw InvalidArgument("ssim: expected 1 or 3 channels");
  return t;
}

torch::Tensor gaussian_window(int size, double sigma) {
  auto x = torch::arange(size, torch::kFloat64) - (size - 1) / 2.0;
  auto g = torch::exp(-x.square() / (2.0 * sigma * sigma));
  g = g / g.sum();
  return torch::outer(g, g).view({1, 1, size, size});
}

}  // namespace

double ssim(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw InvalidArgument("ssim: shape mismatch");
  constexpr int kWin = 11;
  constexpr double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  auto x = as_gray_maps(a), y = as_gray_maps(b);
  if (x.size(2) < kWin || x.size(3) < kWin) {
    throw InvalidArgument("ssim: images smaller than the 11x11 window");
  }
  const auto w = gaussian_window(kWin, 1.5);
  auto filt = [&w](const torch::Tensor& t) { return F::conv2d(t, w); };
  auto mx = filt(x), my = filt(y);
  auto sxx = filt(x * x) - mx * mx;
  auto syy = filt(y * y) - my * my;
  auto sxy = filt(x * y) - mx * my;
  auto map = ((2 * mx * my + C1) * (2 * sxy + C2)) /
             ((mx * mx + my * my + C1) * (sxx + syy + C2));
  return map.mean().item<double>();
}

FidResult fid(const Eigen::MatrixXd& real, const Eigen::MatrixXd& gen) {
  if (real.rows() < 2 || gen.rows() < 2) throw InvalidArgument("fid: need >= 2 samples per side");
  if (real.cols() != gen.cols()) throw InvalidArgument("fid: feature dimensions differ");
  auto stats = [](const Eigen::MatrixXd& x, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = x.colwise().mean().transpose();
    const Eigen::MatrixXd c = x.rowwise() - mu.transpose();
    cov = (c.transpose() * c) / static_cast<double>(x.rows() - 1);
  };
  Eigen::VectorXd mu1, mu2;
  Eigen::MatrixXd s1, s2;
  stats(real, mu1, s1);
  stats(gen, mu2, s2);

  FidResult r;
  auto singular = [](const Eigen::MatrixXd& s) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
    const double hi = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    return es.eigenvalues().minCoeff() <= 1e-10 * hi;
  };
  if (singular(s1) || singular(s2)) {
    const auto ridge = 1e-6 * Eigen::MatrixXd::Identity(s1.rows(), s1.cols());
    s1 += ridge;
    s2 += ridge;
    r.regularized = true;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> e1(s1);
  const Eigen::VectorXd l1 = e1.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd s1h = e1.eigenvectors() * l1.asDiagonal() * e1.eigenvectors().transpose();
  Eigen::MatrixXd m = s1h * s2 * s1h;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
  const double tr_sqrt = em.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  const double value = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  r.value = std::max(0.0, value);
  return r;
}

// ---- feature extractors --------------------------------------------------------

namespace {

struct ConvLayer {
  torch::Tensor weight, bias;
  int stride = 1;
  int padding = 1;
  bool pool_before = false;
  bool tap = false;
};

class ConvFeatureNet : public FeatureNet {
 public:
  struct LayerSpec {
    int in, out, kernel, stride;
    bool pool_before, tap;
  };

  ConvFeatureNet(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
    auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
    for (const auto& s : specs) {
      ConvLayer l;
      const double fan_in = static_cast<double>(s.in) * s.kernel * s.kernel;
      l.weight = at::randn({s.out, s.in, s.kernel, s.kernel}, gen, torch::kFloat32) *
                 std::sqrt(2.0 / fan_in);
      l.bias = torch::zeros({s.out});
      l.stride = s.stride;
      l.padding = s.kernel / 2;
      l.pool_before = s.pool_before;
      l.tap = s.tap;
      layers_.push_back(std::move(l));
    }
  }

  std::vector<torch::Tensor> taps(const torch::Tensor& images) override {
    torch::NoGradGuard no_grad;
    std::vector<torch::Tensor> out;
    auto x = images.to(torch::kFloat32);
    for (const auto& l : layers_) {
      if (l.pool_before) x = F::avg_pool2d(x, F::AvgPool2dFuncOptions(2));
      x = torch::relu(F::conv2d(
          x, l.weight, F::Conv2dFuncOptions().bias(l.bias).stride(l.stride).padding(l.padding)));
      if (l.tap) out.push_back(x);
    }
    return out;
  }

 private:
  std::vector<ConvLayer> layers_;
};

class IdentityFeatureNet : public FeatureNet {
 public:
  std::vector<torch::Tensor> taps(const torch::Tensor& images) override { return {images}; }
  bool normalize() const override { return false; }
};

}  // namespace

std::unique_ptr<FeatureNet> make_alex_like(std::uint64_t seed) {
  return std::make_unique<ConvFeatureNet>(
      std::vector<ConvFeatureNet::LayerSpec>{{3, 32, 5, 2, false, true},
                                             {32, 64, 3, 2, false, true},
                                             {64, 96, 3, 1, false, true}},
      seed);
}

std::unique_ptr<FeatureNet> make_vgg_like(std::uint64_t seed) {
  return std::make_unique<ConvFeatureNet>(
      std::vector<ConvFeatureNet::LayerSpec>{{3, 16, 3, 1, false, false},
                                             {16, 16, 3, 1, false, true},
                                             {16, 32, 3, 1, true, false},
                                             {32, 32, 3, 1, false, true},
                                             {32, 64, 3, 1, true, true}},
      seed + 1);
}

std::unique_ptr<FeatureNet> make_identity_features() {
  return std::make_unique<IdentityFeatureNet>();
}

torch::Tensor perceptual_distance(FeatureNet& net, const torch::Tensor& a, const torch::Tensor& b) {
  if (a.sizes() != b.sizes()) throw InvalidArgument("perceptual_distance: shape mismatch");
  auto fa = net.taps(a), fb = net.taps(b);
  torch::Tensor total = torch::zeros({a.size(0)}, torch::kFloat64);
  for (std::size_t i = 0; i < fa.size(); ++i) {
    auto x = fa[i].to(torch::kFloat64), y = fb[i].to(torch::kFloat64);
    if (net.normalize()) {
      x = x / (x.square().sum(1, true).sqrt() + 1e-10);
      y = y / (y.square().sum(1, true).sqrt() + 1e-10);
    }
    total = total + (x - y).square().sum(1).mean({1, 2});
  }
  return total;
}

Eigen::MatrixXd pooled_features(FeatureNet& net, const torch::Tensor& images) {
  std::vector<torch::Tensor> pooled;
  for (const auto& t : net.taps(images)) pooled.push_back(t.mean({2, 3}));
  auto f = torch::cat(pooled, 1).to(torch::kFloat64).contiguous();
  Eigen::MatrixXd m(f.size(0), f.size(1));
  auto acc = f.accessor<double, 2>();
  for (int64_t i = 0; i < f.size(0); ++i) {
    for (int64_t j = 0; j < f.size(1); ++j) m(i, j) = acc[i][j];
  }
  return m;
}

double view_consistency(FeatureNet& net, const std::vector<InterpolationStrip>& strips) {
  double sum = 0.0;
  std::size_t pairs = 0;
  for (const auto& s : strips) {
    if (s.frames.size() < 2) throw InvalidArgument("view_consistency: strip needs >= 2 frames");
    auto frames = torch::stack(s.frames);
    const auto n = frames.size(0);
    auto d = perceptual_distance(net, frames.slice(0, 0, n - 1), frames.slice(0, 1, n));
    sum += d.sum().item<double>();
    pairs += static_cast<std::size_t>(n - 1);
  }
  return pairs ? sum / static_cast<double>(pairs) : 0.0;
}

double symmetry_score(const torch::Tensor& image, const torch::Tensor& mask) {
  if (image.dim() != 3 || image.size(0) != 3) throw InvalidArgument("symmetry_score: expected [3,H,W]");
  if (mask.dim() != 2 || mask.size(0) != image.size(1) || mask.size(1) != image.size(2)) {
    throw InvalidArgument("symmetry_score: mask does not match image");
  }
  auto g = as_gray_maps(to_unit(image)).squeeze(0).squeeze(0);
  auto m = (mask.to(torch::kFloat64) + mask.to(torch::kFloat64).flip({-1})).clamp_max(1.0);
  const double area = m.sum().item<double>();
  if (area <= 0.0) throw InvalidArgument("symmetry_score: empty mask");
  const double diff = ((g - g.flip({-1})).abs() * m).sum().item<double>() / area;
  return 1.0 - diff;
}

}  // namespace facade::evalkit
