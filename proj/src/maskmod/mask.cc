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

#include "facade/maskmod/mask.h"

#include <algorithm>
#include <cmath>

#include "facade/common/errors.h"

namespace facade::maskmod {

namespace F = torch::nn::functional;

namespace {

// Relative eigenvalue floor below which a direction is treated as absent.
constexpr double kRankTolerance = 1e-10;

Eigen::MatrixXd to_matrix(const PatchFeatures& f) {
  auto flat = f.grid.reshape({-1, f.grid.size(2)}).to(torch::kFloat64).contiguous();
  // `flat` is row-major; Eigen default is column-major.
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data_ptr<double>(), flat.size(0), flat.size(1));
}

torch::Tensor scaled_projections(const Eigen::MatrixXd& samples, const PcaBasis& b, int rows,
                                 int cols) {
  Eigen::MatrixXd proj = (samples.rowwise() - b.mean.transpose()) * b.basis.transpose();
  auto out = torch::empty({kNumComponents, rows, cols}, torch::kFloat32);
  auto acc = out.accessor<float, 3>();
  for (int k = 0; k < kNumComponents; ++k) {
    const double lo = proj.col(k).minCoeff();
    const double hi = proj.col(k).maxCoeff();
    const double span = hi - lo;
    for (int i = 0; i < rows * cols; ++i) {
      const double v = span > 0.0 ? (proj(i, k) - lo) / span : 0.0;
      acc[k][i / cols][i % cols] = static_cast<float>(v);
    }
  }
  return out;
}

}  // namespace

BlendWeights BlendWeights::zeros(bool requires_grad) {
  return {torch::zeros({kNumComponents}, torch::TensorOptions().requires_grad(requires_grad))};
}

PatchFeatures extract_patch_features(VitKeyExtractor& extractor, const torch::Tensor& image) {
  if (image.dim() != 3) throw InvalidArgument("extract_patch_features expects [3,H,W]");
  auto grid = extractor->forward(image.unsqueeze(0)).squeeze(0);
  return {grid, extractor->config().patch_size};
}

PcaBasis pca_basis(const Eigen::MatrixXd& samples, int k) {
  const auto n = samples.rows();
  const auto d = samples.cols();
  if (n < k || d < k) {
    throw DegenerateInput("PCA needs at least " + std::to_string(k) + " samples and dims, got " +
                          std::to_string(n) + "x" + std::to_string(d));
  }
  PcaBasis out;
  out.mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw DegenerateInput("PCA eigendecomposition failed");
  // Eigen returns ascending order.
  out.eigenvalues = eig.eigenvalues().reverse();
  const double top = out.eigenvalues(0);
  if (!(top > 0.0) || out.eigenvalues(k - 1) <= kRankTolerance * top) {
    throw DegenerateInput("feature matrix has rank < " + std::to_string(k));
  }
  out.basis.resize(k, d);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - i);
    const Eigen::VectorXd p = centered * v;
    const double m2 = p.array().square().mean();
    const double m3 = p.array().cube().mean();
    const double skew = m3 / std::pow(m2, 1.5);
    bool flip = skew < 0.0;
    if (std::abs(skew) < 1e-9) {
      Eigen::Index idx;
      v.cwiseAbs().maxCoeff(&idx);
      flip = v(idx) < 0.0;
    }
    out.basis.row(i) = (flip ? -v : v).transpose();
  }
  return out;
}

PrincipalComponents fit_pca(const PatchFeatures& features) {
  const auto samples = to_matrix(features);
  auto b = pca_basis(samples, kNumComponents);
  PrincipalComponents out;
  out.channels = scaled_projections(samples, b, features.rows(), features.cols());
  out.basis = std::move(b.basis);
  out.mean = std::move(b.mean);
  out.eigenvalues = std::move(b.eigenvalues);
  return out;
}

PcaBasis fit_pca_corpus(const std::vector<PatchFeatures>& features) {
  if (features.empty()) throw DegenerateInput("corpus PCA needs at least one image");
  Eigen::Index total = 0;
  for (const auto& f : features) total += static_cast<Eigen::Index>(f.rows()) * f.cols();
  Eigen::MatrixXd all(total, features.front().dim());
  Eigen::Index row = 0;
  for (const auto& f : features) {
    auto m = to_matrix(f);
    all.middleRows(row, m.rows()) = m;
    row += m.rows();
  }
  return pca_basis(all, kNumComponents);
}

PrincipalComponents project_pca(const PatchFeatures& features, const PcaBasis& basis) {
  const auto samples = to_matrix(features);
  PrincipalComponents out;
  out.channels = scaled_projections(samples, basis, features.rows(), features.cols());
  out.basis = basis.basis;
  out.mean = basis.mean;
  out.eigenvalues = basis.eigenvalues;
  return out;
}

EditMask blend_mask(const torch::Tensor& channels, const BlendWeights& weights, int out_h,
                    int out_w) {
  const bool batched = channels.dim() == 4;
  if (!(batched || channels.dim() == 3) || channels.size(batched ? 1 : 0) != kNumComponents) {
    throw InvalidArgument("blend_mask expects [4,h,w] or [B,4,h,w] components");
  }
  auto v = batched ? channels : channels.unsqueeze(0);
  auto s = torch::sigmoid(weights.w.to(v.scalar_type()));
  auto m = (v * s.view({1, kNumComponents, 1, 1})).sum(1, /*keepdim=*/true) / s.sum();
  if (m.size(2) != out_h || m.size(3) != out_w) {
    m = F::interpolate(m, F::InterpolateFuncOptions()
                              .size(std::vector<int64_t>{out_h, out_w})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  m = m.clamp(0.0, 1.0).squeeze(1);
  return {batched ? m : m.squeeze(0)};
}

EditMask semantic_mask(const torch::Tensor& labels, const std::set<int>& editable,
                       int num_classes) {
  auto l = labels.to(torch::kInt64);
  if (l.numel() > 0 && (l.min().item<int64_t>() < 0 || l.max().item<int64_t>() >= num_classes)) {
    throw InvalidArgument("label map contains class ids outside [0, " +
                          std::to_string(num_classes) + ")");
  }
  for (int c : editable) {
    if (c < 0 || c >= num_classes) {
      throw InvalidArgument("unknown editable class id " + std::to_string(c));
    }
  }
  auto m = torch::zeros(l.sizes(), torch::kFloat32);
  for (int c : editable) m.masked_fill_(l == c, 1.0f);
  return {m};
}

}  // namespace facade::maskmod
