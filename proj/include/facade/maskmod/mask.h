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

#ifndef FACADE_MASKMOD_MASK_H_
#define FACADE_MASKMOD_MASK_H_

#include <torch/torch.h>

#include <Eigen/Dense>
#include <set>
#include <vector>

#include "facade/maskmod/vit.h"

namespace facade::maskmod {

inline constexpr int kNumComponents = 4;

// Per-patch embeddings of one image.
struct PatchFeatures {
  torch::Tensor grid;  // [h_p, w_p, D], float32
  int patch_size = 0;

  int rows() const { return static_cast<int>(grid.size(0)); }
  int cols() const { return static_cast<int>(grid.size(1)); }
  int dim() const { return static_cast<int>(grid.size(2)); }
};

struct PrincipalComponents {
  torch::Tensor channels;   // [4, h_p, w_p], each channel min-max scaled to [0,1]
  Eigen::MatrixXd basis;    // [4, D], orthonormal rows, decreasing variance
  Eigen::VectorXd mean;     // [D]
  Eigen::VectorXd eigenvalues;  // all D covariance eigenvalues, descending
};

// Trainable 4-vector, unconstrained.
struct BlendWeights {
  torch::Tensor w;  // [4]

  static BlendWeights zeros(bool requires_grad = true);
};

struct EditMask {
  torch::Tensor m;  // [..., H, W] in [0, 1]

  torch::Tensor complement() const { return 1.0 - m; }
};

// Extracts the extractor's per-patch keys for a single [3,H,W] image.
PatchFeatures extract_patch_features(VitKeyExtractor& extractor, const torch::Tensor& image);

// Top-k principal directions of the rows of `samples` (n x D). Rows of the
// returned basis are orthonormal, sorted by decreasing eigenvalue; each is
// sign-flipped so the projections have non-negative skewness (ties resolved
// by the largest-magnitude coordinate being positive). Throws
// DegenerateInput when the sample covariance has rank < k.
struct PcaBasis {
  Eigen::MatrixXd basis;        // [k, D]
  Eigen::VectorXd mean;         // [D]
  Eigen::VectorXd eigenvalues;  // [D], descending
};
PcaBasis pca_basis(const Eigen::MatrixXd& samples, int k);

// Per-image PCA over the patch grid.
PrincipalComponents fit_pca(const PatchFeatures& features);

// Corpus mode: one basis shared across images, fitted over all patches.
PcaBasis fit_pca_corpus(const std::vector<PatchFeatures>& features);
PrincipalComponents project_pca(const PatchFeatures& features, const PcaBasis& basis);

// m = clip(sum_k V[k] sigmoid(w_k) / sum_k sigmoid(w_k), 0, 1), bilinearly
// upsampled to out_h x out_w. `channels` is [4,h,w] or [B,4,h,w]; the result
// is [out_h,out_w] or [B,out_h,out_w] respectively. Differentiable in w.
EditMask blend_mask(const torch::Tensor& channels, const BlendWeights& weights, int out_h,
                    int out_w);

// Binary mask: 1 where the label is in `editable`. Label ids must be in
// [0, num_classes). `labels` is an integer [H,W] tensor.
EditMask semantic_mask(const torch::Tensor& labels, const std::set<int>& editable,
                       int num_classes);

}  // namespace facade::maskmod

#endif  // FACADE_MASKMOD_MASK_H_
