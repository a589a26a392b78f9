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

#ifndef FACADE_LOSSES_LOSSES_H_
#define FACADE_LOSSES_LOSSES_H_

#include <torch/torch.h>

#include <functional>
#include <vector>

#include "json.hpp"

namespace facade::losses {

struct LossWeights {
  double rec = 3.0;       // lambda_1
  double edit = 3.0;      // lambda_2
  double gan_dep = 0.5;   // lambda_3
  double gan_cons = 0.5;  // lambda_4

  void validate() const;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

enum class EditNorm { kL1, kL2 };

// The four generator-side terms, each a scalar tensor (possibly attached to
// an autograd graph).
struct LossParts {
  torch::Tensor rec;
  torch::Tensor edit;
  torch::Tensor gan_dep;
  torch::Tensor gan_cons;
  std::vector<double> edit_per_view;
};

struct LossReport {
  double rec = 0.0;
  double edit = 0.0;
  double gan_dep = 0.0;
  double gan_cons = 0.0;
  double total = 0.0;
  std::vector<double> edit_per_view;
  // Discriminator-side diagnostics (not part of the total).
  double disc = 0.0;
  double r1 = 0.0;

  nlohmann::json to_json() const;
};

// Mean absolute error over all elements. Throws InvalidArgument on shape mismatch.
torch::Tensor loss_rec(const torch::Tensor& f_ref, const torch::Tensor& f_rec);

// Mean over all elements of |f_ref * M' - f_novel * M'| with M' = 1 - M.
// `mask` is [H,W] or [B,H,W] and broadcasts over channels.
torch::Tensor loss_edit_single(const torch::Tensor& f_ref, const torch::Tensor& f_novel,
                               const torch::Tensor& mask, EditNorm norm = EditNorm::kL1);

// Arithmetic mean of loss_edit_single over the novel views. When
// `per_view` is given it receives each view's value.
torch::Tensor loss_edit_multi(const torch::Tensor& f_ref,
                              const std::vector<torch::Tensor>& f_novels,
                              const torch::Tensor& mask, EditNorm norm = EditNorm::kL1,
                              std::vector<double>* per_view = nullptr);

// Non-saturating generator objective: mean softplus(-logit) = -log sigmoid.
torch::Tensor loss_gan_generator(const torch::Tensor& fake_logits);

// mean softplus(-real) + mean softplus(fake).
torch::Tensor loss_discriminator(const torch::Tensor& real_logits,
                                 const torch::Tensor& fake_logits);

// R1 penalty: (weight / 2) * E ||d D(x) / d x||^2 over real images. `reals`
// must require grad and `real_logits` be computed from it.
torch::Tensor r1_penalty(const torch::Tensor& real_logits, const torch::Tensor& reals,
                         double weight);

// Weighted recombination. The returned tensor stays attached to the graph;
// `report` receives the scalar values. Throws TrainingDivergence when any
// part is non-finite.
torch::Tensor total_loss(const LossParts& parts, const LossWeights& weights,
                         LossReport* report);

// Scalar form used by reporting and tests.
LossReport total_loss(double rec, double edit, double gan_dep, double gan_cons,
                      const LossWeights& weights);

}  // namespace facade::losses

#endif  // FACADE_LOSSES_LOSSES_H_
