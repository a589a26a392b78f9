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

#include "facade/losses/losses.h"

#include <cmath>
#include <sstream>

#include "facade/common/errors.h"

namespace facade::losses {

namespace F = torch::nn::functional;

void LossWeights::validate() const {
  for (double w : {rec, edit, gan_dep, gan_cons}) {
    if (!std::isfinite(w) || w < 0.0) {
      throw InvalidArgument("loss weights must be finite and non-negative");
    }
  }
}

nlohmann::json LossWeights::to_json() const {
  return {{"rec", rec}, {"edit", edit}, {"gan_dep", gan_dep}, {"gan_cons", gan_cons}};
}

LossWeights LossWeights::from_json(const nlohmann::json& j) {
  LossWeights w;
  w.rec = j.value("rec", w.rec);
  w.edit = j.value("edit", w.edit);
  w.gan_dep = j.value("gan_dep", w.gan_dep);
  w.gan_cons = j.value("gan_cons", w.gan_cons);
  w.validate();
  return w;
}

nlohmann::json LossReport::to_json() const {
  return {{"rec", rec},   {"edit", edit}, {"gan_dep", gan_dep}, {"gan_cons", gan_cons},
          {"total", total}, {"edit_per_view", edit_per_view}, {"disc", disc}, {"r1", r1}};
}

torch::Tensor loss_rec(const torch::Tensor& f_ref, const torch::Tensor& f_rec) {
  if (f_ref.sizes() != f_rec.sizes()) {
    throw InvalidArgument("loss_rec: shape mismatch " + c10::str(f_ref.sizes()) + " vs " +
                          c10::str(f_rec.sizes()));
  }
  return (f_ref - f_rec).abs().mean();
}

torch::Tensor loss_edit_single(const torch::Tensor& f_ref, const torch::Tensor& f_novel,
                               const torch::Tensor& mask, EditNorm norm) {
  if (f_ref.sizes() != f_novel.sizes()) {
    throw InvalidArgument("loss_edit: image shape mismatch");
  }
  const auto h = f_ref.size(-2), w = f_ref.size(-1);
  if (mask.dim() < 2 || mask.size(-2) != h || mask.size(-1) != w) {
    throw InvalidArgument("loss_edit: mask " + c10::str(mask.sizes()) +
                          " does not match image " + c10::str(f_ref.sizes()));
  }
  // [H,W] -> [1,H,W], [B,H,W] -> [B,1,H,W]: broadcast over channels.
  auto keep = (1.0 - mask).unsqueeze(-3);
  if (f_ref.dim() == 4 && keep.dim() == 4 && keep.size(0) != f_ref.size(0)) {
    throw InvalidArgument("loss_edit: mask batch does not match image batch");
  }
  auto diff = f_ref * keep - f_novel * keep;
  return norm == EditNorm::kL1 ? diff.abs().mean() : diff.square().mean();
}

torch::Tensor loss_edit_multi(const torch::Tensor& f_ref,
                              const std::vector<torch::Tensor>& f_novels,
                              const torch::Tensor& mask, EditNorm norm,
                              std::vector<double>* per_view) {
  if (f_novels.empty()) throw InvalidArgument("loss_edit_multi: no novel views");
  torch::Tensor sum;
  if (per_view) per_view->clear();
  for (const auto& f : f_novels) {
    auto l = loss_edit_single(f_ref, f, mask, norm);
    if (per_view) per_view->push_back(l.item<double>());
    sum = sum.defined() ? sum + l : l;
  }
  return sum / static_cast<double>(f_novels.size());
}

torch::Tensor loss_gan_generator(const torch::Tensor& fake_logits) {
  return F::softplus(-fake_logits).mean();
}

torch::Tensor loss_discriminator(const torch::Tensor& real_logits,
                                 const torch::Tensor& fake_logits) {
  return F::softplus(-real_logits).mean() + F::softplus(fake_logits).mean();
}

torch::Tensor r1_penalty(const torch::Tensor& real_logits, const torch::Tensor& reals,
                         double weight) {
  auto grads = torch::autograd::grad({real_logits.sum()}, {reals},
                                     /*grad_outputs=*/{}, /*retain_graph=*/true,
                                     /*create_graph=*/true, /*allow_unused=*/true)[0];
  if (!grads.defined()) return torch::zeros({}, reals.options());
  return 0.5 * weight * grads.square().sum({1, 2, 3}).mean();
}

namespace {

void check_finite(const LossReport& r) {
  if (std::isfinite(r.rec) && std::isfinite(r.edit) && std::isfinite(r.gan_dep) &&
      std::isfinite(r.gan_cons)) {
    return;
  }
  std::ostringstream diag;
  diag << "rec=" << r.rec << " edit=" << r.edit << " gan_dep=" << r.gan_dep
       << " gan_cons=" << r.gan_cons;
  throw TrainingDivergence("non-finite loss term", diag.str());
}

}  // namespace

LossReport total_loss(double rec, double edit, double gan_dep, double gan_cons,
                      const LossWeights& weights) {
  LossReport r;
  r.rec = rec;
  r.edit = edit;
  r.gan_dep = gan_dep;
  r.gan_cons = gan_cons;
  check_finite(r);
  r.total = weights.rec * rec + weights.edit * edit + weights.gan_dep * gan_dep +
            weights.gan_cons * gan_cons;
  return r;
}

torch::Tensor total_loss(const LossParts& parts, const LossWeights& weights,
                         LossReport* report) {
  auto r = total_loss(parts.rec.item<double>(), parts.edit.item<double>(),
                      parts.gan_dep.item<double>(), parts.gan_cons.item<double>(), weights);
  r.edit_per_view = parts.edit_per_view;
  if (report) *report = r;
  return weights.rec * parts.rec + weights.edit * parts.edit + weights.gan_dep * parts.gan_dep +
         weights.gan_cons * parts.gan_cons;
}

}  // namespace facade::losses
