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

#include <cmath>
#include <random>

#include "facade/common/errors.h"
#include "facade/evalkit/evalkit.h"

namespace facade::evalkit {

nlohmann::json MetricsReport::to_json() const {
  return {{"psnr", psnr},
          {"ssim", ssim},
          {"fid_small_rec", fid_rec},
          {"fid_small_novel", fid_novel},
          {"fid_regularized", fid_regularized},
          {"lpips_alex_like", lpips_alex_like},
          {"lpips_vgg_like", lpips_vgg_like},
          {"num_images", num_images},
          {"num_strips", num_strips}};
}

InterpolationStrip interpolate(nets::ModelBundle& model, const torch::Tensor& f_ref,
                               const viewgeom::ViewVectorPair& view, Axis axis, int steps,
                               double span) {
  if (steps < 1 || steps % 2 == 0) throw InvalidArgument("interpolate: steps must be odd and >= 1");
  if (!(span >= 0.0) || (steps > 1 && span == 0.0)) {
    throw InvalidArgument("interpolate: span must be > 0 when steps > 1");
  }
  torch::NoGradGuard no_grad;
  const auto z = nets::encode(model, f_ref);
  InterpolationStrip strip;
  const int mid = steps / 2;
  for (int i = 0; i < steps; ++i) {
    const double off = i == mid ? 0.0 : span * static_cast<double>(i - mid) / std::max(mid, 1);
    strip.offsets.push_back(off);
    const auto v = axis == Axis::kHorizontal ? viewgeom::offset_view_vectors(view, off, 0.0)
                                             : viewgeom::offset_view_vectors(view, 0.0, off);
    strip.frames.push_back(nets::generate(model, z, v));
  }
  return strip;
}

torch::Tensor improve_facade(nets::ModelBundle& model, const torch::Tensor& f_ref) {
  torch::NoGradGuard no_grad;
  const auto h = static_cast<int>(f_ref.size(-2)), w = static_cast<int>(f_ref.size(-1));
  return nets::generate(model, nets::encode(model, f_ref), viewgeom::constant_view(w, h, 0.0, 0.0));
}

namespace {

constexpr std::size_t kChunk = 16;

struct Chunk {
  torch::Tensor images;
  std::vector<viewgeom::ViewVectorPair> views;
  std::vector<datakit::FacadeSample> samples;
};

template <typename Fn>
void for_each_chunk(const datakit::Dataset& data, std::size_t limit, Fn&& fn) {
  const std::size_t n = std::min(limit, data.size());
  for (std::size_t start = 0; start < n; start += kChunk) {
    Chunk c;
    std::vector<torch::Tensor> imgs;
    for (std::size_t i = start; i < std::min(n, start + kChunk); ++i) {
      c.samples.push_back(data.get(i));
      imgs.push_back(c.samples.back().image);
      c.views.push_back(c.samples.back().view);
    }
    c.images = torch::stack(imgs);
    fn(c);
  }
}

}  // namespace

MetricsReport evaluate(nets::ModelBundle& model, const datakit::Dataset& data,
                       const EvalOptions& options) {
  if (data.size() == 0) throw InvalidArgument("evaluate: empty dataset");
  torch::NoGradGuard no_grad;
  auto fid_net = make_alex_like(options.extractor_seed);
  auto alex = make_alex_like(options.extractor_seed + 100);
  auto vgg = make_vgg_like(options.extractor_seed + 200);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);

  MetricsReport r;
  double psnr_sum = 0.0, ssim_sum = 0.0;
  std::vector<Eigen::MatrixXd> real_f, rec_f, nov_f;
  std::vector<InterpolationStrip> strips;
  for_each_chunk(data, options.max_samples, [&](const Chunk& c) {
    const auto z = nets::encode(model, c.images);
    const auto rec = nets::generate(model, z, nets::ViewBatch::from_pairs(c.views));
    std::vector<viewgeom::ViewVectorPair> novel;
    for (const auto& v : c.views) {
      const double dh = u(rng), dv = u(rng);
      novel.push_back(viewgeom::offset_view_vectors(v, dh, dv));
    }
    const auto nov = nets::generate(model, z, nets::ViewBatch::from_pairs(novel));
    for (int64_t i = 0; i < c.images.size(0); ++i) {
      psnr_sum += psnr(to_unit(c.images[i]), to_unit(rec[i]));
      ssim_sum += ssim(to_unit(c.images[i]), to_unit(rec[i]));
    }
    real_f.push_back(pooled_features(*fid_net, c.images));
    rec_f.push_back(pooled_features(*fid_net, rec));
    nov_f.push_back(pooled_features(*fid_net, nov));
    r.num_images += static_cast<std::size_t>(c.images.size(0));
    if (options.strips) {
      for (std::size_t i = 0; i < c.samples.size(); ++i) {
        strips.push_back(interpolate(model, c.samples[i].image, c.views[i], Axis::kHorizontal,
                                     options.strip_steps, options.strip_span));
      }
    }
  });
  auto stack = [](const std::vector<Eigen::MatrixXd>& parts) {
    Eigen::Index rows = 0;
    for (const auto& p : parts) rows += p.rows();
    Eigen::MatrixXd m(rows, parts.front().cols());
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      m.middleRows(at, p.rows()) = p;
      at += p.rows();
    }
    return m;
  };
  r.psnr = psnr_sum / static_cast<double>(r.num_images);
  r.ssim = ssim_sum / static_cast<double>(r.num_images);
  if (r.num_images >= 2) {
    const auto real = stack(real_f);
    const auto fr = fid(real, stack(rec_f));
    const auto fn = fid(real, stack(nov_f));
    r.fid_rec = fr.value;
    r.fid_novel = fn.value;
    r.fid_regularized = fr.regularized || fn.regularized;
  }
  if (!strips.empty()) {
    r.lpips_alex_like = view_consistency(*alex, strips);
    r.lpips_vgg_like = view_consistency(*vgg, strips);
    r.num_strips = strips.size();
  }
  return r;
}

ConditioningEffect conditioning_effect(nets::ModelBundle& model, const datakit::Dataset& data,
                                       double delta, std::size_t max_samples) {
  torch::NoGradGuard no_grad;
  double in_sum = 0.0, out_sum = 0.0, in_n = 0.0, out_n = 0.0;
  for_each_chunk(data, max_samples, [&](const Chunk& c) {
    const auto z = nets::encode(model, c.images);
    std::vector<viewgeom::ViewVectorPair> plus, minus;
    for (const auto& v : c.views) {
      plus.push_back(viewgeom::offset_view_vectors(v, delta, 0.0));
      minus.push_back(viewgeom::offset_view_vectors(v, -delta, 0.0));
    }
    const auto a = nets::generate(model, z, nets::ViewBatch::from_pairs(plus));
    const auto b = nets::generate(model, z, nets::ViewBatch::from_pairs(minus));
    const auto change = (a - b).abs().mean(1).to(torch::kFloat64);  // [B,H,W]
    std::vector<torch::Tensor> masks;
    for (const auto& s : c.samples) masks.push_back(datakit::window_mask(s));
    const auto m = torch::stack(masks).to(torch::kFloat64);
    in_sum += (change * m).sum().item<double>();
    out_sum += (change * (1.0 - m)).sum().item<double>();
    in_n += m.sum().item<double>();
    out_n += (1.0 - m).sum().item<double>();
  });
  ConditioningEffect e;
  e.inside = in_n > 0 ? in_sum / in_n : 0.0;
  e.outside = out_n > 0 ? out_sum / out_n : 0.0;
  return e;
}

}  // namespace facade::evalkit
