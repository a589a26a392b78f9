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

#include "facade/trainkit/trainkit.h"

#include <gtest/gtest.h>

#include <atomic>

#include "facade/common/archive.h"
#include "facade/common/errors.h"
#include "facade/maskmod/vit.h"
#include "test_support.h"

namespace facade::trainkit {
namespace {

using facade::testing::bitwise_equal;
using facade::testing::scratch_dir;
using facade::testing::tiny_net;

std::shared_ptr<const datakit::Dataset> tiny_data(std::size_t n = 6) {
  datakit::SynthOptions so;
  so.count = n;
  so.seed = 3;
  so.ranges.image_size = 16;
  return std::make_shared<datakit::InMemoryDataset>(datakit::generate_synthetic(so));
}

TrainConfig tiny_config(MaskMode mode = MaskMode::kSemantics) {
  TrainConfig c;
  c.net = tiny_net();
  c.batch_size = 2;
  c.k_views = 2;
  c.mask_mode = mode;
  c.steps = 3;
  c.seed = 11;
  c.checkpoint_every = 0;
  return c;
}

std::string generator_side_bytes(const nets::ModelBundle& m) {
  std::string out;
  for (const auto& p : m.generator_side_parameters()) {
    auto t = p.detach().contiguous();
    out.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
  }
  return out;
}

std::string discriminator_bytes(const nets::ModelBundle& m) {
  std::string out;
  for (const auto& p : m.discriminator->parameters()) {
    auto t = p.detach().contiguous();
    out.append(static_cast<const char*>(t.data_ptr()), t.numel() * t.element_size());
  }
  return out;
}

std::filesystem::path extractor_file() {
  static const auto path = [] {
    auto dir = scratch_dir("trainkit_vit");
    maskmod::VitConfig vc;
    vc.image_size = 16;
    vc.embed_dim = 16;
    vc.depth = 1;
    vc.heads = 2;
    maskmod::save_extractor(maskmod::make_seeded_extractor(vc, 5), dir / "vit.fckpt");
    return dir / "vit.fckpt";
  }();
  return path;
}

TEST(NovelViews, CountRangeAndDistinct) {
  std::mt19937_64 rng(1);
  auto v = viewgeom::constant_view(8, 8, 0.1, -0.2);
  auto views = sample_novel_views(v, 6, rng, 0.5);
  ASSERT_EQ(views.size(), 6u);
  for (const auto& n : views) {
    EXPECT_FALSE(n.theta_h == v.theta_h && n.theta_v == v.theta_v);
    for (std::size_t i = 0; i < 8; ++i) {
      EXPECT_LE(std::abs(n.theta_h[i] - v.theta_h[i]), 0.5 + 1e-6);
      EXPECT_LE(std::abs(n.theta_v[i] - v.theta_v[i]), 0.5 + 1e-6);
    }
  }
  std::mt19937_64 again(1);
  auto same = sample_novel_views(v, 6, again, 0.5);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(same[i].theta_h, views[i].theta_h);
}

TEST(TrainConfig, JsonIsStrict) {
  auto c = tiny_config();
  EXPECT_EQ(TrainConfig::from_json(c.to_json()).to_json(), c.to_json());
  auto j = c.to_json();
  j["learning_rat"] = 0.1;
  EXPECT_THROW(TrainConfig::from_json(j), InvalidArgument);
  auto partial = TrainConfig::from_json({{"steps", 7}, {"mask_mode", "none"}});
  EXPECT_THROW(TrainConfig::from_json({{"steps", 7}}), InvalidArgument);  // dino default, no extractor
  EXPECT_EQ(partial.steps, 7);
  EXPECT_EQ(partial.batch_size, TrainConfig{}.batch_size);
  TrainConfig dino = tiny_config(MaskMode::kDino);
  EXPECT_THROW(dino.validate(), InvalidArgument);
  EXPECT_EQ(parse_mask_mode(to_string(MaskMode::kDino)), MaskMode::kDino);
  EXPECT_THROW(parse_mask_mode("sam"), InvalidArgument);
}

TEST(Trainer, SeededRunsAreBitwiseIdentical) {
  auto data = tiny_data();
  auto run = [&] {
    Trainer t(tiny_config(), data);
    for (int i = 0; i < 3; ++i) t.step();
    return t.state().model.clone();
  };
  auto a = run(), b = run();
  EXPECT_TRUE(bitwise_equal(a, b));
  EXPECT_EQ(a.step, 3);
}

TEST(Trainer, ZeroLambdasFreezeTheGeneratorSideOnly) {
  auto c = tiny_config();
  c.weights = {0, 0, 0, 0};
  Trainer t(c, tiny_data());
  const auto g0 = generator_side_bytes(t.state().model);
  const auto d0 = discriminator_bytes(t.state().model);
  t.step();
  t.step();
  EXPECT_EQ(generator_side_bytes(t.state().model), g0);
  EXPECT_NE(discriminator_bytes(t.state().model), d0);
}

TEST(Trainer, DefaultStepMovesGeneratorSide) {
  Trainer t(tiny_config(), tiny_data());
  const auto g0 = generator_side_bytes(t.state().model);
  auto r = t.step();
  EXPECT_NE(generator_side_bytes(t.state().model), g0);
  EXPECT_TRUE(std::isfinite(r.total));
  EXPECT_EQ(r.edit_per_view.size(), 2u);
}

TEST(Trainer, DinoModeLearnsBlendWeights) {
  auto c = tiny_config(MaskMode::kDino);
  c.extractor = extractor_file().string();
  Trainer t(c, tiny_data());
  auto w0 = t.state().model.blend_weights.clone();
  t.step();
  t.step();
  EXPECT_FALSE(torch::equal(t.state().model.blend_weights, w0));
  auto q = mask_quality(t.mask_source(), t.state().model.blend_weights, *tiny_data(), 3);
  EXPECT_GT(q.inside, 0.0);
  EXPECT_GT(q.outside, 0.0);
  EXPECT_LT(q.inside, 1.0);
}

TEST(Trainer, SemanticMasksAreExactForQuality) {
  Trainer t(tiny_config(), tiny_data());
  auto q = mask_quality(t.mask_source(), t.state().model.blend_weights, *tiny_data(), 4);
  EXPECT_EQ(q.inside, 1.0);
  EXPECT_EQ(q.outside, 0.0);
}

TEST(Trainer, DivergenceRollsBack) {
  Trainer t(tiny_config(), tiny_data());
  t.step();
  t.snapshot();
  const auto before = nets::parameter_checksum(t.state().model);
  auto batch = t.next_batch();
  batch.images = torch::full_like(batch.images, std::numeric_limits<float>::quiet_NaN());
  EXPECT_THROW(t.step(batch), TrainingDivergence);
  EXPECT_EQ(nets::parameter_checksum(t.state().model), before);
  EXPECT_EQ(t.state().model.step, 1);
}

TEST(State, SaveLoadSaveIsByteIdentical) {
  auto c = tiny_config();
  Trainer t(c, tiny_data());
  t.step();
  const auto bytes = serialize_archive(state_to_archive(t.state(), c));
  auto back = state_from_archive(parse_archive(bytes), c);
  EXPECT_EQ(serialize_archive(state_to_archive(back, c)), bytes);
  // A training state also loads as a plain model checkpoint.
  auto dir = scratch_dir("state_bytes");
  save_state(t.state(), c, dir / "s.fckpt");
  EXPECT_TRUE(bitwise_equal(nets::load_bundle(dir / "s.fckpt"), t.state().model));
  auto other = c;
  other.net.latent_channels = 8;
  EXPECT_THROW(load_state(dir / "s.fckpt", other), InvalidArgument);
  EXPECT_THROW(state_from_archive(nets::bundle_to_archive(t.state().model), c), CorruptArchive);
}

TEST(Fit, ResumeMatchesUninterruptedRun) {
  auto data = tiny_data();
  auto c = tiny_config();
  c.steps = 4;
  auto straight = fit(c, data, {});
  EXPECT_EQ(straight.steps_done, 4);

  auto dir = scratch_dir("resume");
  auto first = c;
  first.steps = 2;
  FitOptions o;
  o.out_dir = dir;
  fit(first, data, o);
  ASSERT_TRUE(std::filesystem::exists(dir / "state.fckpt"));
  FitOptions r;
  r.out_dir = dir;
  r.resume = dir / "state.fckpt";
  auto resumed = fit(c, data, r);
  EXPECT_EQ(resumed.steps_done, 2);
  EXPECT_TRUE(bitwise_equal(resumed.model, straight.model));
  EXPECT_TRUE(std::filesystem::exists(dir / "model.fckpt"));
}

TEST(Fit, ZeroStepsLeavesModelUnchanged) {
  auto c = tiny_config();
  c.steps = 0;
  auto r = fit(c, tiny_data(), {});
  EXPECT_EQ(r.steps_done, 0);
  EXPECT_TRUE(bitwise_equal(r.model, init_state(c).model));
}

TEST(Fit, StopFlagInterruptsAndCheckpoints) {
  auto dir = scratch_dir("interrupt");
  std::atomic<bool> stop{false};
  FitOptions o;
  o.out_dir = dir;
  o.stop = &stop;
  o.on_step = [&](std::int64_t step, const losses::LossReport&) {
    if (step == 1) stop = true;
  };
  auto c = tiny_config();
  c.steps = 10;
  auto r = fit(c, tiny_data(), o);
  EXPECT_TRUE(r.interrupted);
  EXPECT_EQ(r.steps_done, 1);
  EXPECT_TRUE(std::filesystem::exists(dir / "state.fckpt"));
  EXPECT_FALSE(std::filesystem::exists(dir / "model.fckpt"));
  EXPECT_EQ(load_state(dir / "state.fckpt", c).model.step, 1);
}

}  // namespace
}  // namespace facade::trainkit
