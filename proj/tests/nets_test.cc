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

#include <gtest/gtest.h>

#include "facade/common/codec.h"
#include "facade/common/errors.h"
#include "test_support.h"

namespace facade::nets {
namespace {

using facade::testing::random_image;
using facade::testing::tiny_net;
using viewgeom::constant_view;
using viewgeom::ViewVectorPair;

TEST(NetConfig, LatentShapeArithmetic) {
  NetConfig c;
  c.image_size = 64;
  c.downsample_stages = 3;
  c.latent_channels = 128;
  auto m = ModelBundle::create(c, 0);
  torch::NoGradGuard ng;
  auto z = encode(m, random_image(1, 64));
  EXPECT_EQ(z.sizes(), (std::vector<int64_t>{128, 8, 8}));
}

TEST(NetConfig, RoundTripsThroughEveryConfiguredSize) {
  torch::NoGradGuard ng;
  for (int size : {32, 64, 128, 256}) {
    NetConfig c = tiny_net(size);
    c.downsample_stages = size >= 128 ? 4 : 2;
    auto m = ModelBundle::create(c, 1);
    auto z = encode(m, random_image(2, size));
    EXPECT_EQ(z.size(1), c.latent_size());
    auto out = generate(m, z, constant_view(size, size, 0.1, -0.2));
    EXPECT_EQ(out.sizes(), (std::vector<int64_t>{3, size, size}));
  }
}

TEST(NetConfig, ValidationAndJson) {
  NetConfig bad = tiny_net();
  bad.image_size = 12;
  bad.downsample_stages = 2;  // latent 3 < 4
  EXPECT_THROW(bad.validate(), InvalidArgument);
  NetConfig c = tiny_net();
  c.view_injection = false;
  const auto back = NetConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
}

TEST(Encode, DeterministicAndInputSensitive) {
  auto m = ModelBundle::create(tiny_net(), 3);
  torch::NoGradGuard ng;
  auto a = random_image(1, 16), b = random_image(2, 16);
  EXPECT_TRUE(torch::equal(encode(m, a), encode(m, a)));
  EXPECT_GT((encode(m, a) - encode(m, b)).norm().item<float>(), 0.0f);
  EXPECT_THROW(encode(m, random_image(1, 32)), InvalidArgument);
}

TEST(Generate, ViewChangesOutputAndRangeHolds) {
  auto m = ModelBundle::create(tiny_net(), 4);
  torch::NoGradGuard ng;
  auto z = encode(m, random_image(5, 16));
  auto a = generate(m, z, constant_view(16, 16, 0.0, 0.0));
  auto b = generate(m, z, constant_view(16, 16, 0.5, -0.5));
  EXPECT_GT((a - b).abs().max().item<float>(), 0.0f);
  EXPECT_LE(a.abs().max().item<float>(), 1.0f);
  EXPECT_THROW(generate(m, z, constant_view(8, 16, 0.0, 0.0)), InvalidArgument);
}

TEST(Generate, WithoutInjectionIsExactlyViewInvariant) {
  auto c = tiny_net();
  c.view_injection = false;
  auto m = ModelBundle::create(c, 4);
  torch::NoGradGuard ng;
  auto z = encode(m, random_image(5, 16));
  auto a = generate(m, z, constant_view(16, 16, -0.9, 0.3));
  auto b = generate(m, z, constant_view(16, 16, 0.7, -1.0));
  EXPECT_TRUE(torch::equal(a, b));
}

TEST(Generate, BatchedMatchesSingle) {
  auto m = ModelBundle::create(tiny_net(), 6);
  torch::NoGradGuard ng;
  auto z = encode(m, torch::stack({random_image(1, 16), random_image(2, 16)}));
  std::vector<ViewVectorPair> views{constant_view(16, 16, 0.2, 0.1), constant_view(16, 16, -0.4, 0.0)};
  auto out = generate(m, z, ViewBatch::from_pairs(views));
  for (int i = 0; i < 2; ++i) {
    EXPECT_LE((out[i] - generate(m, z[i], views[i])).abs().max().item<float>(), 1e-5f);
  }
}

TEST(Generate, DifferentiableInLatent) {
  auto m = ModelBundle::create(tiny_net(), 7);
  auto z = encode(m, random_image(1, 16)).detach().requires_grad_(true);
  generate(m, z, constant_view(16, 16, 0.3, 0.3)).sum().backward();
  EXPECT_GT(z.grad().abs().sum().item<float>(), 0.0f);
}

TEST(Discriminate, ShapesAndGradientFlow) {
  auto m = ModelBundle::create(tiny_net(), 8);
  auto x = torch::stack({random_image(1, 16), random_image(2, 16), random_image(3, 16)});
  auto views = ViewBatch::from_pairs({constant_view(16, 16, 0.1, 0.0), constant_view(16, 16, 0.2, 0.0),
                                      constant_view(16, 16, 0.3, 0.0)});
  auto logits = discriminate(m, x, views);
  EXPECT_EQ(logits.size(0), 3);
  // Same images, other views: logits differ.
  auto other = ViewBatch::from_pairs({constant_view(16, 16, -0.8, 0.5), constant_view(16, 16, -0.8, 0.5),
                                      constant_view(16, 16, -0.8, 0.5)});
  EXPECT_FALSE(torch::equal(logits, discriminate(m, x, other)));
  // Gradients reach both the image and the view channels.
  auto xi = x.clone().requires_grad_(true);
  auto map = build_view_map(views).clone().requires_grad_(true);
  m.discriminator->forward(xi, map).sum().backward();
  EXPECT_GT(xi.grad().norm().item<float>(), 0.0f);
  EXPECT_GT(map.grad().norm().item<float>(), 0.0f);
}

TEST(ViewMap, BroadcastStructure) {
  ViewVectorPair zero = constant_view(6, 4, 0.0, 0.0);
  EXPECT_EQ(build_view_map(zero, 4, 6).abs().sum().item<float>(), 0.0f);

  ViewVectorPair ramp{{-1.0f, -0.5f, 0.0f, 0.5f, 1.0f}, {0.1f, 0.2f, 0.3f}};
  auto map = build_view_map(ramp, 3, 5);
  ASSERT_EQ(map.sizes(), (std::vector<int64_t>{2, 3, 5}));
  for (int r = 1; r < 3; ++r) EXPECT_TRUE(torch::equal(map[0][r], map[0][0]));
  for (int c = 1; c < 5; ++c) EXPECT_TRUE(torch::equal(map[1].select(1, c), map[1].select(1, 0)));
  auto recovered = map[0].mean(0);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(recovered[c].item<float>(), ramp.theta_h[c], 1e-6);
  // Other lengths are resampled to the requested size.
  EXPECT_EQ(build_view_map(ramp, 7, 9).sizes(), (std::vector<int64_t>{2, 7, 9}));
}

TEST(ViewBatch, TiledIsGrouped) {
  auto vb = ViewBatch::from_pairs({constant_view(4, 4, 0.1, 0.0), constant_view(4, 4, 0.2, 0.0)});
  auto t = vb.tiled(3);
  ASSERT_EQ(t.size(), 6);
  for (int i = 0; i < 6; ++i) {
    EXPECT_FLOAT_EQ(t.theta_h[i][0].item<float>(), i % 2 == 0 ? 0.1f : 0.2f);
  }
}

TEST(Fuzz, ForwardPassesAreFinite) {
  auto m = ModelBundle::create(tiny_net(), 9);
  torch::NoGradGuard ng;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int t = 0; t < 20; ++t) {
    auto x = random_image(100 + t, 16);
    auto v = constant_view(16, 16, u(rng), u(rng));
    auto out = generate(m, encode(m, x), v);
    EXPECT_TRUE(torch::isfinite(out).all().item<bool>());
    EXPECT_TRUE(torch::isfinite(discriminate(m, x, ViewBatch::from_pair(v))).all().item<bool>());
  }
  EXPECT_TRUE(all_parameters_finite(m));
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
  auto m = ModelBundle::create(tiny_net(), 10);
  m.step = 42;
  const auto bytes = serialize_archive(bundle_to_archive(m));
  auto back = bundle_from_archive(parse_archive(bytes));
  EXPECT_EQ(back.step, 42);
  EXPECT_EQ(serialize_archive(bundle_to_archive(back)), bytes);
  EXPECT_EQ(parameter_checksum(back), parameter_checksum(m));
  auto c = m.clone();
  EXPECT_EQ(parameter_checksum(c), parameter_checksum(m));
  // Independent storage.
  {
    torch::NoGradGuard ng;
    c.blend_weights.add_(1.0);
  }
  EXPECT_NE(parameter_checksum(c), parameter_checksum(m));
}

TEST(Checkpoint, LoadingLeavesGlobalRngUntouched) {
  auto bytes = serialize_archive(bundle_to_archive(ModelBundle::create(tiny_net(), 11)));
  torch::manual_seed(5);
  auto expected = torch::rand({4});
  torch::manual_seed(5);
  bundle_from_archive(parse_archive(bytes));
  EXPECT_TRUE(torch::equal(torch::rand({4}), expected));
}

TEST(Checkpoint, RejectsForeignArchives) {
  TensorArchive a;
  a.meta = {{"kind", "something-else"}};
  EXPECT_THROW(bundle_from_archive(a), CorruptArchive);
  auto good = bundle_to_archive(ModelBundle::create(tiny_net(), 1));
  good.tensors.erase("blend.weights");
  EXPECT_THROW(bundle_from_archive(good), CorruptArchive);
  EXPECT_THROW(load_bundle("/nonexistent/model.fckpt"), NotFound);
}

TEST(Checkpoint, SeedDeterminesInitialization) {
  EXPECT_EQ(parameter_checksum(ModelBundle::create(tiny_net(), 3)),
            parameter_checksum(ModelBundle::create(tiny_net(), 3)));
  EXPECT_NE(parameter_checksum(ModelBundle::create(tiny_net(), 3)),
            parameter_checksum(ModelBundle::create(tiny_net(), 4)));
}

}  // namespace
}  // namespace facade::nets
