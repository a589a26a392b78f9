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

#include "facade/datakit/datakit.h"

#include <gtest/gtest.h>

#include <fstream>
#include <numeric>
#include <set>

#include "facade/common/errors.h"
#include "facade/common/image.h"
#include "test_support.h"

namespace facade::datakit {
namespace {

namespace fs = std::filesystem;
using facade::testing::scratch_dir;

double mean(const std::vector<float>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

TEST(Synthetic, FrontalViewIsCenteredAndSymmetric) {
  SyntheticSpec spec;
  auto s = render_synthetic(spec, 1);
  EXPECT_NEAR(mean(s.view.theta_h), 0.0, 1e-6);
  EXPECT_NEAR(mean(s.view.theta_v), 0.0, 1e-6);
  // Mirror symmetry of the windows: labels flip exactly, pixels within one level.
  EXPECT_TRUE(torch::equal(s.labels, s.labels.flip({1})));
  EXPECT_LE((s.image - s.image.flip({2})).abs().max().item<float>(), 2.0f / 255 + 1e-6f);
  EXPECT_GT((s.labels == kWindow).sum().item<int64_t>(), 0);
}

TEST(Synthetic, YawShiftsMeanHorizontalTarget) {
  SyntheticSpec spec;
  spec.yaw_deg = 37.5;
  auto s = render_synthetic(spec, 1);
  EXPECT_NEAR(mean(s.view.theta_h), 0.5, 0.02);
  EXPECT_NEAR(mean(s.view.theta_v), 0.0, 1e-6);
  spec.yaw_deg = -37.5;
  EXPECT_NEAR(mean(render_synthetic(spec, 1).view.theta_h), -0.5, 0.02);
}

TEST(Synthetic, SeedOnlyChangesColor) {
  SyntheticSpec spec;
  spec.yaw_deg = 20.0;
  auto a = render_synthetic(spec, 1), b = render_synthetic(spec, 2);
  EXPECT_TRUE(torch::equal(a.labels, b.labels));
  EXPECT_EQ(a.view.theta_h, b.view.theta_h);
  EXPECT_EQ(a.view.theta_v, b.view.theta_v);
  EXPECT_FALSE(torch::equal(a.image, b.image));
  EXPECT_TRUE(torch::equal(a.image, render_synthetic(spec, 1).image));
}

TEST(Synthetic, StoredViewsMatchSceneGeometry) {
  std::mt19937_64 rng(9);
  SyntheticRanges ranges;
  for (int t = 0; t < 12; ++t) {
    auto spec = random_spec(ranges, rng);
    auto s = render_synthetic(spec, t);
    auto targets = viewgeom::scene_view_targets(synthetic_surface(spec));
    ASSERT_EQ(targets.view.theta_h.size(), s.view.theta_h.size());
    ASSERT_EQ(targets.view.theta_v.size(), s.view.theta_v.size());
    for (std::size_t i = 0; i < s.view.theta_h.size(); ++i) {
      EXPECT_NEAR(targets.view.theta_h[i], s.view.theta_h[i], 1e-5) << "yaw " << spec.yaw_deg;
    }
    for (std::size_t i = 0; i < s.view.theta_v.size(); ++i) {
      EXPECT_NEAR(targets.view.theta_v[i], s.view.theta_v[i], 1e-5) << "pitch " << spec.pitch_deg;
    }
    EXPECT_FALSE(targets.any_degenerate());
  }
}

TEST(Synthetic, FlipNegatesAndReversesHorizontalView) {
  SyntheticSpec spec;
  spec.yaw_deg = 30.0;
  auto s = render_synthetic(spec, 3);
  auto f = flip_horizontal(s);
  const auto n = s.view.theta_h.size();
  for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(f.view.theta_h[i], -s.view.theta_h[n - 1 - i]);
  EXPECT_EQ(f.view.theta_v, s.view.theta_v);
  EXPECT_TRUE(torch::equal(f.image, s.image.flip({2})));
  EXPECT_TRUE(torch::equal(flip_horizontal(f).image, s.image));
  // A mirrored left view looks like a right view.
  spec.yaw_deg = -30.0;
  auto mirror = render_synthetic(spec, 3);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(f.view.theta_h[i], mirror.view.theta_h[i], 1e-6);
}

TEST(Synthetic, WindowMaskCoversWindowsAndDoor) {
  auto s = render_synthetic(SyntheticSpec{}, 4);
  auto m = window_mask(s);
  EXPECT_TRUE(torch::equal(m, (s.labels != kWall).to(torch::kFloat32)));
  EXPECT_GT((s.labels == kDoor).sum().item<int64_t>(), 0);
}

TEST(Synthetic, SpecValidation) {
  SyntheticSpec bad;
  bad.yaw_deg = 95.0;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  SyntheticSpec w;
  w.width = 0;
  EXPECT_THROW(w.validate(), InvalidArgument);
  SyntheticSpec ok;
  ok.yaw_deg = 12.0;
  EXPECT_EQ(SyntheticSpec::from_json(ok.to_json()).to_json(), ok.to_json());
}

TEST(Split, SpecExamples) {
  auto s = split(10, {0.8, 0.1, 0.1}, 0);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.val.size(), 1u);
  EXPECT_EQ(s.test.size(), 1u);
  auto all = split(7, {1.0, 0.0, 0.0}, 3);
  EXPECT_EQ(all.train.size(), 7u);
  EXPECT_TRUE(all.val.empty() && all.test.empty());
  // 0.9/0.05/0.05 of 7: floors (6, 0, 0), the spare unit goes to the
  // largest fractional part, val and test tie at 0.35 and val wins.
  auto r = split(7, {0.9, 0.05, 0.05}, 1);
  EXPECT_EQ(r.train.size(), 6u);
  EXPECT_EQ(r.val.size(), 1u);
  EXPECT_EQ(r.test.size(), 0u);
}

TEST(Split, PartitionIsDisjointCompleteAndSeeded) {
  for (std::size_t n : {0u, 1u, 5u, 33u, 100u}) {
    auto s = split(n, {0.6, 0.25, 0.15}, 42);
    std::set<std::size_t> seen;
    for (const auto* part : {&s.train, &s.val, &s.test}) {
      for (auto i : *part) {
        EXPECT_LT(i, n);
        EXPECT_TRUE(seen.insert(i).second);
      }
    }
    EXPECT_EQ(seen.size(), n);
    auto again = split(n, {0.6, 0.25, 0.15}, 42);
    EXPECT_EQ(again.train, s.train);
    EXPECT_EQ(again.test, s.test);
  }
  EXPECT_NE(split(100, {0.5, 0.25, 0.25}, 1).train, split(100, {0.5, 0.25, 0.25}, 2).train);
}

TEST(Split, RejectsInvalidFractions) {
  EXPECT_THROW(split(10, {0.5, 0.5, 0.5}, 0), InvalidArgument);
  EXPECT_THROW(split(10, {1.2, -0.1, -0.1}, 0), InvalidArgument);
  EXPECT_THROW(split(10, {0.3, 0.3, 0.3}, 0), InvalidArgument);
}

TEST(EpochOrder, PermutationDeterministicPerEpoch) {
  auto a = epoch_order(50, 7, 0);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<std::size_t> iota(50);
  std::iota(iota.begin(), iota.end(), 0);
  EXPECT_EQ(sorted, iota);
  EXPECT_EQ(a, epoch_order(50, 7, 0));
  EXPECT_NE(a, epoch_order(50, 7, 1));
}

class ManifestTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = scratch_dir("manifest");
    Image8 img;
    img.width = 40;
    img.height = 20;
    img.channels = 3;
    img.data.assign(40 * 20 * 3, 128);
    write_png(dir_ / "a.png", img);
  }
  fs::path write(const std::string& body) {
    auto p = dir_ / "manifest.jsonl";
    std::ofstream(p) << body;
    return p;
  }
  fs::path dir_;
};

TEST_F(ManifestTest, EmptyManifestReportsZeroRows) {
  ManifestDataset ds(write("# nothing here\n\n"), {});
  EXPECT_EQ(ds.size(), 0u);
  EXPECT_EQ(ds.report().summary(), "0 rows: 0 accepted, 0 rejected");
}

TEST_F(ManifestTest, ValidRowMatchesCropVectors) {
  ManifestOptions opt;
  opt.image_size = 16;
  ManifestDataset ds(write(R"({"image_path":"a.png","col_start":100,"col_end":300,"row_start":40,"row_end":140,"theta_h_center_deg":-55.81,"theta_v_center_deg":-64.7})"
                           "\n"),
                     opt);
  ASSERT_EQ(ds.size(), 1u);
  auto s = ds.get(0);
  EXPECT_EQ(s.id, "a");
  EXPECT_EQ(s.image.sizes(), (std::vector<int64_t>{3, 16, 16}));
  auto want = viewgeom::crop_view_vectors(ds.rows()[0].plane, ds.rows()[0].placement, 16, 16);
  EXPECT_EQ(s.view.theta_h, want.theta_h);
  EXPECT_EQ(s.view.theta_v, want.theta_v);
  EXPECT_NEAR(s.image.mean().item<float>(), 128.0f / 255 * 2 - 1, 1e-5);
}

TEST_F(ManifestTest, OutOfPlaneAndMissingRowsAreRejected) {
  ManifestDataset ds(
      write(R"({"image_path":"a.png","col_start":900,"col_end":1100,"row_start":0,"row_end":10,"theta_h_center_deg":0,"theta_v_center_deg":0})"
            "\n"
            R"({"image_path":"missing.png","col_start":0,"col_end":10,"row_start":0,"row_end":10,"theta_h_center_deg":0,"theta_v_center_deg":0})"
            "\n"
            R"({"image_path":"a.png","col_start":0,"col_end":10,"row_start":0,"row_end":10,"theta_h_center_deg":0,"theta_v_center_deg":0})"
            "\n"),
      {});
  const auto& r = ds.report();
  EXPECT_EQ(r.total, 3u);
  EXPECT_EQ(r.accepted, 1u);
  EXPECT_EQ(r.rejected, 2u);
  EXPECT_EQ(r.accepted + r.rejected, r.total);
  ASSERT_EQ(r.errors.size(), 2u);
  EXPECT_EQ(r.errors[0].line, 1u);
  EXPECT_EQ(r.errors[1].line, 2u);
  // The declared center (0, 0) disagrees with the corner placement.
  ASSERT_EQ(r.warnings.size(), 1u);
  EXPECT_EQ(r.warnings[0].line, 3u);
}

TEST_F(ManifestTest, MalformedRowNamesItsLine) {
  auto p = write(R"({"image_path":"a.png","col_start":0,"col_end":10,"row_start":0,"row_end":10,"theta_h_center_deg":0,"theta_v_center_deg":0})"
                 "\n{not json\n");
  try {
    ManifestDataset ds(p, {});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  auto q = write(R"({"image_path":"a.png","col_start":"0"})" "\n");
  EXPECT_THROW(ManifestDataset(q, {}), ParseError);
  EXPECT_THROW(ManifestDataset(dir_ / "none.jsonl", {}), NotFound);
}

TEST(SyntheticDir, RoundTripsThroughDisk) {
  auto dir = scratch_dir("synth");
  SynthOptions opt;
  opt.count = 6;
  opt.seed = 5;
  opt.ranges.image_size = 16;
  write_synthetic_dataset(dir, opt);
  auto mem = generate_synthetic(opt);
  auto ds = open_dataset(dir, 16);
  ASSERT_EQ(ds->size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    auto s = ds->get(i);
    EXPECT_EQ(s.id, mem[i].id);
    EXPECT_EQ(s.view.theta_h, mem[i].view.theta_h);
    EXPECT_EQ(s.view.theta_v, mem[i].view.theta_v);
    EXPECT_TRUE(torch::equal(s.labels, mem[i].labels));
    // 8-bit quantization of [-1, 1].
    EXPECT_LE((s.image - mem[i].image).abs().max().item<float>(), 1.0f / 255 + 1e-6f);
  }
  EXPECT_THROW(open_dataset(dir / "nope", 16), NotFound);
}

TEST(F32, LittleEndianRoundTrip) {
  auto dir = scratch_dir("f32");
  const std::vector<float> v{0.0f, -1.5f, 3.25e-7f, 1e30f};
  write_f32_le(dir / "v.f32", v);
  EXPECT_EQ(read_f32_le(dir / "v.f32"), v);
  std::ofstream(dir / "bad.f32") << "abc";
  EXPECT_THROW(read_f32_le(dir / "bad.f32"), InvalidArgument);
}

}  // namespace
}  // namespace facade::datakit
