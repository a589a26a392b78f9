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

#include "facade/cli/cli.h"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "facade/common/codec.h"
#include "facade/common/image.h"
#include "test_support.h"

namespace facade::cli {
namespace {

namespace fs = std::filesystem;
using facade::testing::random_image;
using facade::testing::scratch_dir;
using facade::testing::tiny_net;
using nlohmann::json;

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = dispatch(args, out, err);
  return {code, out.str(), err.str()};
}

// The resolved configuration every command prints first.
json printed_config(const std::string& out) {
  std::istringstream in(out);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("config ", 0) == 0) return json::parse(line.substr(7));
  }
  return nullptr;
}

fs::path write_json(const fs::path& p, const json& j) {
  std::ofstream(p) << j.dump();
  return p;
}

viewgeom::Vec3 vec(const json& a) { return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()}; }

int run_binary(const std::string& args) {
  const int status = std::system((std::string(FACADECTL_PATH) + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Precedence, FlagBeatsFileBeatsDefault) {
  auto dir = scratch_dir("cli_prec");
  auto cfg = write_json(dir / "c.json", {{"seed", 7}, {"data", {{"count", 3}, {"max_yaw_deg", 20.0}}}});
  auto r = run({"--config", cfg.string(), "synth-data", "--out", (dir / "d").string(), "--size", "16",
                "--max-yaw", "10"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  auto c = printed_config(r.out);
  EXPECT_EQ(c["command"], "synth-data");
  EXPECT_EQ(c["image_size"], 16);      // flag
  EXPECT_EQ(c["count"], 3);            // file
  EXPECT_EQ(c["max_yaw_deg"], 10.0);   // flag over file
  EXPECT_EQ(c["max_pitch_deg"], 25.0); // default
  EXPECT_EQ(c["seed"], 7);             // file
  auto s = run({"--config", cfg.string(), "--seed", "9", "synth-data", "--out", (dir / "e").string(),
                "--size", "16"});
  EXPECT_EQ(printed_config(s.out)["seed"], 9);
  EXPECT_TRUE(fs::exists(dir / "d" / "index.json"));
}

TEST(ExitCodes, UsageRuntimeAndHelp) {
  EXPECT_EQ(run({"--help"}).code, kExitOk);
  EXPECT_EQ(run({"train", "--data", "x"}).code, kExitUsage);  // no --config
  EXPECT_EQ(run({"synth-data", "--out", "x", "--bogus"}).code, kExitUsage);
  EXPECT_EQ(run({}).code, kExitUsage);
  auto r = run({"interp", "--checkpoint", "/nonexistent.fckpt", "--image", "a.png", "--out", "b.png"});
  EXPECT_EQ(r.code, kExitRuntime);
  auto err = json::parse(r.err.substr(0, r.err.find('\n')));
  EXPECT_EQ(err["error"]["kind"], "not-found");
  auto dir = scratch_dir("cli_badcfg");
  auto bad = write_json(dir / "bad.json", {{"trian", json::object()}});
  EXPECT_EQ(run({"--config", bad.string(), "geom-vectors"}).code, kExitRuntime);
}

TEST(ExitCodes, BinaryEndToEnd) {
  EXPECT_EQ(run_binary("--help"), 0);
  EXPECT_EQ(run_binary("train"), 2);
  EXPECT_EQ(run_binary("no-such-command"), 2);
  EXPECT_EQ(run_binary("improve --checkpoint /nonexistent --image x --out y"), 1);
}

TEST(Pipeline, TrainEvalInterpImprove) {
  auto dir = scratch_dir("cli_pipeline");
  ASSERT_EQ(run({"--seed", "1", "synth-data", "--out", (dir / "data").string(), "--count", "12", "--size",
                 "16"})
                .code,
            kExitOk);
  json train{{"net", tiny_net().to_json()},
             {"steps", 2},
             {"batch_size", 2},
             {"k_views", 2},
             {"mask_mode", "semantics"},
             {"checkpoint_every", 0}};
  auto cfg = write_json(dir / "train.json", {{"train", train}, {"data", {{"path", (dir / "data").string()}}}});
  auto t = run({"--config", cfg.string(), "train", "--out", (dir / "run").string()});
  ASSERT_EQ(t.code, kExitOk) << t.err;
  EXPECT_EQ(printed_config(t.out)["train"]["steps"], 2);
  const auto ckpt = (dir / "run" / "model.fckpt").string();
  ASSERT_TRUE(fs::exists(ckpt));

  auto e = run({"eval", "--checkpoint", ckpt, "--data", (dir / "data").string(), "--split", "all",
                "--max-samples", "4", "--report", (dir / "report.json").string()});
  ASSERT_EQ(e.code, kExitOk) << e.err;
  auto report = json::parse(read_file(dir / "report.json"));
  EXPECT_EQ(report["num_images"], 4);

  write_png(dir / "in.png", tensor_to_image(random_image(3, 16)));
  auto i = run({"interp", "--checkpoint", ckpt, "--image", (dir / "in.png").string(), "--out",
                (dir / "strip.png").string(), "--steps", "5", "--frames-dir", (dir / "frames").string()});
  ASSERT_EQ(i.code, kExitOk) << i.err;
  auto strip = read_png(dir / "strip.png");
  EXPECT_EQ(strip.width, 5 * 16);
  EXPECT_EQ(strip.height, 16);
  for (int f = 0; f < 5; ++f) {
    char name[32];
    std::snprintf(name, sizeof(name), "frame_%03d.png", f);
    EXPECT_TRUE(fs::exists(dir / "frames" / name));
  }
  EXPECT_EQ(run({"interp", "--checkpoint", ckpt, "--image", (dir / "in.png").string(), "--out",
                 (dir / "s4.png").string(), "--steps", "4"})
                .code,
            kExitRuntime);

  auto im = run({"improve", "--checkpoint", ckpt, "--image", (dir / "in.png").string(), "--out",
                 (dir / "improved.png").string()});
  ASSERT_EQ(im.code, kExitOk) << im.err;
  EXPECT_EQ(read_png(dir / "improved.png").width, 16);
}

TEST(MaskCommands, ExtractorAndMask) {
  auto dir = scratch_dir("cli_mask");
  ASSERT_EQ(run({"--seed", "2", "mask", "make-extractor", "--out", (dir / "vit.fckpt").string(), "--image-size",
                 "16", "--dim", "16", "--depth", "1", "--heads", "2"})
                .code,
            kExitOk);
  write_png(dir / "in.png", tensor_to_image(random_image(4, 16)));
  auto r = run({"mask", "extract", "--extractor", (dir / "vit.fckpt").string(), "--image",
                (dir / "in.png").string(), "--out", (dir / "m.png").string(), "--weights", "1", "0", "0", "0"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_EQ(read_png(dir / "m.png", true).width, 16);
  EXPECT_EQ(read_file(dir / "m.sigma.f32").size(), 16u);
}

TEST(AngleVectors, FixtureMatchesGenerator) {
  const auto fixture = json::parse(read_file(fs::path(FACADE_TEST_FIXTURES) / "angle_test_vectors.json"));
  EXPECT_EQ(fixture, angle_vectors_json(20, 0));
  ASSERT_EQ(fixture["cases"].size(), 20u);
  for (const auto& c : fixture["cases"]) {
    viewgeom::SceneSurface s;
    s.camera = vec(c["camera"]);
    s.point = vec(c["point"]);
    s.normal = vec(c["normal"]);
    const auto [th, tv] = viewgeom::point_view_targets(s);
    EXPECT_NEAR(th, c["theta_h"].get<double>(), 1e-5);
    EXPECT_NEAR(tv, c["theta_v"].get<double>(), 1e-5);
  }
  auto r = run({"geom-vectors", "--count", "20"});
  ASSERT_EQ(r.code, kExitOk);
  const auto body = r.out.substr(r.out.find('\n') + 1);
  EXPECT_EQ(json::parse(body), fixture);
}

}  // namespace
}  // namespace facade::cli
