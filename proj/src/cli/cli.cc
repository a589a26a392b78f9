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

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "facade/common/codec.h"
#include "facade/common/errors.h"
#include "facade/common/image.h"
#include "facade/datakit/datakit.h"
#include "facade/evalkit/evalkit.h"
#include "facade/maskmod/mask.h"
#include "facade/servekit/servekit.h"
#include "facade/trainkit/trainkit.h"
#include "facade/viewgeom/viewgeom.h"

namespace facade::cli {
namespace {

using nlohmann::json;

// Value resolution: explicit flag, then config file, then default.
template <class T>
T pick(const CLI::Option* opt, const T& flag_value, const json& section, const char* key,
       const T& fallback) {
  if (opt != nullptr && opt->count() > 0) return flag_value;
  if (section.is_object() && section.contains(key)) return section.at(key).get<T>();
  return fallback;
}

json section_of(const json& file, const char* name) {
  if (!file.contains(name)) return json::object();
  const auto& s = file.at(name);
  if (!s.is_object()) throw InvalidArgument(std::string("config section '") + name + "' must be an object");
  return s;
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw InvalidArgument("config " + path + ": " + e.what());
  }
  if (!j.is_object()) throw InvalidArgument("config " + path + ": top level must be an object");
  static const std::set<std::string> known{"seed", "data", "train", "eval", "serve",
                                           "interp", "mask"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw InvalidArgument("config " + path + ": unknown section '" + k + "'");
  }
  return j;
}

std::array<double, 3> parse_splits(const json& data) {
  std::array<double, 3> f{0.9, 0.05, 0.05};
  if (data.contains("splits")) {
    const auto v = data.at("splits").get<std::vector<double>>();
    if (v.size() != 3) throw InvalidArgument("data.splits must hold three fractions");
    std::copy(v.begin(), v.end(), f.begin());
  }
  return f;
}

std::shared_ptr<const datakit::Dataset> select_split(std::shared_ptr<const datakit::Dataset> ds,
                                                     const std::string& which,
                                                     const std::array<double, 3>& fractions,
                                                     std::uint64_t split_seed) {
  if (which == "all") return ds;
  const auto sp = datakit::split(ds->size(), fractions, split_seed);
  const std::vector<std::size_t>* idx = which == "train" ? &sp.train
                                        : which == "val" ? &sp.val
                                        : which == "test" ? &sp.test
                                                          : nullptr;
  if (idx == nullptr) throw InvalidArgument("split must be one of train, val, test, all");
  return std::make_shared<datakit::SubsetDataset>(std::move(ds), *idx);
}

torch::Tensor load_image(const std::string& path, int size) {
  auto x = image_to_tensor(read_png(path));
  if (x.size(1) != size || x.size(2) != size) x = resize_chw(x, size, size);
  return x;
}

void print_config(std::ostream& out, const std::string& command, json resolved) {
  resolved["command"] = command;
  out << "config " << resolved.dump() << '\n';
}

void wait_for_stop(const std::atomic<bool>* stop) {
  while (stop == nullptr || !stop->load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
}

}  // namespace

json angle_vectors_json(int count, std::uint64_t seed) {
  json cases = json::array();
  for (const auto& c : viewgeom::angle_test_cases(count, seed)) {
    cases.push_back({{"camera", c.camera},
                     {"point", c.point},
                     {"normal", c.normal},
                     {"front_facing", c.front_facing},
                     {"theta_h", c.theta_h},
                     {"theta_v", c.theta_v},
                     {"degenerate_h", c.degenerate_h},
                     {"degenerate_v", c.degenerate_v}});
  }
  return {{"format", "facade-angle-vectors"},
          {"version", 1},
          {"seed", seed},
          {"fov_bound_deg", viewgeom::kFovBoundDeg},
          {"tolerance", 1e-6},
          {"cases", cases}};
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const std::atomic<bool>* stop) {
  CLI::App app{"Facade texture editing: data, training, evaluation and serving"};
  app.name("facadectl");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::uint64_t seed = 0;
  std::string config_path;
  auto* seed_opt = app.add_option("--seed", seed, "Global seed (overrides config)");
  app.add_option("--config", config_path, "JSON config with per-command sections");

  // ---- synth-data
  auto* synth = app.add_subcommand("synth-data", "Render a synthetic facade dataset");
  std::string synth_out;
  std::size_t synth_count = 256;
  int synth_size = 32;
  double max_yaw = 50.0, max_pitch = 25.0;
  synth->add_option("--out", synth_out, "Output directory")->required();
  auto* o_count = synth->add_option("--count", synth_count, "Number of samples");
  auto* o_size = synth->add_option("--size", synth_size, "Image size in pixels");
  auto* o_yaw = synth->add_option("--max-yaw", max_yaw, "Camera yaw range (degrees)");
  auto* o_pitch = synth->add_option("--max-pitch", max_pitch, "Camera pitch range (degrees)");

  // ---- train
  auto* train = app.add_subcommand("train", "Train a model (requires --config)");
  std::string t_data, t_out, t_resume, t_mask, t_extractor;
  std::int64_t t_steps = 0, t_eval_every = 0, t_ckpt_every = 0;
  int t_batch = 0, t_k = 0;
  std::uint64_t t_split_seed = 0;
  auto* o_tdata = train->add_option("--data", t_data, "Dataset directory or manifest");
  auto* o_tout = train->add_option("--out", t_out, "Output directory");
  train->add_option("--resume", t_resume, "Training state to resume from");
  auto* o_steps = train->add_option("--steps", t_steps, "Total steps");
  auto* o_batch = train->add_option("--batch-size", t_batch, "Batch size");
  auto* o_k = train->add_option("--k-views", t_k, "Novel views per image");
  auto* o_mask = train->add_option("--mask-mode", t_mask, "none | semantics | dino");
  auto* o_ext = train->add_option("--extractor", t_extractor, "Frozen ViT archive (dino mode)");
  auto* o_eval_every = train->add_option("--eval-every", t_eval_every, "Validation interval");
  auto* o_ckpt = train->add_option("--checkpoint-every", t_ckpt_every, "Checkpoint interval");
  auto* o_tsplit = train->add_option("--split-seed", t_split_seed, "Seed of the data split");

  // ---- eval
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string e_ckpt, e_data, e_split = "test", e_report;
  std::size_t e_max = 64;
  std::uint64_t e_split_seed = 0;
  bool e_no_strips = false;
  eval->add_option("--checkpoint", e_ckpt, "Model checkpoint")->required();
  auto* o_edata = eval->add_option("--data", e_data, "Dataset directory or manifest");
  auto* o_esplit = eval->add_option("--split", e_split, "train | val | test | all");
  eval->add_option("--report", e_report, "Write the metrics JSON here");
  auto* o_emax = eval->add_option("--max-samples", e_max, "Evaluate at most this many images");
  auto* o_esseed = eval->add_option("--split-seed", e_split_seed, "Seed of the data split");
  eval->add_flag("--no-strips", e_no_strips, "Skip interpolation strips");

  // ---- mask
  auto* mask = app.add_subcommand("mask", "Edit-mask tools");
  mask->require_subcommand(1);
  auto* mk_ext = mask->add_subcommand("make-extractor", "Write a seeded ViT key extractor");
  std::string mk_out;
  int mk_image = 32, mk_patch = 4, mk_dim = 64, mk_depth = 4, mk_heads = 4;
  mk_ext->add_option("--out", mk_out, "Output archive")->required();
  mk_ext->add_option("--image-size", mk_image, "Position table size");
  mk_ext->add_option("--patch-size", mk_patch, "Patch size");
  mk_ext->add_option("--dim", mk_dim, "Embedding width");
  mk_ext->add_option("--depth", mk_depth, "Number of blocks");
  mk_ext->add_option("--heads", mk_heads, "Attention heads");
  auto* m_extract = mask->add_subcommand("extract", "Compute the blended edit mask of an image");
  std::string mx_ext, mx_image, mx_out, mx_ckpt, mx_components;
  std::vector<double> mx_weights;
  m_extract->add_option("--extractor", mx_ext, "ViT key extractor archive")->required();
  m_extract->add_option("--image", mx_image, "Input PNG")->required();
  m_extract->add_option("--out", mx_out, "Output mask PNG")->required();
  auto* o_w = m_extract->add_option("--weights", mx_weights, "Four blend weights")->expected(4);
  auto* o_mckpt = m_extract->add_option("--checkpoint", mx_ckpt, "Take blend weights from a model");
  o_w->excludes(o_mckpt);
  m_extract->add_option("--components-dir", mx_components, "Also write the four PCA channels");

  // ---- interp
  auto* interp = app.add_subcommand("interp", "Interpolate the viewing angle of one facade");
  std::string i_ckpt, i_image, i_out, i_axis = "h", i_frames;
  int i_steps = 5;
  double i_span = 0.4, i_th = 0.0, i_tv = 0.0;
  interp->add_option("--checkpoint", i_ckpt, "Model checkpoint")->required();
  interp->add_option("--image", i_image, "Input PNG")->required();
  interp->add_option("--out", i_out, "Filmstrip PNG")->required();
  auto* o_isteps = interp->add_option("--steps", i_steps, "Number of frames (odd)");
  auto* o_ispan = interp->add_option("--span", i_span, "Offset range [-span, span]");
  auto* o_iaxis = interp->add_option("--axis", i_axis, "h | v");
  interp->add_option("--theta-h", i_th, "Input horizontal view (constant)");
  interp->add_option("--theta-v", i_tv, "Input vertical view (constant)");
  interp->add_option("--frames-dir", i_frames, "Also write each frame here");

  // ---- improve
  auto* improve = app.add_subcommand("improve", "Re-render a facade at the frontal view");
  std::string im_ckpt, im_image, im_out;
  improve->add_option("--checkpoint", im_ckpt, "Model checkpoint")->required();
  improve->add_option("--image", im_image, "Input PNG")->required();
  improve->add_option("--out", im_out, "Output PNG")->required();

  // ---- serve
  auto* serve = app.add_subcommand("serve", "Run the texture service");
  std::string s_ckpt, s_host = "127.0.0.1";
  unsigned short s_port = 8080;
  std::size_t s_max_batch = 8;
  std::int64_t s_window = 2000;
  bool s_no_batch = false;
  auto* o_sckpt = serve->add_option("--checkpoint", s_ckpt, "Model checkpoint (degraded without)");
  auto* o_host = serve->add_option("--host", s_host, "Bind address");
  auto* o_port = serve->add_option("--port", s_port, "Port (0 picks one)");
  auto* o_smax = serve->add_option("--max-batch", s_max_batch, "Micro-batch size limit");
  auto* o_swin = serve->add_option("--batch-window-us", s_window, "Micro-batch window");
  auto* o_snob = serve->add_flag("--no-micro-batch", s_no_batch, "One forward pass per request");

  // ---- geom-vectors
  auto* geom = app.add_subcommand("geom-vectors", "Write the shared angle test vectors");
  std::string g_out;
  int g_count = 20;
  geom->add_option("--out", g_out, "Output JSON (stdout when omitted)");
  geom->add_option("--count", g_count, "Number of configurations (>= 4)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "facadectl: " << e.what() << "\nRun with --help for usage.\n";
    return kExitUsage;
  }

  try {
    const json file = load_config(config_path);
    const std::uint64_t file_seed = file.value("seed", std::uint64_t{0});
    const std::uint64_t global_seed = seed_opt->count() ? seed : file_seed;
    const json data_sec = section_of(file, "data");

    if (*synth) {
      datakit::SynthOptions opt;
      opt.count = pick(o_count, synth_count, data_sec, "count", opt.count);
      opt.seed = global_seed;
      opt.ranges.image_size = pick(o_size, synth_size, data_sec, "image_size", 32);
      opt.ranges.max_yaw_deg = pick(o_yaw, max_yaw, data_sec, "max_yaw_deg", 50.0);
      opt.ranges.max_pitch_deg = pick(o_pitch, max_pitch, data_sec, "max_pitch_deg", 25.0);
      print_config(out, "synth-data",
                   {{"out", synth_out},
                    {"count", opt.count},
                    {"seed", opt.seed},
                    {"image_size", opt.ranges.image_size},
                    {"max_yaw_deg", opt.ranges.max_yaw_deg},
                    {"max_pitch_deg", opt.ranges.max_pitch_deg}});
      datakit::write_synthetic_dataset(synth_out, opt);
      out << json{{"written", opt.count}, {"out", synth_out}}.dump() << '\n';
      return kExitOk;
    }

    if (*train) {
      if (config_path.empty()) {
        err << "facadectl train: --config is required\nRun with --help for usage.\n";
        return kExitUsage;
      }
      json tsec = section_of(file, "train");
      const std::string file_out = tsec.value("out_dir", std::string());
      tsec.erase("out_dir");
      // Mode and extractor are validated together, so the flags go in first.
      if (o_mask->count()) tsec["mask_mode"] = t_mask;
      if (o_ext->count()) tsec["extractor"] = t_extractor;
      auto cfg = trainkit::TrainConfig::from_json(tsec);
      if (seed_opt->count()) cfg.seed = seed;
      else if (!tsec.contains("seed") && file.contains("seed")) cfg.seed = file_seed;
      if (o_steps->count()) cfg.steps = t_steps;
      if (o_batch->count()) cfg.batch_size = t_batch;
      if (o_k->count()) cfg.k_views = t_k;
      if (o_eval_every->count()) cfg.eval_every = t_eval_every;
      if (o_ckpt->count()) cfg.checkpoint_every = t_ckpt_every;
      cfg.validate();
      const std::string data_path = pick(o_tdata, t_data, data_sec, "path", std::string());
      const std::string out_dir = o_tout->count() ? t_out : file_out;
      if (data_path.empty()) throw InvalidArgument("train needs --data or data.path");
      if (out_dir.empty()) throw InvalidArgument("train needs --out or train.out_dir");
      const auto fractions = parse_splits(data_sec);
      const auto split_seed = pick(o_tsplit, t_split_seed, data_sec, "split_seed", std::uint64_t{0});
      print_config(out, "train",
                   {{"train", cfg.to_json()},
                    {"data", {{"path", data_path}, {"splits", fractions}, {"split_seed", split_seed}}},
                    {"out_dir", out_dir},
                    {"resume", t_resume}});

      std::shared_ptr<const datakit::Dataset> ds = datakit::open_dataset(data_path, cfg.net.image_size);
      const auto sp = datakit::split(ds->size(), fractions, split_seed);
      auto train_set = std::make_shared<datakit::SubsetDataset>(ds, sp.train);
      trainkit::FitOptions fo;
      fo.out_dir = out_dir;
      if (!sp.val.empty()) fo.val = std::make_shared<datakit::SubsetDataset>(ds, sp.val);
      if (!t_resume.empty()) fo.resume = t_resume;
      fo.stop = stop;
      fo.on_step = [&out](std::int64_t step, const losses::LossReport& r) {
        if (step % 100 == 0) out << json{{"step", step}, {"loss", r.to_json()}}.dump() << '\n';
      };
      const auto result = trainkit::fit(cfg, train_set, fo);
      out << json{{"steps_done", result.steps_done},
                  {"interrupted", result.interrupted},
                  {"out_dir", out_dir}}
                 .dump()
          << '\n';
      return kExitOk;
    }

    if (*eval) {
      const json esec = section_of(file, "eval");
      evalkit::EvalOptions opt;
      opt.max_samples = pick(o_emax, e_max, esec, "max_samples", opt.max_samples);
      opt.strip_steps = esec.value("strip_steps", opt.strip_steps);
      opt.strip_span = esec.value("strip_span", opt.strip_span);
      opt.extractor_seed = esec.value("extractor_seed", opt.extractor_seed);
      opt.seed = global_seed;
      opt.strips = !e_no_strips && esec.value("strips", true);
      const std::string data_path = pick(o_edata, e_data, data_sec, "path", std::string());
      if (data_path.empty()) throw InvalidArgument("eval needs --data or data.path");
      const std::string which = pick(o_esplit, e_split, esec, "split", std::string("test"));
      const auto fractions = parse_splits(data_sec);
      const auto split_seed = pick(o_esseed, e_split_seed, data_sec, "split_seed", std::uint64_t{0});
      print_config(out, "eval",
                   {{"checkpoint", e_ckpt},
                    {"data", {{"path", data_path}, {"splits", fractions}, {"split_seed", split_seed}}},
                    {"split", which},
                    {"max_samples", opt.max_samples},
                    {"strip_steps", opt.strip_steps},
                    {"strip_span", opt.strip_span},
                    {"extractor_seed", opt.extractor_seed},
                    {"seed", opt.seed},
                    {"strips", opt.strips}});
      auto model = nets::load_bundle(e_ckpt);
      auto ds = select_split(datakit::open_dataset(data_path, model.config.image_size), which,
                             fractions, split_seed);
      const auto report = evalkit::evaluate(model, *ds, opt).to_json();
      if (!e_report.empty()) write_file_atomic(e_report, report.dump(2) + "\n");
      out << report.dump() << '\n';
      return kExitOk;
    }

    if (*mk_ext) {
      maskmod::VitConfig vc;
      vc.image_size = mk_image;
      vc.patch_size = mk_patch;
      vc.embed_dim = mk_dim;
      vc.depth = mk_depth;
      vc.heads = mk_heads;
      print_config(out, "mask make-extractor",
                   {{"out", mk_out}, {"seed", global_seed}, {"vit", vc.to_json()}});
      auto ext = maskmod::make_seeded_extractor(vc, global_seed);
      maskmod::save_extractor(ext, mk_out);
      return kExitOk;
    }

    if (*m_extract) {
      torch::Tensor w = torch::zeros({maskmod::kNumComponents});
      if (!mx_ckpt.empty()) {
        w = nets::load_bundle(mx_ckpt).blend_weights.detach().clone();
      } else if (o_w->count()) {
        w = torch::tensor(std::vector<float>(mx_weights.begin(), mx_weights.end()));
      }
      std::vector<double> wv(w.data_ptr<float>(), w.data_ptr<float>() + w.numel());
      print_config(out, "mask extract",
                   {{"extractor", mx_ext}, {"image", mx_image}, {"out", mx_out}, {"weights", wv}});
      torch::NoGradGuard no_grad;
      auto ext = maskmod::load_extractor(mx_ext);
      auto x = image_to_tensor(read_png(mx_image));
      const auto pcs = maskmod::fit_pca(maskmod::extract_patch_features(ext, x));
      const auto m = maskmod::blend_mask(pcs.channels, {w}, static_cast<int>(x.size(1)),
                                         static_cast<int>(x.size(2)));
      write_png(mx_out, tensor_to_mask(m.m));
      // Sidecar: sigmoid(w) as four little-endian floats.
      const auto sig = torch::sigmoid(w);
      datakit::write_f32_le(std::filesystem::path(mx_out).replace_extension(".sigma.f32"),
                            std::vector<float>(sig.data_ptr<float>(), sig.data_ptr<float>() + 4));
      if (!mx_components.empty()) {
        std::filesystem::create_directories(mx_components);
        for (int k = 0; k < maskmod::kNumComponents; ++k) {
          write_png(std::filesystem::path(mx_components) / ("component_" + std::to_string(k) + ".png"),
                    tensor_to_mask(pcs.channels[k]));
        }
      }
      return kExitOk;
    }

    if (*interp) {
      const json isec = section_of(file, "interp");
      const int steps = pick(o_isteps, i_steps, isec, "steps", 5);
      const double span = pick(o_ispan, i_span, isec, "span", 0.4);
      const std::string axis = pick(o_iaxis, i_axis, isec, "axis", std::string("h"));
      if (axis != "h" && axis != "v") throw InvalidArgument("axis must be h or v");
      print_config(out, "interp",
                   {{"checkpoint", i_ckpt},
                    {"image", i_image},
                    {"out", i_out},
                    {"steps", steps},
                    {"span", span},
                    {"axis", axis},
                    {"theta_h", i_th},
                    {"theta_v", i_tv}});
      auto model = nets::load_bundle(i_ckpt);
      const int n = model.config.image_size;
      const auto view = viewgeom::constant_view(n, n, i_th, i_tv);
      viewgeom::check_view_range(view);
      const auto strip = evalkit::interpolate(
          model, load_image(i_image, n), view,
          axis == "h" ? evalkit::Axis::kHorizontal : evalkit::Axis::kVertical, steps, span);
      write_png(i_out, filmstrip(strip.frames));
      if (!i_frames.empty()) {
        std::filesystem::create_directories(i_frames);
        for (std::size_t i = 0; i < strip.frames.size(); ++i) {
          char name[32];
          std::snprintf(name, sizeof(name), "frame_%03zu.png", i);
          write_png(std::filesystem::path(i_frames) / name, tensor_to_image(strip.frames[i]));
        }
      }
      out << json{{"frames", strip.frames.size()}, {"offsets", strip.offsets}}.dump() << '\n';
      return kExitOk;
    }

    if (*improve) {
      print_config(out, "improve", {{"checkpoint", im_ckpt}, {"image", im_image}, {"out", im_out}});
      auto model = nets::load_bundle(im_ckpt);
      const int n = model.config.image_size;
      write_png(im_out, tensor_to_image(evalkit::improve_facade(model, load_image(im_image, n))));
      return kExitOk;
    }

    if (*serve) {
      const json ssec = section_of(file, "serve");
      servekit::ServiceOptions so;
      so.micro_batch = o_snob->count() ? false : ssec.value("micro_batch", true);
      so.max_batch = pick(o_smax, s_max_batch, ssec, "max_batch", so.max_batch);
      so.batch_window = std::chrono::microseconds(
          pick(o_swin, s_window, ssec, "batch_window_us", std::int64_t{2000}));
      const std::string host = pick(o_host, s_host, ssec, "host", std::string("127.0.0.1"));
      const auto port = pick(o_port, s_port, ssec, "port", static_cast<unsigned short>(8080));
      const std::string ckpt = pick(o_sckpt, s_ckpt, ssec, "checkpoint", std::string());
      print_config(out, "serve",
                   {{"checkpoint", ckpt},
                    {"host", host},
                    {"port", port},
                    {"micro_batch", so.micro_batch},
                    {"max_batch", so.max_batch},
                    {"batch_window_us", so.batch_window.count()}});
      servekit::TextureService svc(so);
      if (!ckpt.empty()) svc.load_model(ckpt);
      servekit::HttpServer server(svc, host, port);
      server.start();
      out << json{{"listening", host}, {"port", server.port()}, {"status", svc.health().status}}.dump()
          << '\n'
          << std::flush;
      wait_for_stop(stop);
      server.stop();
      return kExitOk;
    }

    if (*geom) {
      print_config(out, "geom-vectors", {{"count", g_count}, {"seed", global_seed}, {"out", g_out}});
      const auto doc = angle_vectors_json(g_count, global_seed);
      if (g_out.empty()) {
        out << doc.dump(2) << '\n';
      } else {
        write_file_atomic(g_out, doc.dump(2) + "\n");
      }
      return kExitOk;
    }
    return kExitUsage;
  } catch (const std::exception& e) {
    err << json{{"error", {{"kind", error_kind(e)}, {"message", e.what()}}}}.dump() << '\n';
    return kExitRuntime;
  }
}

}  // namespace facade::cli
