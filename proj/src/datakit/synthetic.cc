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

#include <algorithm>
#include <cmath>
#include <numbers>

#include "facade/common/errors.h"
#include "facade/datakit/datakit.h"

namespace facade::datakit {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

struct Rect {
  double x0, x1, y0, y1;  // y0 < y1, facade units, y up
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
};

struct Opening {
  Rect rect;
  int label;
};

struct Layout {
  double facade_h;
  std::vector<Opening> openings;
  std::vector<double> bands;  // y of belt courses
  double band_half;
};

Layout make_layout(const SyntheticSpec& s) {
  Layout l;
  l.facade_h = static_cast<double>(s.height) / s.width;
  const double cw = 1.0 / s.window_cols;
  const double ch = l.facade_h / s.window_rows;
  const double hw = 0.5 * s.window_width * cw;
  const double hh = 0.5 * s.window_height * ch;
  const int door_col = s.window_cols / 2;
  for (int r = 0; r < s.window_rows; ++r) {
    for (int c = 0; c < s.window_cols; ++c) {
      const double cx = -0.5 + (c + 0.5) * cw;
      const double cy = 0.5 * l.facade_h - (r + 0.5) * ch;
      if (s.door && r == s.window_rows - 1 && c == door_col) {
        const double bottom = -0.5 * l.facade_h;
        l.openings.push_back({{cx - hw, cx + hw, bottom, bottom + 0.8 * ch}, kDoor});
      } else {
        l.openings.push_back({{cx - hw, cx + hw, cy - hh, cy + hh}, kWindow});
      }
    }
  }
  for (int r = 1; r < s.window_rows; ++r) l.bands.push_back(0.5 * l.facade_h - r * ch);
  l.band_half = 0.05 * ch;
  return l;
}

struct Palette {
  Rgb wall, band, glass, frame, reveal, door;
};

Rgb clamp01(Rgb c) {
  for (auto& v : c) v = std::clamp(v, 0.0, 1.0);
  return c;
}

Rgb scale(const Rgb& c, double k) { return clamp01({c[0] * k, c[1] * k, c[2] * k}); }

Palette jittered(const SyntheticSpec& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-s.color_jitter, s.color_jitter);
  const double global = u(rng);
  auto j = [&](const Rgb& c) {
    Rgb out;
    for (int k = 0; k < 3; ++k) out[k] = c[k] + global + u(rng);
    return clamp01(out);
  };
  Palette p;
  p.wall = j(s.wall);
  p.band = j(s.band);
  p.glass = j(s.glass);
  p.frame = j(s.frame);
  p.reveal = j(s.reveal);
  p.door = j(s.door_color);
  return p;
}

// Color seen along the ray from `cam` through facade point (x, y, 0).
Rgb shade(const Layout& l, const SyntheticSpec& s, const Palette& p, const viewgeom::Vec3& cam,
          double x, double y) {
  const Opening* hit = nullptr;
  for (const auto& o : l.openings) {
    if (o.rect.contains(x, y)) {
      hit = &o;
      break;
    }
  }
  if (!hit) {
    for (double b : l.bands) {
      if (std::abs(y - b) < l.band_half) return p.band;
    }
    return p.wall;
  }
  const Rect& r = hit->rect;
  const double dx = x - cam[0], dy = y - cam[1], dz = -cam[2];
  // Parameter along the ray from the facade surface down to the back plane.
  const double s_back = s.inset_depth / -dz;
  auto exit_param = [](double pos, double dir, double lo, double hi) {
    if (dir > 0) return (hi - pos) / dir;
    if (dir < 0) return (lo - pos) / dir;
    return std::numeric_limits<double>::infinity();
  };
  const double sx = exit_param(x, dx, r.x0, r.x1);
  const double sy = exit_param(y, dy, r.y0, r.y1);
  if (sx < s_back || sy < s_back) {
    if (sx <= sy) return p.reveal;
    // Looking up sees the soffit, looking down the sill.
    return dy > 0 ? scale(p.reveal, 0.75) : scale(p.reveal, 1.15);
  }
  const double qx = x + s_back * dx, qy = y + s_back * dy;
  const double w = r.x1 - r.x0, h = r.y1 - r.y0;
  const double border = 0.12 * std::min(w, h);
  const bool on_border =
      qx - r.x0 < border || r.x1 - qx < border || qy - r.y0 < border || r.y1 - qy < border;
  if (hit->label == kDoor) return on_border ? p.frame : p.door;
  const double mx = 0.5 * (r.x0 + r.x1), my = 0.5 * (r.y0 + r.y1);
  const bool mullion = std::abs(qx - mx) < 0.5 * border || std::abs(qy - my) < 0.5 * border;
  return on_border || mullion ? p.frame : p.glass;
}

double facade_x(const SyntheticSpec& s, double col) { return col / s.width - 0.5; }

double facade_y(const SyntheticSpec& s, double row) {
  const double fh = static_cast<double>(s.height) / s.width;
  return 0.5 * fh - row / s.height * fh;
}

}  // namespace

void SyntheticSpec::validate() const {
  if (width <= 0 || height <= 0) throw InvalidArgument("synthetic: image size must be positive");
  if (window_rows <= 0 || window_cols <= 0) {
    throw InvalidArgument("synthetic: window grid must be positive");
  }
  if (!(window_width > 0 && window_width < 1) || !(window_height > 0 && window_height < 1)) {
    throw InvalidArgument("synthetic: window fractions must lie in (0, 1)");
  }
  if (!(inset_depth >= 0)) throw InvalidArgument("synthetic: inset depth must be >= 0");
  if (std::abs(yaw_deg) >= 89.0 || std::abs(pitch_deg) >= 89.0) {
    throw InvalidArgument("synthetic: yaw and pitch must lie in (-89, 89) degrees");
  }
  if (!(camera_distance > 1.0)) throw InvalidArgument("synthetic: camera distance must exceed 1");
  if (supersample < 1) throw InvalidArgument("synthetic: supersample must be >= 1");
}

nlohmann::json SyntheticSpec::to_json() const {
  return {{"width", width},
          {"height", height},
          {"window_rows", window_rows},
          {"window_cols", window_cols},
          {"window_width", window_width},
          {"window_height", window_height},
          {"inset_depth", inset_depth},
          {"door", door},
          {"wall", wall},
          {"band", band},
          {"glass", glass},
          {"frame", frame},
          {"reveal", reveal},
          {"door_color", door_color},
          {"yaw_deg", yaw_deg},
          {"pitch_deg", pitch_deg},
          {"camera_distance", camera_distance},
          {"color_jitter", color_jitter},
          {"supersample", supersample}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) {
  SyntheticSpec s;
  s.width = j.value("width", s.width);
  s.height = j.value("height", s.height);
  s.window_rows = j.value("window_rows", s.window_rows);
  s.window_cols = j.value("window_cols", s.window_cols);
  s.window_width = j.value("window_width", s.window_width);
  s.window_height = j.value("window_height", s.window_height);
  s.inset_depth = j.value("inset_depth", s.inset_depth);
  s.door = j.value("door", s.door);
  s.wall = j.value("wall", s.wall);
  s.band = j.value("band", s.band);
  s.glass = j.value("glass", s.glass);
  s.frame = j.value("frame", s.frame);
  s.reveal = j.value("reveal", s.reveal);
  s.door_color = j.value("door_color", s.door_color);
  s.yaw_deg = j.value("yaw_deg", s.yaw_deg);
  s.pitch_deg = j.value("pitch_deg", s.pitch_deg);
  s.camera_distance = j.value("camera_distance", s.camera_distance);
  s.color_jitter = j.value("color_jitter", s.color_jitter);
  s.supersample = j.value("supersample", s.supersample);
  s.validate();
  return s;
}

viewgeom::Vec3 synthetic_camera(const SyntheticSpec& s) {
  const double yaw = s.yaw_deg * kDeg, pitch = s.pitch_deg * kDeg;
  const double d = s.camera_distance;
  return {-d * std::sin(yaw) * std::cos(pitch), d * std::sin(pitch),
          d * std::cos(yaw) * std::cos(pitch)};
}

viewgeom::SurfaceGrid synthetic_surface(const SyntheticSpec& s) {
  viewgeom::SurfaceGrid g;
  g.rows = s.height;
  g.cols = s.width;
  const auto cam = synthetic_camera(s);
  g.texels.reserve(static_cast<std::size_t>(g.rows) * g.cols);
  for (int i = 0; i < s.height; ++i) {
    for (int j = 0; j < s.width; ++j) {
      viewgeom::SceneSurface t;
      t.point = {facade_x(s, j + 0.5), facade_y(s, i + 0.5), 0.0};
      t.normal = {0.0, 0.0, 1.0};
      t.camera = cam;
      g.texels.push_back(t);
    }
  }
  return g;
}

FacadeSample render_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  const Layout layout = make_layout(spec);
  const Palette pal = jittered(spec, seed);
  const auto cam = synthetic_camera(spec);
  const int H = spec.height, W = spec.width, ss = spec.supersample;

  auto image = torch::empty({3, H, W}, torch::kFloat32);
  auto labels = torch::zeros({H, W}, torch::kInt64);
  auto img = image.accessor<float, 3>();
  auto lab = labels.accessor<int64_t, 2>();
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      Rgb acc{0, 0, 0};
      for (int a = 0; a < ss; ++a) {
        for (int b = 0; b < ss; ++b) {
          const double x = facade_x(spec, j + (b + 0.5) / ss);
          const double y = facade_y(spec, i + (a + 0.5) / ss);
          const Rgb c = shade(layout, spec, pal, cam, x, y);
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
        }
      }
      for (int k = 0; k < 3; ++k) {
        // Quantize so in-memory samples equal their PNG round trip.
        const double q = std::round(std::clamp(acc[k] / (ss * ss), 0.0, 1.0) * 255.0);
        img[k][i][j] = static_cast<float>(q / 127.5 - 1.0);
      }
      const double x = facade_x(spec, j + 0.5), y = facade_y(spec, i + 0.5);
      for (const auto& o : layout.openings) {
        if (o.rect.contains(x, y)) {
          lab[i][j] = o.label;
          break;
        }
      }
    }
  }

  FacadeSample s;
  s.image = image;
  s.labels = labels;
  s.source = Source::kSynthetic;
  s.view.theta_h.resize(W);
  s.view.theta_v.resize(H);
  // Exact angles: the facade lies in z = 0 and faces the camera, so the
  // horizontal angle depends on x only and the vertical on y only.
  const double axial = cam[2];
  for (int j = 0; j < W; ++j) {
    const double deg = std::atan2(facade_x(spec, j + 0.5) - cam[0], axial) / kDeg;
    s.view.theta_h[j] = static_cast<float>(std::clamp(deg / viewgeom::kFovBoundDeg, -1.0, 1.0));
  }
  for (int i = 0; i < H; ++i) {
    const double deg = std::atan2(cam[1] - facade_y(spec, i + 0.5), axial) / kDeg;
    s.view.theta_v[i] = static_cast<float>(std::clamp(deg / viewgeom::kFovBoundDeg, -1.0, 1.0));
  }
  return s;
}

SyntheticSpec random_spec(const SyntheticRanges& ranges, std::mt19937_64& rng) {
  static const std::vector<Palette> kPalettes = {
      {{0.78, 0.70, 0.60}, {0.62, 0.55, 0.47}, {0.20, 0.27, 0.36}, {0.93, 0.92, 0.88},
       {0.55, 0.50, 0.44}, {0.35, 0.22, 0.15}},
      {{0.66, 0.36, 0.28}, {0.85, 0.80, 0.72}, {0.16, 0.22, 0.30}, {0.95, 0.95, 0.95},
       {0.48, 0.28, 0.22}, {0.20, 0.30, 0.22}},
      {{0.88, 0.86, 0.80}, {0.70, 0.68, 0.62}, {0.25, 0.33, 0.42}, {0.30, 0.30, 0.32},
       {0.68, 0.66, 0.60}, {0.50, 0.12, 0.10}},
      {{0.55, 0.58, 0.62}, {0.42, 0.45, 0.50}, {0.12, 0.16, 0.22}, {0.85, 0.85, 0.80},
       {0.40, 0.42, 0.46}, {0.28, 0.20, 0.12}},
  };
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  SyntheticSpec s;
  s.width = s.height = ranges.image_size;
  s.window_rows = pick(2, 4);
  s.window_cols = pick(2, 4);
  s.window_width = uni(0.40, 0.65);
  s.window_height = uni(0.45, 0.70);
  s.inset_depth = uni(0.05, 0.10);
  s.door = uni(0.0, 1.0) < 0.6;
  const auto& p = kPalettes[static_cast<std::size_t>(pick(0, static_cast<int>(kPalettes.size()) - 1))];
  s.wall = p.wall;
  s.band = p.band;
  s.glass = p.glass;
  s.frame = p.frame;
  s.reveal = p.reveal;
  s.door_color = p.door;
  s.yaw_deg = uni(-ranges.max_yaw_deg, ranges.max_yaw_deg);
  s.pitch_deg = uni(-ranges.max_pitch_deg, ranges.max_pitch_deg);
  s.camera_distance = uni(3.0, 6.0);
  return s;
}

FacadeSample flip_horizontal(const FacadeSample& s) {
  FacadeSample out = s;
  out.image = s.image.flip({-1}).contiguous();
  if (s.labels.defined()) out.labels = s.labels.flip({-1}).contiguous();
  out.view = viewgeom::mirror_horizontal(s.view);
  return out;
}

torch::Tensor window_mask(const FacadeSample& s) {
  if (!s.labels.defined()) throw InvalidArgument("sample " + s.id + " has no annotation");
  return (s.labels == kWindow).logical_or(s.labels == kDoor).to(torch::kFloat32);
}

}  // namespace facade::datakit
