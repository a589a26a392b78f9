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

#include "facade/viewgeom/viewgeom.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "facade/common/errors.h"

namespace facade::viewgeom {
namespace {

constexpr double kDegenerateNorm = 1e-9;
constexpr double kRadToDeg = 180.0 / std::numbers::pi;

std::vector<float> lookup_axis(int n) {
  std::vector<float> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out[i] = static_cast<float>(-1.0 + 2.0 * (i + 0.5) / n);
  }
  return out;
}

float clamp_unit(double x) { return static_cast<float>(std::clamp(x, -1.0, 1.0)); }

}  // namespace

bool SceneTargets::any_degenerate() const {
  return std::find(degenerate_h.begin(), degenerate_h.end(), true) != degenerate_h.end() ||
         std::find(degenerate_v.begin(), degenerate_v.end(), true) != degenerate_v.end();
}

std::pair<std::vector<float>, std::vector<float>> plane_lookup_vectors(
    const RectifiedPlane& plane) {
  if (plane.width_px <= 0 || plane.height_px <= 0) {
    throw InvalidArgument("rectified plane must have positive width and height");
  }
  return {lookup_axis(plane.width_px), lookup_axis(plane.height_px)};
}

std::vector<float> resample_linear(const std::vector<float>& src, int n) {
  if (src.empty() || n <= 0) throw InvalidArgument("resample_linear: empty input or output");
  const auto m = static_cast<int>(src.size());
  if (m == n) return src;
  std::vector<float> out(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double pos = n == 1 ? 0.5 * (m - 1) : static_cast<double>(j) * (m - 1) / (n - 1);
    const int i0 = std::min(static_cast<int>(std::floor(pos)), m - 1);
    const int i1 = std::min(i0 + 1, m - 1);
    const double t = pos - i0;
    out[j] = static_cast<float>((1.0 - t) * src[i0] + t * src[i1]);
  }
  return out;
}

ViewVectorPair crop_view_vectors(const RectifiedPlane& plane,
                                 const FacadePlacement& p, int out_width,
                                 int out_height) {
  auto [h, v] = plane_lookup_vectors(plane);
  if (p.col_start < 0 || p.col_start >= p.col_end || p.col_end > plane.width_px ||
      p.row_start < 0 || p.row_start >= p.row_end || p.row_end > plane.height_px) {
    throw InvalidArgument("placement [" + std::to_string(p.col_start) + "," +
                          std::to_string(p.col_end) + ")x[" + std::to_string(p.row_start) +
                          "," + std::to_string(p.row_end) + ") outside plane " +
                          std::to_string(plane.width_px) + "x" +
                          std::to_string(plane.height_px));
  }
  if (out_width <= 0 || out_height <= 0) {
    throw InvalidArgument("crop_view_vectors: output size must be positive");
  }
  std::vector<float> hs(h.begin() + p.col_start, h.begin() + p.col_end);
  std::vector<float> vs(v.begin() + p.row_start, v.begin() + p.row_end);
  return {resample_linear(hs, out_width), resample_linear(vs, out_height)};
}

ViewVectorPair crop_view_vectors(const RectifiedPlane& plane,
                                 const FacadePlacement& p) {
  return crop_view_vectors(plane, p, p.col_end - p.col_start, p.row_end - p.row_start);
}

std::pair<double, double> placement_center_angles(const RectifiedPlane& plane,
                                                  const FacadePlacement& p) {
  const double ch = 0.5 * (p.col_start + p.col_end);
  const double cv = 0.5 * (p.row_start + p.row_end);
  return {(-1.0 + 2.0 * ch / plane.width_px) * plane.fov_h_deg,
          (-1.0 + 2.0 * cv / plane.height_px) * plane.fov_v_deg};
}

ViewVectorPair offset_view_vectors(const ViewVectorPair& v, double dh, double dv) {
  ViewVectorPair out = v;
  for (auto& x : out.theta_h) x = clamp_unit(x + dh);
  for (auto& x : out.theta_v) x = clamp_unit(x + dv);
  return out;
}

TexelAngles texel_angles(const SceneSurface& s) {
  const Vec3 d{s.point[0] - s.camera[0], s.point[1] - s.camera[1],
               s.point[2] - s.camera[2]};
  TexelAngles out;

  // Horizontal: xz plane. Facade axis f is n flipped to point along the ray;
  // the camera's right is f x up = (-f_z, 0, f_x).
  {
    const double nx = s.normal[0], nz = s.normal[2];
    const double dx = d[0], dz = d[2];
    const double nn = std::hypot(nx, nz), dn = std::hypot(dx, dz);
    if (nn < kDegenerateNorm || dn < kDegenerateNorm) {
      out.degenerate_h = true;
    } else {
      const double sgn = (dx * nx + dz * nz) >= 0.0 ? 1.0 : -1.0;
      const double fx = sgn * nx / nn, fz = sgn * nz / nn;
      const double ux = dx / dn, uz = dz / dn;
      const double axial = ux * fx + uz * fz;
      const double lateral = ux * (-fz) + uz * fx;
      out.horizontal_deg = std::atan2(lateral, axial) * kRadToDeg;
    }
  }
  // Vertical: yz plane; positive is "below", i.e. along the component of -y
  // orthogonal to f.
  {
    const double ny = s.normal[1], nz = s.normal[2];
    const double dy = d[1], dz = d[2];
    const double nn = std::hypot(ny, nz), dn = std::hypot(dy, dz);
    if (nn < kDegenerateNorm || dn < kDegenerateNorm || std::abs(nz) < kDegenerateNorm) {
      out.degenerate_v = true;
    } else {
      const double sgn = (dy * ny + dz * nz) >= 0.0 ? 1.0 : -1.0;
      const double fy = sgn * ny / nn, fz = sgn * nz / nn;
      const double uy = dy / dn, uz = dz / dn;
      // down = sign(f_z) * (-f_z, f_y) in (y, z)
      const double s_down = fz >= 0.0 ? 1.0 : -1.0;
      const double down_y = -s_down * fz, down_z = s_down * fy;
      const double axial = uy * fy + uz * fz;
      const double lateral = uy * down_y + uz * down_z;
      out.vertical_deg = std::atan2(lateral, axial) * kRadToDeg;
    }
  }
  return out;
}

std::pair<double, double> point_view_targets(const SceneSurface& s) {
  const auto a = texel_angles(s);
  return {clamp_unit(a.horizontal_deg / kFovBoundDeg),
          clamp_unit(a.vertical_deg / kFovBoundDeg)};
}

SceneTargets scene_view_targets(const SurfaceGrid& grid) {
  if (grid.rows <= 0 || grid.cols <= 0 ||
      grid.texels.size() != static_cast<std::size_t>(grid.rows) * grid.cols) {
    throw InvalidArgument("scene_view_targets: grid shape does not match texel count");
  }
  SceneTargets out;
  out.view.theta_h.assign(grid.cols, 0.0f);
  out.view.theta_v.assign(grid.rows, 0.0f);
  out.degenerate_h.assign(grid.cols, false);
  out.degenerate_v.assign(grid.rows, false);

  std::vector<double> sum_h(grid.cols, 0.0), sum_v(grid.rows, 0.0);
  std::vector<int> cnt_h(grid.cols, 0), cnt_v(grid.rows, 0);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const auto a = texel_angles(grid.at(r, c));
      if (!a.degenerate_h) {
        sum_h[c] += a.horizontal_deg;
        ++cnt_h[c];
      }
      if (!a.degenerate_v) {
        sum_v[r] += a.vertical_deg;
        ++cnt_v[r];
      }
    }
  }
  for (int c = 0; c < grid.cols; ++c) {
    if (cnt_h[c] == 0) {
      out.degenerate_h[c] = true;
    } else {
      out.view.theta_h[c] = clamp_unit(sum_h[c] / cnt_h[c] / kFovBoundDeg);
    }
  }
  for (int r = 0; r < grid.rows; ++r) {
    if (cnt_v[r] == 0) {
      out.degenerate_v[r] = true;
    } else {
      out.view.theta_v[r] = clamp_unit(sum_v[r] / cnt_v[r] / kFovBoundDeg);
    }
  }
  return out;
}

void check_view_range(const ViewVectorPair& v) {
  auto bad = [](float x) { return !std::isfinite(x) || x < -1.0f || x > 1.0f; };
  if (std::any_of(v.theta_h.begin(), v.theta_h.end(), bad) ||
      std::any_of(v.theta_v.begin(), v.theta_v.end(), bad)) {
    throw Unprocessable("view vector entries must lie in [-1, 1]");
  }
}

bool is_monotone(const ViewVectorPair& v) {
  return std::is_sorted(v.theta_h.begin(), v.theta_h.end()) &&
         std::is_sorted(v.theta_v.begin(), v.theta_v.end());
}

ViewVectorPair mirror_horizontal(const ViewVectorPair& v) {
  ViewVectorPair out = v;
  const auto n = v.theta_h.size();
  for (std::size_t i = 0; i < n; ++i) out.theta_h[i] = -v.theta_h[n - 1 - i];
  return out;
}

ViewVectorPair constant_view(int width, int height, double th, double tv) {
  return {std::vector<float>(width, clamp_unit(th)), std::vector<float>(height, clamp_unit(tv))};
}

namespace {

AngleTestCase make_case(const Vec3& camera, const Vec3& point, const Vec3& normal) {
  AngleTestCase c;
  c.camera = camera;
  c.point = point;
  c.normal = normal;
  double facing = 0.0;
  for (int i = 0; i < 3; ++i) facing += (camera[i] - point[i]) * normal[i];
  c.front_facing = facing > 0.0;
  const SceneSurface s{point, normal, camera};
  const auto [th, tv] = point_view_targets(s);
  const auto a = texel_angles(s);
  c.theta_h = th + 0.0;  // no signed zeros in the published vectors
  c.theta_v = tv + 0.0;
  c.degenerate_h = a.degenerate_h;
  c.degenerate_v = a.degenerate_v;
  return c;
}

}  // namespace

std::vector<AngleTestCase> angle_test_cases(int count, std::uint64_t seed) {
  if (count < 4) throw InvalidArgument("angle_test_cases needs at least 4 cases");
  std::vector<AngleTestCase> out;
  const Vec3 center{0.0, 5.0, 0.0};
  const Vec3 nz{0.0, 0.0, 1.0};
  out.push_back(make_case({0.0, 5.0, 20.0}, center, nz));
  out.push_back(make_case({10.0, 5.0, 20.0}, center, nz));
  out.push_back(make_case({-10.0, 5.0, 20.0}, center, nz));
  out.push_back(make_case({0.0, 15.0, 20.0}, center, nz));

  // Cube-city facades: axis-aligned horizontal normals, cameras anywhere
  // around them (so some cases face away).
  std::mt19937_64 rng(seed);
  auto uniform = [&rng](double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  };
  const Vec3 normals[4] = {{0, 0, 1}, {0, 0, -1}, {1, 0, 0}, {-1, 0, 0}};
  while (static_cast<int>(out.size()) < count) {
    const Vec3& n = normals[rng() % 4];
    const double half = uniform(2.0, 10.0);
    const double height = uniform(4.0, 40.0);
    const Vec3 p{uniform(-50.0, 50.0) + n[0] * half, height / 2, uniform(-50.0, 50.0) + n[2] * half};
    const Vec3 c{uniform(-80.0, 80.0), uniform(1.5, 60.0), uniform(-80.0, 80.0)};
    out.push_back(make_case(c, p, n));
  }
  return out;
}

}  // namespace facade::viewgeom
