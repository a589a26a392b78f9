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

#ifndef FACADE_VIEWGEOM_VIEWGEOM_H_
#define FACADE_VIEWGEOM_VIEWGEOM_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace facade::viewgeom {

// Half field of view of the rectified plane, in degrees. View vectors are
// angles divided by this bound.
inline constexpr double kFovBoundDeg = 75.0;

struct RectifiedPlane {
  int width_px = 0;
  int height_px = 0;
  double fov_h_deg = kFovBoundDeg;  // symmetric: [-fov, +fov]
  double fov_v_deg = kFovBoundDeg;
};

// Pixel extent of a facade crop inside a rectified plane, half-open ranges.
struct FacadePlacement {
  int col_start = 0;
  int col_end = 0;
  int row_start = 0;
  int row_end = 0;
  double center_h_deg = 0.0;
  double center_v_deg = 0.0;
};

// Per-column horizontal and per-row vertical viewing directions in [-1, 1].
struct ViewVectorPair {
  std::vector<float> theta_h;  // length W, non-decreasing left to right
  std::vector<float> theta_v;  // length H, non-decreasing top to bottom

  bool operator==(const ViewVectorPair&) const = default;
};

using Vec3 = std::array<double, 3>;

struct SceneSurface {
  Vec3 point{};
  Vec3 normal{0.0, 0.0, 1.0};
  Vec3 camera{};
};

// Row-major grid of texels, `rows` x `cols`.
struct SurfaceGrid {
  int rows = 0;
  int cols = 0;
  std::vector<SceneSurface> texels;

  const SceneSurface& at(int r, int c) const {
    return texels[static_cast<std::size_t>(r) * cols + c];
  }
};

struct SceneTargets {
  ViewVectorPair view;
  // Entries whose axis projection was degenerate and were set to zero.
  std::vector<bool> degenerate_h;
  std::vector<bool> degenerate_v;
  bool any_degenerate() const;
};

// Signed viewing angles (degrees) of a single texel, before normalization.
struct TexelAngles {
  double horizontal_deg = 0.0;
  double vertical_deg = 0.0;
  bool degenerate_h = false;
  bool degenerate_v = false;
};

// Per-pixel lookup vectors for a rectified plane: entry i is
// -1 + 2 (i + 0.5) / N along each axis.
std::pair<std::vector<float>, std::vector<float>> plane_lookup_vectors(
    const RectifiedPlane& plane);

// Crops the plane lookup tables to the placement and linearly resamples them
// (endpoint aligned) to the facade resolution.
ViewVectorPair crop_view_vectors(const RectifiedPlane& plane,
                                 const FacadePlacement& placement, int out_width,
                                 int out_height);
// Same, keeping the crop's native resolution.
ViewVectorPair crop_view_vectors(const RectifiedPlane& plane,
                                 const FacadePlacement& placement);

// Horizontal/vertical angles implied for the crop center, in degrees.
std::pair<double, double> placement_center_angles(const RectifiedPlane& plane,
                                                  const FacadePlacement& placement);

ViewVectorPair offset_view_vectors(const ViewVectorPair& v, double dh, double dv);

// Angles of one texel. The facade axis is the normal, oriented to point away
// from the camera; horizontal uses xz projections, vertical yz projections.
// Positive horizontal means the texel lies to the camera's right, positive
// vertical means below.
TexelAngles texel_angles(const SceneSurface& s);

// Per-column / per-row targets for a texel grid: angles averaged over each
// column (rows), divided by kFovBoundDeg and clamped to [-1, 1].
SceneTargets scene_view_targets(const SurfaceGrid& grid);

// Scalar targets (theta_h, theta_v) for a single point, normalized and clamped.
std::pair<double, double> point_view_targets(const SceneSurface& s);

// Linear, endpoint-aligned resampling of a 1-D table.
std::vector<float> resample_linear(const std::vector<float>& src, int n);

// Throws InvalidArgument when any entry is outside [-1, 1] or non-finite.
void check_view_range(const ViewVectorPair& v);
bool is_monotone(const ViewVectorPair& v);

// Horizontal mirror of a view: theta_h'[i] = -theta_h[W - 1 - i].
ViewVectorPair mirror_horizontal(const ViewVectorPair& v);

ViewVectorPair constant_view(int width, int height, double th, double tv);

// One camera/facade configuration of the shared angle test vectors: targets
// at the facade center as point_view_targets computes them.
struct AngleTestCase {
  Vec3 camera{};
  Vec3 point{};
  Vec3 normal{};
  bool front_facing = false;  // (camera - point) . normal > 0
  double theta_h = 0.0;
  double theta_v = 0.0;
  bool degenerate_h = false;
  bool degenerate_v = false;
};

// Four fixed cases (frontal, camera right, camera left, camera above)
// followed by seeded cube-facade cases. Uses a portable uniform mapping so
// the output depends only on (count, seed).
std::vector<AngleTestCase> angle_test_cases(int count, std::uint64_t seed);

}  // namespace facade::viewgeom

#endif  // FACADE_VIEWGEOM_VIEWGEOM_H_
