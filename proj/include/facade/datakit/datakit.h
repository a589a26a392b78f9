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

#ifndef FACADE_DATAKIT_DATAKIT_H_
#define FACADE_DATAKIT_DATAKIT_H_

#include <torch/torch.h>

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "facade/viewgeom/viewgeom.h"
#include "json.hpp"

namespace facade::datakit {

enum class Source { kLsaa, kSynthetic };

// Label ids used by synthetic annotations.
enum Label : int { kWall = 0, kWindow = 1, kDoor = 2 };
inline constexpr int kNumLabels = 3;

struct FacadeSample {
  torch::Tensor image;  // [3,H,W] float in [-1,1]
  viewgeom::ViewVectorPair view;
  std::string id;
  Source source = Source::kSynthetic;
  torch::Tensor labels;  // [H,W] int64, undefined when unannotated
};

using Rgb = std::array<double, 3>;

struct SyntheticSpec {
  int width = 32;
  int height = 32;
  int window_rows = 3;
  int window_cols = 3;
  double window_width = 0.5;   // fraction of a grid cell
  double window_height = 0.55;
  double inset_depth = 0.08;   // facade widths
  bool door = true;
  Rgb wall{0.78, 0.70, 0.60};
  Rgb band{0.62, 0.55, 0.47};
  Rgb glass{0.20, 0.27, 0.36};
  Rgb frame{0.93, 0.92, 0.88};
  Rgb reveal{0.55, 0.50, 0.44};
  Rgb door_color{0.35, 0.22, 0.15};
  double yaw_deg = 0.0;
  double pitch_deg = 0.0;
  double camera_distance = 4.0;  // facade widths from the facade center
  double color_jitter = 0.05;
  int supersample = 3;

  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

// Camera position (facade-centered world frame, facade in the z = 0 plane
// facing +z, width 1, height = height/width) implied by the yaw and pitch.
viewgeom::Vec3 synthetic_camera(const SyntheticSpec& spec);
// Texel centers of the facade as a surface grid for scene_view_targets.
viewgeom::SurfaceGrid synthetic_surface(const SyntheticSpec& spec);

// Renders a flat wall with inset windows and an optional door seen through
// a pinhole camera at (yaw, pitch). Ground-truth view vectors are the exact
// per-column / per-row angles divided by 75 degrees. The seed only drives
// color jitter; geometry depends on the spec alone.
FacadeSample render_synthetic(const SyntheticSpec& spec, std::uint64_t seed);

// Random facade layout and camera for dataset generation.
struct SyntheticRanges {
  int image_size = 32;
  double max_yaw_deg = 50.0;
  double max_pitch_deg = 25.0;
};
SyntheticSpec random_spec(const SyntheticRanges& ranges, std::mt19937_64& rng);

// Geometry-consistent augmentation: mirrors image and labels and maps
// theta_h to -reverse(theta_h).
FacadeSample flip_horizontal(const FacadeSample& s);

// Editable-region mask (windows and doors) from a label map, [H,W] float.
torch::Tensor window_mask(const FacadeSample& s);

class Dataset {
 public:
  virtual ~Dataset() = default;
  virtual std::size_t size() const = 0;
  virtual FacadeSample get(std::size_t index) const = 0;
};

class InMemoryDataset : public Dataset {
 public:
  explicit InMemoryDataset(std::vector<FacadeSample> samples) : samples_(std::move(samples)) {}
  std::size_t size() const override { return samples_.size(); }
  FacadeSample get(std::size_t index) const override { return samples_.at(index); }

 private:
  std::vector<FacadeSample> samples_;
};

class SubsetDataset : public Dataset {
 public:
  SubsetDataset(std::shared_ptr<const Dataset> base, std::vector<std::size_t> indices)
      : base_(std::move(base)), indices_(std::move(indices)) {}
  std::size_t size() const override { return indices_.size(); }
  FacadeSample get(std::size_t index) const override { return base_->get(indices_.at(index)); }
  const std::vector<std::size_t>& indices() const { return indices_; }

 private:
  std::shared_ptr<const Dataset> base_;
  std::vector<std::size_t> indices_;
};

// ---- manifest ingestion -------------------------------------------------

// One line per facade, JSON object:
//   {"image_path", "col_start", "col_end", "row_start", "row_end",
//    "theta_h_center_deg", "theta_v_center_deg"}
// optional: "id", "plane_width", "plane_height". Paths are relative to the
// manifest's directory. Blank lines and lines starting with '#' are skipped.
struct ManifestRow {
  std::size_t line = 0;
  std::string id;
  std::filesystem::path image_path;
  viewgeom::RectifiedPlane plane;
  viewgeom::FacadePlacement placement;
};

struct IngestionIssue {
  std::size_t line = 0;
  std::string reason;
};

struct IngestionReport {
  std::size_t total = 0;
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::vector<IngestionIssue> errors;    // rejected rows
  std::vector<IngestionIssue> warnings;  // accepted with remarks
  std::string summary() const;
  nlohmann::json to_json() const;
};

struct ManifestOptions {
  int image_size = 32;
  int plane_width = 1024;   // used when a row has no plane_width
  int plane_height = 1024;
  double center_tolerance_deg = 1.0;
};

class ManifestDataset : public Dataset {
 public:
  // Parses every row up front (ParseError with line number on malformed
  // rows), validates bounds and file presence; images load lazily in get().
  ManifestDataset(const std::filesystem::path& manifest, ManifestOptions options);
  std::size_t size() const override { return rows_.size(); }
  FacadeSample get(std::size_t index) const override;
  const IngestionReport& report() const { return report_; }
  const std::vector<ManifestRow>& rows() const { return rows_; }

 private:
  ManifestOptions options_;
  std::vector<ManifestRow> rows_;
  IngestionReport report_;
};

// ---- synthetic dataset directory -----------------------------------------
//
//   root/images/<id>.png    8-bit RGB
//   root/masks/<id>.png     8-bit gray label ids (0 wall, 1 window, 2 door)
//   root/views/<id>_h.f32   theta_h, float32 little-endian
//   root/views/<id>_v.f32   theta_v, float32 little-endian
//   root/index.json         {"format": "facade-synthetic", "version": 1,
//                            "image_size", "classes", "samples": [...]}

struct SynthOptions {
  std::size_t count = 256;
  std::uint64_t seed = 0;
  SyntheticRanges ranges;
};

void write_synthetic_dataset(const std::filesystem::path& root, const SynthOptions& options);
// Same samples in memory without touching disk.
std::vector<FacadeSample> generate_synthetic(const SynthOptions& options);

class SyntheticDirDataset : public Dataset {
 public:
  explicit SyntheticDirDataset(const std::filesystem::path& root);
  std::size_t size() const override { return ids_.size(); }
  FacadeSample get(std::size_t index) const override;

 private:
  std::filesystem::path root_;
  std::vector<std::string> ids_;
};

// Opens a dataset by path: a directory with index.json, or a manifest file.
std::shared_ptr<Dataset> open_dataset(const std::filesystem::path& path, int image_size);

std::vector<float> read_f32_le(const std::filesystem::path& path);
void write_f32_le(const std::filesystem::path& path, const std::vector<float>& values);

// ---- splitting --------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train, val, test;
};

// Sizes are floor(f_i * n) with the remainder handed out one at a time by
// largest fractional part (ties to the earlier split); membership comes
// from a seeded shuffle. Throws InvalidArgument unless fractions are
// non-negative and sum to 1.
Split split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed);

// Deterministic per-epoch visiting order.
std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch);

}  // namespace facade::datakit

#endif  // FACADE_DATAKIT_DATAKIT_H_
