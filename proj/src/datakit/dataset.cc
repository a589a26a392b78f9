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
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "facade/common/codec.h"
#include "facade/common/errors.h"
#include "facade/common/image.h"
#include "facade/datakit/datakit.h"

namespace facade::datakit {

namespace fs = std::filesystem;

// ---- manifest -----------------------------------------------------------------

std::string IngestionReport::summary() const {
  std::ostringstream os;
  os << total << " rows: " << accepted << " accepted, " << rejected << " rejected";
  return os.str();
}

nlohmann::json IngestionReport::to_json() const {
  auto issues = [](const std::vector<IngestionIssue>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& i : v) a.push_back({{"line", i.line}, {"reason", i.reason}});
    return a;
  };
  return {{"total", total},
          {"accepted", accepted},
          {"rejected", rejected},
          {"errors", issues(errors)},
          {"warnings", issues(warnings)}};
}

namespace {

template <typename T>
T required(const nlohmann::json& row, const char* key, std::size_t line) {
  if (!row.contains(key)) throw ParseError(line, std::string("missing key '") + key + "'");
  const auto& v = row.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ParseError(line, std::string("'") + key + "' must be a string");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ParseError(line, std::string("'") + key + "' must be an integer");
  } else {
    if (!v.is_number()) throw ParseError(line, std::string("'") + key + "' must be a number");
  }
  return v.get<T>();
}

}  // namespace

ManifestDataset::ManifestDataset(const fs::path& manifest, ManifestOptions options)
    : options_(options) {
  if (options_.image_size <= 0) throw InvalidArgument("manifest: image_size must be positive");
  std::ifstream in(manifest);
  if (!in) throw NotFound("manifest not found: " + manifest.string());
  const fs::path base = manifest.parent_path();
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    const auto first = text.find_first_not_of(" \t\r");
    if (first == std::string::npos || text[first] == '#') continue;
    nlohmann::json row;
    try {
      row = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line, std::string("invalid JSON: ") + e.what());
    }
    if (!row.is_object()) throw ParseError(line, "row must be a JSON object");
    ++report_.total;

    ManifestRow r;
    r.line = line;
    r.image_path = base / required<std::string>(row, "image_path", line);
    r.placement.col_start = required<int>(row, "col_start", line);
    r.placement.col_end = required<int>(row, "col_end", line);
    r.placement.row_start = required<int>(row, "row_start", line);
    r.placement.row_end = required<int>(row, "row_end", line);
    r.placement.center_h_deg = required<double>(row, "theta_h_center_deg", line);
    r.placement.center_v_deg = required<double>(row, "theta_v_center_deg", line);
    r.plane.width_px = row.contains("plane_width") ? required<int>(row, "plane_width", line)
                                                   : options_.plane_width;
    r.plane.height_px = row.contains("plane_height") ? required<int>(row, "plane_height", line)
                                                     : options_.plane_height;
    r.id = row.contains("id") ? required<std::string>(row, "id", line)
                              : r.image_path.stem().string();

    auto reject = [&](std::string reason) {
      ++report_.rejected;
      report_.errors.push_back({line, std::move(reason)});
    };
    const auto& p = r.placement;
    if (p.col_start < 0 || p.row_start < 0 || p.col_end > r.plane.width_px ||
        p.row_end > r.plane.height_px || p.col_start >= p.col_end || p.row_start >= p.row_end) {
      reject("placement outside the rectified plane");
      continue;
    }
    if (!fs::is_regular_file(r.image_path)) {
      reject("image not found: " + r.image_path.string());
      continue;
    }
    const auto [ch, cv] = viewgeom::placement_center_angles(r.plane, p);
    if (std::abs(ch - p.center_h_deg) > options_.center_tolerance_deg ||
        std::abs(cv - p.center_v_deg) > options_.center_tolerance_deg) {
      std::ostringstream os;
      os << "declared center (" << p.center_h_deg << ", " << p.center_v_deg
         << ") differs from placement (" << ch << ", " << cv << ")";
      report_.warnings.push_back({line, os.str()});
    }
    ++report_.accepted;
    rows_.push_back(std::move(r));
  }
}

FacadeSample ManifestDataset::get(std::size_t index) const {
  const auto& r = rows_.at(index);
  const int n = options_.image_size;
  FacadeSample s;
  s.id = r.id;
  s.source = Source::kLsaa;
  s.image = resize_chw(image_to_tensor(read_png(r.image_path)), n, n);
  s.view = viewgeom::crop_view_vectors(r.plane, r.placement, n, n);
  return s;
}

// ---- raw float vectors ----------------------------------------------------------

std::vector<float> read_f32_le(const fs::path& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() % 4 != 0) throw InvalidArgument(path.string() + ": size not a multiple of 4");
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t u = 0;
    for (int b = 0; b < 4; ++b) {
      u |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[4 * i + b])) << (8 * b);
    }
    out[i] = std::bit_cast<float>(u);
  }
  return out;
}

void write_f32_le(const fs::path& path, const std::vector<float>& values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto u = std::bit_cast<std::uint32_t>(values[i]);
    for (int b = 0; b < 4; ++b) bytes[4 * i + b] = static_cast<char>((u >> (8 * b)) & 0xff);
  }
  write_file_atomic(path, bytes);
}

// ---- synthetic directory ---------------------------------------------------------

namespace {

std::string sample_id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "syn_%06zu", i);
  return buf;
}

Image8 labels_to_image(const torch::Tensor& labels) {
  Image8 img;
  img.height = static_cast<int>(labels.size(0));
  img.width = static_cast<int>(labels.size(1));
  img.channels = 1;
  auto l = labels.to(torch::kUInt8).contiguous();
  img.data.assign(l.data_ptr<std::uint8_t>(), l.data_ptr<std::uint8_t>() + l.numel());
  return img;
}

torch::Tensor image_to_labels(const Image8& img) {
  auto t = torch::from_blob(const_cast<std::uint8_t*>(img.data.data()), {img.height, img.width},
                            torch::kUInt8);
  return t.to(torch::kInt64);
}

template <typename Fn>
void for_each_synthetic(const SynthOptions& options, Fn&& fn) {
  std::mt19937_64 rng(options.seed);
  for (std::size_t i = 0; i < options.count; ++i) {
    SyntheticSpec spec = random_spec(options.ranges, rng);
    const std::uint64_t jitter_seed = rng();
    FacadeSample s = render_synthetic(spec, jitter_seed);
    s.id = sample_id(i);
    fn(s, spec, jitter_seed);
  }
}

}  // namespace

std::vector<FacadeSample> generate_synthetic(const SynthOptions& options) {
  std::vector<FacadeSample> out;
  out.reserve(options.count);
  for_each_synthetic(options, [&](FacadeSample& s, const SyntheticSpec&, std::uint64_t) {
    out.push_back(std::move(s));
  });
  return out;
}

void write_synthetic_dataset(const fs::path& root, const SynthOptions& options) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");
  fs::create_directories(root / "views");
  nlohmann::json samples = nlohmann::json::array();
  for_each_synthetic(options, [&](FacadeSample& s, const SyntheticSpec& spec,
                                  std::uint64_t jitter_seed) {
    write_png(root / "images" / (s.id + ".png"), tensor_to_image(s.image));
    write_png(root / "masks" / (s.id + ".png"), labels_to_image(s.labels));
    write_f32_le(root / "views" / (s.id + "_h.f32"), s.view.theta_h);
    write_f32_le(root / "views" / (s.id + "_v.f32"), s.view.theta_v);
    samples.push_back({{"id", s.id}, {"spec", spec.to_json()}, {"color_seed", jitter_seed}});
  });
  nlohmann::json index = {{"format", "facade-synthetic"},
                          {"version", 1},
                          {"image_size", options.ranges.image_size},
                          {"seed", options.seed},
                          {"classes", {{"wall", kWall}, {"window", kWindow}, {"door", kDoor}}},
                          {"samples", samples}};
  write_file_atomic(root / "index.json", index.dump(1));
}

SyntheticDirDataset::SyntheticDirDataset(const fs::path& root) : root_(root) {
  nlohmann::json index;
  try {
    index = nlohmann::json::parse(read_file(root / "index.json"));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(root.string() + "/index.json: " + e.what());
  }
  if (index.value("format", "") != "facade-synthetic") {
    throw InvalidArgument(root.string() + ": not a synthetic dataset directory");
  }
  if (index.value("version", 0) != 1) {
    throw InvalidArgument(root.string() + ": unsupported dataset version");
  }
  for (const auto& s : index.at("samples")) ids_.push_back(s.at("id").get<std::string>());
}

FacadeSample SyntheticDirDataset::get(std::size_t index) const {
  const std::string& id = ids_.at(index);
  FacadeSample s;
  s.id = id;
  s.source = Source::kSynthetic;
  s.image = image_to_tensor(read_png(root_ / "images" / (id + ".png")));
  s.labels = image_to_labels(read_png(root_ / "masks" / (id + ".png"), /*want_gray=*/true));
  s.view.theta_h = read_f32_le(root_ / "views" / (id + "_h.f32"));
  s.view.theta_v = read_f32_le(root_ / "views" / (id + "_v.f32"));
  if (static_cast<int64_t>(s.view.theta_h.size()) != s.image.size(2) ||
      static_cast<int64_t>(s.view.theta_v.size()) != s.image.size(1)) {
    throw InvalidArgument("sample " + id + ": view vector length does not match image");
  }
  return s;
}

std::shared_ptr<Dataset> open_dataset(const fs::path& path, int image_size) {
  if (fs::is_directory(path)) {
    if (!fs::exists(path / "index.json")) {
      throw NotFound(path.string() + " has no index.json");
    }
    return std::make_shared<SyntheticDirDataset>(path);
  }
  if (fs::is_regular_file(path)) {
    ManifestOptions o;
    o.image_size = image_size;
    return std::make_shared<ManifestDataset>(path, o);
  }
  throw NotFound("dataset not found: " + path.string());
}

// ---- splitting ------------------------------------------------------------------

Split split(std::size_t n, const std::array<double, 3>& fractions, std::uint64_t seed) {
  double sum = 0.0;
  for (double f : fractions) {
    if (!std::isfinite(f) || f < 0.0) throw InvalidArgument("split fractions must be >= 0");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("split fractions must sum to 1");

  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = exact - std::floor(exact);
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return rem[a] > rem[b]; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[order[k % 3]];

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  Split s;
  auto it = perm.begin();
  s.train.assign(it, it + counts[0]);
  it += counts[0];
  s.val.assign(it, it + counts[1]);
  it += counts[1];
  s.test.assign(it, it + counts[2]);
  return s;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  std::mt19937_64 rng(seq);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace facade::datakit
