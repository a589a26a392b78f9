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

#include "facade/common/archive.h"

#include <cstring>

#include "facade/common/codec.h"
#include "facade/common/errors.h"

namespace facade {
namespace {

constexpr char kMagic[8] = {'F', 'A', 'C', 'A', 'D', 'E', 'A', 'R'};

std::string dtype_name(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return "f32";
    case torch::kFloat64: return "f64";
    case torch::kInt64: return "i64";
    case torch::kUInt8: return "u8";
    default: throw InvalidArgument("archive: unsupported dtype");
  }
}

torch::ScalarType dtype_from(const std::string& s) {
  if (s == "f32") return torch::kFloat32;
  if (s == "f64") return torch::kFloat64;
  if (s == "i64") return torch::kInt64;
  if (s == "u8") return torch::kUInt8;
  throw CorruptArchive("archive: unknown dtype '" + s + "'");
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get(std::string_view bytes, std::size_t& pos) {
  if (pos + sizeof(T) > bytes.size()) throw CorruptArchive("archive truncated");
  T v;
  std::memcpy(&v, bytes.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::string serialize_archive(const TensorArchive& archive) {
  nlohmann::json header;
  header["meta"] = archive.meta;
  header["tensors"] = nlohmann::json::array();
  std::string payload;
  for (const auto& [name, tensor] : archive.tensors) {
    auto t = tensor.detach().cpu().contiguous();
    const auto nbytes = static_cast<std::size_t>(t.numel()) * t.element_size();
    header["tensors"].push_back({{"name", name},
                                 {"dtype", dtype_name(t.scalar_type())},
                                 {"shape", t.sizes().vec()},
                                 {"offset", payload.size()},
                                 {"nbytes", nbytes}});
    payload.append(static_cast<const char*>(t.data_ptr()), nbytes);
  }
  const std::string header_text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kArchiveVersion);
  put<std::uint64_t>(out, header_text.size());
  out += header_text;
  out += payload;
  const auto digest = sha256(out);
  out.append(reinterpret_cast<const char*>(digest.data()), digest.size());
  return out;
}

TensorArchive parse_archive(std::string_view bytes) {
  if (bytes.size() < sizeof(kMagic) + 12 + 32 ||
      std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CorruptArchive("not a facade archive");
  }
  const auto body = bytes.substr(0, bytes.size() - 32);
  const auto digest = sha256(body);
  if (std::memcmp(digest.data(), bytes.data() + body.size(), 32) != 0) {
    throw CorruptArchive("archive content hash mismatch");
  }
  std::size_t pos = sizeof(kMagic);
  const auto version = get<std::uint32_t>(body, pos);
  if (version != kArchiveVersion) {
    throw CorruptArchive("unsupported archive version " + std::to_string(version));
  }
  const auto header_len = get<std::uint64_t>(body, pos);
  if (pos + header_len > body.size()) throw CorruptArchive("archive truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(body.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptArchive(std::string("archive header: ") + e.what());
  }
  pos += header_len;
  const auto payload = body.substr(pos);

  TensorArchive out;
  out.meta = header.value("meta", nlohmann::json::object());
  for (const auto& entry : header.at("tensors")) {
    const auto offset = entry.at("offset").get<std::size_t>();
    const auto nbytes = entry.at("nbytes").get<std::size_t>();
    if (offset + nbytes > payload.size()) throw CorruptArchive("tensor out of range");
    auto shape = entry.at("shape").get<std::vector<int64_t>>();
    auto t = torch::empty(shape, torch::TensorOptions().dtype(
                                     dtype_from(entry.at("dtype").get<std::string>())));
    if (static_cast<std::size_t>(t.numel()) * t.element_size() != nbytes) {
      throw CorruptArchive("tensor size mismatch for " + entry.at("name").get<std::string>());
    }
    std::memcpy(t.data_ptr(), payload.data() + offset, nbytes);
    out.tensors.emplace(entry.at("name").get<std::string>(), std::move(t));
  }
  return out;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  write_file_atomic(path, serialize_archive(archive));
}

TensorArchive read_archive(const std::filesystem::path& path) {
  return parse_archive(read_file(path));
}

std::string archive_content_hash(std::string_view bytes) {
  if (bytes.size() < 32) throw CorruptArchive("archive truncated");
  Sha256Digest d{};
  std::memcpy(d.data(), bytes.data() + bytes.size() - 32, 32);
  return to_hex(d);
}

}  // namespace facade
