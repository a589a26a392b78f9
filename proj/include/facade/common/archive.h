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

#ifndef FACADE_COMMON_ARCHIVE_H_
#define FACADE_COMMON_ARCHIVE_H_

#include <torch/torch.h>

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

#include "json.hpp"

namespace facade {

// Single-file container of named tensors plus a JSON metadata block.
//
// Layout (all integers little-endian):
//   bytes 0..7    magic "FACADEAR"
//   u32           format version (kArchiveVersion)
//   u64           header length N
//   N bytes       UTF-8 JSON header:
//                   {"meta": {...},
//                    "tensors": [{"name", "dtype", "shape", "offset", "nbytes"}]}
//                 tensors sorted by name, offsets relative to payload start
//   payload       raw contiguous tensor bytes
//   32 bytes      SHA-256 of everything above (the content hash)
//
// Serialization is canonical: equal archives produce identical bytes.
inline constexpr std::uint32_t kArchiveVersion = 1;

struct TensorArchive {
  nlohmann::json meta = nlohmann::json::object();
  std::map<std::string, torch::Tensor> tensors;
};

std::string serialize_archive(const TensorArchive& archive);
// Throws CorruptArchive on bad magic, version, truncation or hash mismatch.
TensorArchive parse_archive(std::string_view bytes);

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

// Hex SHA-256 trailer of a serialized archive (no re-hashing).
std::string archive_content_hash(std::string_view bytes);

}  // namespace facade

#endif  // FACADE_COMMON_ARCHIVE_H_
