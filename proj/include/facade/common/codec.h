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

#ifndef FACADE_COMMON_CODEC_H_
#define FACADE_COMMON_CODEC_H_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace facade {

using Sha256Digest = std::array<std::uint8_t, 32>;

Sha256Digest sha256(std::string_view bytes);
std::string sha256_hex(std::string_view bytes);
std::string to_hex(const Sha256Digest& digest);

// SHA-256 of a file's full contents, lowercase hex.
std::string file_sha256_hex(const std::filesystem::path& path);

std::string base64_encode(std::string_view bytes);
// Throws InvalidArgument on malformed input.
std::string base64_decode(std::string_view text);

std::string read_file(const std::filesystem::path& path);
// Writes through a temporary sibling and renames, so readers never observe a
// half-written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace facade

#endif  // FACADE_COMMON_CODEC_H_
