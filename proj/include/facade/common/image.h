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

#ifndef FACADE_COMMON_IMAGE_H_
#define FACADE_COMMON_IMAGE_H_

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace facade {

// Interleaved 8-bit image, row-major, `channels` in {1, 3}.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 3;
  std::vector<std::uint8_t> data;

  std::uint8_t& at(int row, int col, int ch) {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
  std::uint8_t at(int row, int col, int ch) const {
    return data[(static_cast<std::size_t>(row) * width + col) * channels + ch];
  }
};

// PNG codec. Decoding accepts gray, gray+alpha, RGB and RGBA at 8 or 16 bit
// and returns RGB (or gray when `want_gray`). Throws InvalidArgument on
// undecodable input.
Image8 decode_png(std::string_view bytes, bool want_gray = false);
std::string encode_png(const Image8& image);

Image8 read_png(const std::filesystem::path& path, bool want_gray = false);
void write_png(const std::filesystem::path& path, const Image8& image);

// [C,H,W] float tensor in [-1, 1] <-> 8-bit image.
torch::Tensor image_to_tensor(const Image8& image);
Image8 tensor_to_image(const torch::Tensor& chw);

// [H,W] float tensor in [0, 1] <-> single channel image.
torch::Tensor mask_to_tensor(const Image8& image);
Image8 tensor_to_mask(const torch::Tensor& hw);

// Bilinear resize of a [C,H,W] tensor; antialiased when shrinking.
torch::Tensor resize_chw(const torch::Tensor& chw, int height, int width);

// Concatenates equally-sized [3,H,W] frames left to right.
Image8 filmstrip(const std::vector<torch::Tensor>& frames);

}  // namespace facade

#endif  // FACADE_COMMON_IMAGE_H_
