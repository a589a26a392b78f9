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

#include "facade/common/image.h"

#include <png.h>

#include <cstring>

#include "facade/common/codec.h"
#include "facade/common/errors.h"

namespace facade {

Image8 decode_png(std::string_view bytes, bool want_gray) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw InvalidArgument(std::string("undecodable PNG: ") + img.message);
  }
  img.format = want_gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  Image8 out;
  out.width = static_cast<int>(img.width);
  out.height = static_cast<int>(img.height);
  out.channels = want_gray ? 1 : 3;
  out.data.resize(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, out.data.data(), 0, nullptr)) {
    std::string msg = img.message;
    png_image_free(&img);
    throw InvalidArgument("undecodable PNG: " + msg);
  }
  return out;
}

std::string encode_png(const Image8& image) {
  if (image.channels != 1 && image.channels != 3) {
    throw InvalidArgument("encode_png: channels must be 1 or 3");
  }
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width);
  img.height = static_cast<png_uint_32>(image.height);
  img.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, image.data.data(), 0,
                                 nullptr)) {
    throw std::runtime_error(std::string("PNG encode failed: ") + img.message);
  }
  std::string out(size, '\0');
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, image.data.data(), 0,
                                 nullptr)) {
    throw std::runtime_error(std::string("PNG encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

Image8 read_png(const std::filesystem::path& path, bool want_gray) {
  return decode_png(read_file(path), want_gray);
}

void write_png(const std::filesystem::path& path, const Image8& image) {
  write_file_atomic(path, encode_png(image));
}

torch::Tensor image_to_tensor(const Image8& image) {
  auto hwc = torch::from_blob(const_cast<std::uint8_t*>(image.data.data()),
                              {image.height, image.width, image.channels},
                              torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

Image8 tensor_to_image(const torch::Tensor& chw) {
  TORCH_CHECK(chw.dim() == 3, "tensor_to_image expects [C,H,W]");
  auto u8 = chw.detach()
                .to(torch::kFloat32)
                .add(1.0)
                .mul(127.5)
                .round()
                .clamp(0, 255)
                .to(torch::kUInt8)
                .permute({1, 2, 0})
                .contiguous();
  Image8 out;
  out.channels = static_cast<int>(chw.size(0));
  out.height = static_cast<int>(chw.size(1));
  out.width = static_cast<int>(chw.size(2));
  out.data.assign(u8.data_ptr<std::uint8_t>(), u8.data_ptr<std::uint8_t>() + u8.numel());
  return out;
}

torch::Tensor mask_to_tensor(const Image8& image) {
  auto hw = torch::from_blob(const_cast<std::uint8_t*>(image.data.data()),
                             {image.height, image.width, image.channels},
                             torch::kUInt8)
                .select(2, 0);
  return hw.to(torch::kFloat32).div(255.0).contiguous();
}

Image8 tensor_to_mask(const torch::Tensor& hw) {
  TORCH_CHECK(hw.dim() == 2, "tensor_to_mask expects [H,W]");
  auto u8 = hw.detach()
                .to(torch::kFloat32)
                .mul(255.0)
                .round()
                .clamp(0, 255)
                .to(torch::kUInt8)
                .contiguous();
  Image8 out;
  out.channels = 1;
  out.height = static_cast<int>(hw.size(0));
  out.width = static_cast<int>(hw.size(1));
  out.data.assign(u8.data_ptr<std::uint8_t>(), u8.data_ptr<std::uint8_t>() + u8.numel());
  return out;
}

torch::Tensor resize_chw(const torch::Tensor& chw, int height, int width) {
  if (chw.size(1) == height && chw.size(2) == width) return chw;
  namespace F = torch::nn::functional;
  const bool shrink = chw.size(1) > height || chw.size(2) > width;
  return F::interpolate(chw.unsqueeze(0),
                        F::InterpolateFuncOptions()
                            .size(std::vector<int64_t>{height, width})
                            .mode(torch::kBilinear)
                            .align_corners(false)
                            .antialias(shrink))
      .squeeze(0);
}

Image8 filmstrip(const std::vector<torch::Tensor>& frames) {
  if (frames.empty()) throw InvalidArgument("filmstrip needs at least one frame");
  return tensor_to_image(torch::cat(frames, /*dim=*/2));
}

}  // namespace facade
