// Copyright 2026 The DragScene Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dragscene/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "dragscene/errors.hpp"

namespace dragscene {

namespace {

void WriteBuffer(const std::filesystem::path& path, int width, int height,
                 png_uint_32 format, const std::vector<png_byte>& pixels) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(width);
  img.height = static_cast<png_uint_32>(height);
  img.format = format;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
    throw FormatError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

png_byte ToByte(double v) {
  return static_cast<png_byte>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

}  // namespace

MaskGrid ReadMaskPng(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw FormatError("cannot read PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGBA;
  std::vector<png_byte> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  MaskGrid mask(static_cast<int>(img.height), static_cast<int>(img.width), 0.0);
  for (std::size_t p = 0; p < mask.size(); ++p) {
    const png_byte* px = &buf[4 * p];
    mask[p] = (px[0] | px[1] | px[2]) != 0 ? 1.0 : 0.0;
  }
  return mask;
}

void WriteMaskPng(const std::filesystem::path& path, const MaskGrid& mask) {
  std::vector<png_byte> buf(mask.size());
  for (std::size_t p = 0; p < mask.size(); ++p) buf[p] = mask[p] >= 0.5 ? 255 : 0;
  WriteBuffer(path, mask.width(), mask.height(), PNG_FORMAT_GRAY, buf);
}

void WriteImagePng(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != 3) throw ContractError("PNG previews need 3 channels");
  std::vector<png_byte> buf(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) buf[i] = ToByte(image[i]);
  WriteBuffer(path, image.width(), image.height(), PNG_FORMAT_RGB, buf);
}

}  // namespace dragscene
