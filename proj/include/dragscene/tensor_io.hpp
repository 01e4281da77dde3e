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

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "dragscene/geometry.hpp"

namespace dragscene {

// Binary container: "DSTN", u32 version = 1, u8 dtype (1 = float32), u8 ndim,
// ndim x u32 dims, row-major float32 payload. Everything little-endian.
struct Tensor {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::size_t NumElements() const;
  bool operator==(const Tensor&) const = default;
};

inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::uint8_t kDtypeFloat32 = 1;

std::string EncodeTensor(const Tensor& tensor);
// Throws FormatError naming the offending field.
Tensor DecodeTensor(std::string_view bytes);

void WriteTensor(const std::filesystem::path& path, const Tensor& tensor);
Tensor ReadTensor(const std::filesystem::path& path);

struct TensorHeader {
  std::uint32_t version = 0;
  std::uint8_t dtype = 0;
  std::vector<std::uint32_t> dims;
};
TensorHeader ReadTensorHeader(const std::filesystem::path& path);

Tensor FieldToTensor(const Field& field);  // H x W x C
Field TensorToField(const Tensor& tensor);
Tensor MaskToTensor(const MaskGrid& mask);  // H x W
MaskGrid TensorToMask(const Tensor& tensor);
Tensor PointsToTensor(const std::vector<Vec3>& points);  // N x 3

std::string ReadFileBytes(const std::filesystem::path& path);
void WriteFileBytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace dragscene
