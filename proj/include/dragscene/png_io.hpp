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

#include <filesystem>

#include "dragscene/grid.hpp"

namespace dragscene {

// 1 where any color channel is nonzero, 0 elsewhere. Alpha is ignored.
MaskGrid ReadMaskPng(const std::filesystem::path& path);
// 8-bit grayscale, 255 where mask >= 0.5.
void WriteMaskPng(const std::filesystem::path& path, const MaskGrid& mask);
// 8-bit RGB preview with values clamped to [0, 1].
void WriteImagePng(const std::filesystem::path& path, const Image& image);

}  // namespace dragscene
