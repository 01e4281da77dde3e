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

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dragscene/alignment.hpp"
#include "dragscene/diffusion.hpp"
#include "dragscene/geometry.hpp"

namespace dragscene {

// Bilinear sample at continuous grid position (x = column, y = row). The
// position is clamped to the grid first.
void SampleBilinear(const Field& field, double x, double y, std::span<double> out);
// Adjoint of SampleBilinear with respect to the field: adds the weighted
// `value` into the four neighbours of (x, y).
void ScatterBilinear(Field* field, double x, double y, std::span<const double> value);

// Mean of every stride x stride block.
MaskGrid DownsampleMask(const MaskGrid& mask, int stride);
// Nearest upsampling by `stride`.
MaskGrid UpsampleMask(const MaskGrid& mask, int stride);

// Points of the reference view carrying a latent vector and a mask weight.
struct AttributedPointCloud {
  std::vector<Vec3> positions;
  std::vector<double> latents;  // size() x channels, row-major
  std::vector<double> mask_weights;
  std::vector<std::array<int, 2>> source_pixel;  // (column, row)
  int channels = 0;
  int timestep = 0;
  int frame = 0;

  std::size_t size() const { return positions.size(); }
  std::span<const double> latent(std::size_t k) const {
    return {latents.data() + k * static_cast<std::size_t>(channels),
            static_cast<std::size_t>(channels)};
  }
};

AttributedPointCloud BuildAttributedCloud(const AlignmentState& aligned,
                                          const LatentGrid& ref_latent,
                                          const MaskGrid& mask);

struct RenderedMaps {
  LatentGrid latent_map;
  MaskGrid mask_map;
  Grid<std::uint8_t> coverage;
  Grid<double> depth;  // camera depth of the winner, 0 when uncovered
  Grid<int> winner;    // cloud index, -1 when uncovered

  std::size_t CoveredCount() const;
};

// Nearest-pixel z-buffered splat of the cloud at latent resolution.
RenderedMaps RenderLatentMap(const AttributedPointCloud& cloud, const CameraView& cam,
                             int latent_stride);

}  // namespace dragscene
