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

#include "dragscene/latent_field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dragscene/errors.hpp"
#include "dragscene/kernels.hpp"

namespace dragscene {

namespace {

struct Corners {
  int c0, c1, r0, r1;
  double fx, fy;
};

Corners Locate(int height, int width, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(height - 1));
  Corners k;
  k.c0 = static_cast<int>(std::floor(x));
  k.r0 = static_cast<int>(std::floor(y));
  k.c1 = std::min(k.c0 + 1, width - 1);
  k.r1 = std::min(k.r0 + 1, height - 1);
  k.fx = x - k.c0;
  k.fy = y - k.r0;
  return k;
}

}  // namespace

void SampleBilinear(const Field& field, double x, double y, std::span<double> out) {
  const Corners k = Locate(field.height(), field.width(), x, y);
  const double w00 = (1.0 - k.fx) * (1.0 - k.fy);
  const double w01 = k.fx * (1.0 - k.fy);
  const double w10 = (1.0 - k.fx) * k.fy;
  const double w11 = k.fx * k.fy;
  for (int ch = 0; ch < field.channels(); ++ch) {
    out[ch] = w00 * field(k.r0, k.c0, ch) + w01 * field(k.r0, k.c1, ch) +
              w10 * field(k.r1, k.c0, ch) + w11 * field(k.r1, k.c1, ch);
  }
}

void ScatterBilinear(Field* field, double x, double y, std::span<const double> value) {
  const Corners k = Locate(field->height(), field->width(), x, y);
  const double w00 = (1.0 - k.fx) * (1.0 - k.fy);
  const double w01 = k.fx * (1.0 - k.fy);
  const double w10 = (1.0 - k.fx) * k.fy;
  const double w11 = k.fx * k.fy;
  for (int ch = 0; ch < field->channels(); ++ch) {
    (*field)(k.r0, k.c0, ch) += w00 * value[ch];
    (*field)(k.r0, k.c1, ch) += w01 * value[ch];
    (*field)(k.r1, k.c0, ch) += w10 * value[ch];
    (*field)(k.r1, k.c1, ch) += w11 * value[ch];
  }
}

MaskGrid DownsampleMask(const MaskGrid& mask, int stride) {
  if (stride < 1 || mask.height() % stride != 0 || mask.width() % stride != 0) {
    throw ContractError("mask shape is not divisible by the latent stride");
  }
  MaskGrid out(mask.height() / stride, mask.width() / stride, 0.0);
  const double inv = 1.0 / (stride * stride);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) {
      double sum = 0.0;
      for (int dr = 0; dr < stride; ++dr) {
        for (int dc = 0; dc < stride; ++dc) sum += mask(r * stride + dr, c * stride + dc);
      }
      out(r, c) = sum * inv;
    }
  }
  return out;
}

MaskGrid UpsampleMask(const MaskGrid& mask, int stride) {
  MaskGrid out(mask.height() * stride, mask.width() * stride, 0.0);
  for (int r = 0; r < out.height(); ++r) {
    for (int c = 0; c < out.width(); ++c) out(r, c) = mask(r / stride, c / stride);
  }
  return out;
}

AttributedPointCloud BuildAttributedCloud(const AlignmentState& aligned,
                                          const LatentGrid& ref_latent,
                                          const MaskGrid& mask) {
  if (aligned.size() < 1) throw ContractError("alignment state has no views");
  const Pointmap& ref = aligned.fused.front();
  if (mask.height() != ref.height() || mask.width() != ref.width()) {
    throw ContractError("mask must be at reference image resolution");
  }
  const int s = ref_latent.stride;
  if (ref_latent.height() * s != ref.height() || ref_latent.width() * s != ref.width()) {
    throw ContractError("reference latent does not match the image at stride " +
                        std::to_string(s));
  }
  if (!ref_latent.values.AllFinite()) throw InvalidInput("reference latent is not finite");
  AttributedPointCloud cloud;
  cloud.channels = ref_latent.channels();
  cloud.timestep = ref_latent.timestep;
  cloud.frame = ref.frame;
  std::vector<double> sample(static_cast<std::size_t>(cloud.channels));
  for (int r = 0; r < ref.height(); ++r) {
    for (int c = 0; c < ref.width(); ++c) {
      if (!ref.valid(r, c)) continue;
      cloud.positions.push_back(ref.points(r, c));
      SampleBilinear(ref_latent.values, static_cast<double>(c) / s,
                     static_cast<double>(r) / s, sample);
      cloud.latents.insert(cloud.latents.end(), sample.begin(), sample.end());
      cloud.mask_weights.push_back(std::clamp(mask(r, c), 0.0, 1.0));
      cloud.source_pixel.push_back({c, r});
    }
  }
  if (cloud.positions.empty()) {
    throw EmptySceneError("reference view has no valid pixels to build a cloud from");
  }
  return cloud;
}

std::size_t RenderedMaps::CoveredCount() const {
  return static_cast<std::size_t>(
      std::count(coverage.data().begin(), coverage.data().end(), std::uint8_t{1}));
}

RenderedMaps RenderLatentMap(const AttributedPointCloud& cloud, const CameraView& cam,
                             int latent_stride) {
  cam.Validate();
  if (latent_stride < 1 || cam.height % latent_stride != 0 ||
      cam.width % latent_stride != 0) {
    throw ContractError("camera image is not divisible by the latent stride");
  }
  const int h = cam.height / latent_stride;
  const int w = cam.width / latent_stride;
  const Intrinsics k = cam.intrinsics.Downsampled(latent_stride);
  const Mat3 rot = cam.rotation();
  const Vec3 tr = cam.translation();

  std::vector<kernels::SplatSample> samples(cloud.size());
  std::vector<double> depth(cloud.size(), 0.0);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = rot * cloud.positions[i] + tr;
    kernels::SplatSample& s = samples[i];
    const auto [u, v] = cloud.source_pixel[i];
    s.key = static_cast<std::int64_t>(v) * cam.width + u;
    int col = 0;
    int row = 0;
    if (!NearestPixel(p, k, w, h, &col, &row)) continue;
    const Vec2 uv = ProjectPoint(p, k);
    s.pixel = row * w + col;
    s.depth = p.z();
    s.center_dist2 = (uv - Vec2(col, row)).squaredNorm();
    depth[i] = p.z();
  }
  const std::vector<int> winner =
      kernels::parallel::ZBufferSplat(samples, static_cast<std::size_t>(h * w), kDepthEpsilon);

  RenderedMaps maps{LatentGrid{Field(h, w, cloud.channels), cloud.timestep, latent_stride},
                    MaskGrid(h, w, 0.0), Grid<std::uint8_t>(h, w, 0), Grid<double>(h, w, 0.0),
                    Grid<int>(h, w, -1)};
  for (std::size_t p = 0; p < winner.size(); ++p) {
    const int idx = winner[p];
    if (idx < 0) continue;
    const auto latent = cloud.latent(static_cast<std::size_t>(idx));
    std::copy(latent.begin(), latent.end(),
              maps.latent_map.values.data().begin() + p * cloud.channels);
    maps.mask_map[p] = cloud.mask_weights[idx];
    maps.coverage[p] = 1;
    maps.depth[p] = depth[idx];
    maps.winner[p] = idx;
  }
  return maps;
}

}  // namespace dragscene
