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

// Data-parallel inner loops. Every kernel has a plain serial reference in
// `kernels::serial` and an OpenMP version in `kernels::parallel`. The parallel
// versions reduce per-row partials in a fixed order, so their output does not
// depend on the thread count.

#include <cstdint>
#include <span>
#include <vector>

#include "dragscene/grid.hpp"

namespace dragscene::kernels {

struct SplatSample {
  std::int32_t pixel = -1;  // flat target pixel index, < 0 means dropped
  double depth = 0.0;
  double center_dist2 = 0.0;  // squared distance to the pixel center
  std::int64_t key = 0;       // unique, order-independent tie breaker
};

// Regression terms of one view m of the alignment loss. Entry n of the
// per-frame spans holds the pair prediction of view m's pixels brought into
// the world frame through frame n.
struct RegressionViewInput {
  std::span<const Vec3> fused;
  std::span<const std::uint8_t> fused_valid;
  std::span<const double> mask;
  std::vector<std::span<const Vec3>> world_pred;
  std::vector<std::span<const std::uint8_t>> pred_valid;
  std::vector<std::span<const double>> confidence;
  int width = 0;
  int reference_index = 0;
  double inv_normalizer = 1.0;
  double epsilon = 1e-8;
};

namespace serial {

// Winner sample index per pixel (-1 when uncovered). Candidates are the samples
// within `depth_eps` of the nearest one; among them the smallest
// (center_dist2, key) wins.
std::vector<int> ZBufferSplat(std::span<const SplatSample> samples,
                              std::size_t num_pixels, double depth_eps);

// 3x3 box blur per channel; border pixels average their in-image neighbours.
Field BoxBlur(const Field& in);
Field BoxBlurAdjoint(const Field& cotangent);

// sum_p w_p sum_c |a - b|. Writes w_p * sign(a - b) into `grad` when it is
// non-empty (sign(0) = 0).
double MaskedL1(std::span<const double> a, std::span<const double> b,
                std::span<const double> pixel_weight, int channels,
                std::span<double> grad);

// Returns the loss of view m and, when `term_grad` is non-empty, writes the
// derivative of each term with respect to the fused point into
// term_grad[n * pixels + i].
double RegressionView(const RegressionViewInput& in, std::span<Vec3> term_grad);

}  // namespace serial

namespace parallel {

std::vector<int> ZBufferSplat(std::span<const SplatSample> samples,
                              std::size_t num_pixels, double depth_eps);
Field BoxBlur(const Field& in);
Field BoxBlurAdjoint(const Field& cotangent);
double MaskedL1(std::span<const double> a, std::span<const double> b,
                std::span<const double> pixel_weight, int channels,
                std::span<double> grad);
double RegressionView(const RegressionViewInput& in, std::span<Vec3> term_grad);

}  // namespace parallel

// Caps the OpenMP worker count from DRAGSCENE_THREADS when it is set.
void ConfigureThreadsFromEnv();

}  // namespace dragscene::kernels
