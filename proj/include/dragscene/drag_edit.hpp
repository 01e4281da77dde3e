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

#include <vector>

#include "dragscene/diffusion.hpp"
#include "dragscene/geometry.hpp"

namespace dragscene {

// User drag instruction on the reference image. Points are (column, row) in
// pixels.
struct EditSpec {
  int ref_view = 0;
  MaskGrid mask;
  std::vector<Vec2> handles;
  std::vector<Vec2> targets;

  // Throws InvalidInput when lengths differ, points leave a height x width
  // image or the mask is empty.
  void Validate(int height, int width) const;
  bool IsNoOp() const;
};

struct DragConfig {
  int m = 40;
  double lr = 0.01;
  double beta = 0.1;
  int r_track = 3;
};

struct DragResult {
  LatentGrid edited_latent_te;
  Image edited_image;
  LatentGrid reference_latent_tr;
  std::vector<Vec2> tracked_handles;  // pixels
  int steps = 0;                      // optimization steps actually taken
  bool clamped = false;
  std::vector<double> loss_trace;     // motion supervision loss per step
};

// sum_j |F(h_j + d_j) - F(h_j)|_1 with d_j the unit step toward target j.
// Positions in latent pixels. Writes dLoss/dF into `feature_grad` when it
// is non-null; the F(h_j) samples are treated as constants.
double MotionSupervisionLoss(const Field& features, const std::vector<Vec2>& handles,
                             const std::vector<Vec2>& targets, Field* feature_grad,
                             bool* clamped = nullptr);

// New handle position: the candidate h + (dx, dy), |dx|, |dy| <= radius,
// inside the grid whose bilinear feature is closest in L1 to `reference`.
// Ties go to the first candidate in row-major window order.
Vec2 TrackPoint(const Field& features, const Vec2& handle, std::span<const double> reference,
                int radius);

DragResult DragEdit(const Image& image, const EditSpec& spec, const Denoiser& den,
                    const Decoder& decoder, const Schedule& sched, const DragConfig& cfg);

// ddim_invert(encode(image), t_r).
LatentGrid ReinvertEdited(const Image& edited_image, const Denoiser& den,
                          const Decoder& decoder, const Schedule& sched);

}  // namespace dragscene
