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
#include "dragscene/latent_field.hpp"

namespace dragscene {

struct MVOptConfig {
  double lambda = 1.0;
  double sigma = 0.05;
  int m_iters = 60;
  double mask_threshold = 0.5;
  // Difference the initial latent instead of the iterate in the
  // reconstruction loss. The loss is then constant in z.
  bool literal_rec = false;

  void Validate() const;
};

struct LossTerms {
  double rec = 0.0;
  double mask = 0.0;
  double total = 0.0;
};

// sum |z - latent_map| weighted by mask_map on covered pixels. Adds the
// gradient into `grad` when non-null.
double RecLoss(const LatentGrid& z_cur, const RenderedMaps& maps, Field* grad = nullptr);

// sum |D(z_cur) - D(z_init)| weighted by (1 - mask_map), D the one-step
// denoise. `init_prediction` is D(z_init), treated as a constant.
double MaskLoss(const LatentGrid& z_cur, const Field& init_prediction, const RenderedMaps& maps,
                const Denoiser& den, const Schedule& sched, Field* grad = nullptr);

// L_rec + lambda L_mask and its gradient at z_cur.
LossTerms TotalLoss(const LatentGrid& z_cur, const LatentGrid& z_init,
                    const Field& init_prediction, const RenderedMaps& maps,
                    const Denoiser& den, const Schedule& sched, const MVOptConfig& cfg,
                    Field* grad = nullptr);

struct ViewOptimization {
  LatentGrid latent;
  std::vector<LossTerms> trace;  // losses at iterates 0..m_iters-1
  Field init_prediction;         // cached D(z_init)
};

ViewOptimization OptimizeViewLatent(const LatentGrid& z_init, const RenderedMaps& maps,
                                    const Denoiser& den, const Schedule& sched,
                                    const MVOptConfig& cfg);

struct ViewEditResult {
  int view_id = 0;
  LatentGrid inverted_latent;   // z_{t_r} of the original view
  LatentGrid optimized_latent;
  LatentGrid clean_latent;      // optimized latent denoised to step 0
  Image edited_image;
  Image round_trip_image;       // decode(denoise(invert(image)))
  std::vector<LossTerms> loss_trace;
  RenderedMaps maps;
  bool zero_coverage = false;
};

ViewEditResult EditView(const Image& image, const AttributedPointCloud& cloud,
                        const CameraView& cam, const Denoiser& den, const Decoder& decoder,
                        const Schedule& sched, const MVOptConfig& cfg);

}  // namespace dragscene
