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

#include <span>
#include <vector>

#include "dragscene/geometry.hpp"
#include "dragscene/latent_field.hpp"

namespace dragscene {

inline constexpr double kPsnrCap = 99.0;

// 10 log10(1 / MSE) over pixels with include[p] >= 0.5, capped at kPsnrCap.
double Psnr(const Image& a, const Image& b, const MaskGrid& include);
double PsnrFromMse(double mse);

// Mean over masked cloud points (mask weight >= threshold) of the population
// variance of the latent samples across the views that see the point,
// averaged over channels. A view sees a point when it projects inside the
// latent grid no more than 1% behind the nearest cloud point there.
// `latents[k]` belongs to `cameras[k]`.
double MaskedLatentVariance(const AttributedPointCloud& cloud,
                            std::span<const CameraView> cameras,
                            std::span<const Field> latents, int latent_stride,
                            double threshold = 0.5, int* measured_points = nullptr);

// Reference image carried into `cam` through the cloud at image resolution.
// `covered` marks pixels that received a point.
Image WarpReferenceImage(const AttributedPointCloud& cloud, const Image& reference,
                         const CameraView& cam, MaskGrid* covered);

// Mean absolute difference over pixels with include >= 0.5 and all channels;
// 0 when nothing is included. `count` receives the pixel count.
double MaskedMeanL1(const Image& a, const Image& b, const MaskGrid& include,
                    std::size_t* count = nullptr);

struct ViewMetrics {
  int view_id = 0;
  double agreement_l1 = 0.0;
  double psnr = 0.0;
  std::size_t masked_pixels = 0;
};

struct ConsistencyReport {
  double latent_variance = 0.0;
  double image_agreement = 0.0;
  double preservation_psnr = 0.0;
  int measured_points = 0;
  std::vector<ViewMetrics> per_view;
};

struct ConsistencyInputs {
  const AttributedPointCloud* cloud = nullptr;
  std::span<const CameraView> cameras;      // every view, reference frame
  std::span<const Field> clean_latents;     // per view
  std::span<const Image> edited_images;     // per view
  std::span<const Image> round_trip_images; // per view
  std::span<const MaskGrid> view_masks;     // per view, image resolution
  int reference_index = 0;
  int latent_stride = 1;
  double threshold = 0.5;
};

// Latent variance over the cloud's masked points, masked agreement of every
// other view with the warped edited reference, and pooled preservation PSNR
// of every other view outside its mask dilated by one pixel.
ConsistencyReport ComputeConsistency(const ConsistencyInputs& in);

}  // namespace dragscene
