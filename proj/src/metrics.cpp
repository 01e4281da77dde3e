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

#include "dragscene/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "dragscene/errors.hpp"
#include "dragscene/kernels.hpp"

namespace dragscene {

namespace {

struct SumSq {
  double sum = 0.0;
  std::size_t count = 0;
};

SumSq SquaredError(const Image& a, const Image& b, const MaskGrid& include) {
  if (!a.SameShape(b) || include.height() != a.height() || include.width() != a.width()) {
    throw ContractError("images and mask differ in shape");
  }
  SumSq out;
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (include(r, c) < 0.5) continue;
      for (int ch = 0; ch < a.channels(); ++ch) {
        const double d = a(r, c, ch) - b(r, c, ch);
        out.sum += d * d;
        ++out.count;
      }
    }
  }
  return out;
}

}  // namespace

double PsnrFromMse(double mse) {
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double Psnr(const Image& a, const Image& b, const MaskGrid& include) {
  const SumSq e = SquaredError(a, b, include);
  return e.count == 0 ? kPsnrCap : PsnrFromMse(e.sum / e.count);
}

double MaskedLatentVariance(const AttributedPointCloud& cloud,
                            std::span<const CameraView> cameras,
                            std::span<const Field> latents, int latent_stride,
                            double threshold, int* measured_points) {
  if (cameras.size() != latents.size()) throw ContractError("one latent per camera expected");
  const int channels = cloud.channels;
  struct ViewGrid {
    Intrinsics k;
    RenderedMaps maps;
  };
  std::vector<ViewGrid> grids;
  for (const CameraView& cam : cameras) {
    grids.push_back({cam.intrinsics.Downsampled(latent_stride),
                     RenderLatentMap(cloud, cam, latent_stride)});
  }
  double total = 0.0;
  int points = 0;
  std::vector<double> sample(static_cast<std::size_t>(channels));
  std::vector<double> mean(static_cast<std::size_t>(channels));
  std::vector<double> sq(static_cast<std::size_t>(channels));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (cloud.mask_weights[i] < threshold) continue;
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(sq.begin(), sq.end(), 0.0);
    int seen = 0;
    for (std::size_t v = 0; v < cameras.size(); ++v) {
      const CameraView& cam = cameras[v];
      const Field& lat = latents[v];
      const Vec3 p = cam.rotation() * cloud.positions[i] + cam.translation();
      int col = 0;
      int row = 0;
      if (!NearestPixel(p, grids[v].k, lat.width(), lat.height(), &col, &row)) continue;
      const RenderedMaps& maps = grids[v].maps;
      if (!maps.coverage(row, col) || p.z() > maps.depth(row, col) * 1.01) continue;
      const Vec2 uv = ProjectPoint(p, grids[v].k);
      SampleBilinear(lat, uv.x(), uv.y(), sample);
      for (int ch = 0; ch < channels; ++ch) {
        mean[ch] += sample[ch];
        sq[ch] += sample[ch] * sample[ch];
      }
      ++seen;
    }
    if (seen < 2) continue;
    double var = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
      const double m = mean[ch] / seen;
      var += std::max(0.0, sq[ch] / seen - m * m);
    }
    total += var / channels;
    ++points;
  }
  if (measured_points != nullptr) *measured_points = points;
  return points == 0 ? 0.0 : total / points;
}

Image WarpReferenceImage(const AttributedPointCloud& cloud, const Image& reference,
                         const CameraView& cam, MaskGrid* covered) {
  const RenderedMaps maps = RenderLatentMap(cloud, cam, 1);
  Image out(cam.height, cam.width, reference.channels(), 0.0);
  if (covered != nullptr) *covered = MaskGrid(cam.height, cam.width, 0.0);
  for (int r = 0; r < cam.height; ++r) {
    for (int c = 0; c < cam.width; ++c) {
      const int idx = maps.winner(r, c);
      if (idx < 0) continue;
      const auto [u, v] = cloud.source_pixel[static_cast<std::size_t>(idx)];
      for (int ch = 0; ch < reference.channels(); ++ch) out(r, c, ch) = reference(v, u, ch);
      if (covered != nullptr) (*covered)(r, c) = 1.0;
    }
  }
  return out;
}

double MaskedMeanL1(const Image& a, const Image& b, const MaskGrid& include,
                    std::size_t* count) {
  if (!a.SameShape(b)) throw ContractError("images differ in shape");
  double sum = 0.0;
  std::size_t pixels = 0;
  for (int r = 0; r < a.height(); ++r) {
    for (int c = 0; c < a.width(); ++c) {
      if (include(r, c) < 0.5) continue;
      for (int ch = 0; ch < a.channels(); ++ch) sum += std::abs(a(r, c, ch) - b(r, c, ch));
      ++pixels;
    }
  }
  if (count != nullptr) *count = pixels;
  return pixels == 0 ? 0.0 : sum / (static_cast<double>(pixels) * a.channels());
}

ConsistencyReport ComputeConsistency(const ConsistencyInputs& in) {
  const std::size_t views = in.cameras.size();
  if (in.cloud == nullptr || in.clean_latents.size() != views ||
      in.edited_images.size() != views || in.round_trip_images.size() != views ||
      in.view_masks.size() != views) {
    throw ContractError("consistency inputs must cover every view");
  }
  ConsistencyReport report;
  report.latent_variance = MaskedLatentVariance(*in.cloud, in.cameras, in.clean_latents,
                                                in.latent_stride, in.threshold,
                                                &report.measured_points);
  const Image& reference = in.edited_images[static_cast<std::size_t>(in.reference_index)];
  SumSq pooled;
  double agreement_sum = 0.0;
  int agreement_views = 0;
  for (std::size_t v = 0; v < views; ++v) {
    ViewMetrics vm;
    vm.view_id = in.cameras[v].view_id;
    const MaskGrid& mask = in.view_masks[v];
    MaskGrid binary(mask.height(), mask.width(), 0.0);
    for (std::size_t p = 0; p < mask.size(); ++p) binary[p] = mask[p] >= in.threshold ? 1.0 : 0.0;
    MaskGrid outside = DilateMask(binary, 1);
    for (double& x : outside.data()) x = 1.0 - x;
    const SumSq e = SquaredError(in.edited_images[v], in.round_trip_images[v], outside);
    vm.psnr = e.count == 0 ? kPsnrCap : PsnrFromMse(e.sum / e.count);
    if (static_cast<int>(v) != in.reference_index) {
      pooled.sum += e.sum;
      pooled.count += e.count;
      MaskGrid covered;
      const Image warped = WarpReferenceImage(*in.cloud, reference, in.cameras[v], &covered);
      for (std::size_t p = 0; p < covered.size(); ++p) covered[p] *= binary[p];
      vm.agreement_l1 = MaskedMeanL1(in.edited_images[v], warped, covered, &vm.masked_pixels);
      if (vm.masked_pixels > 0) {
        agreement_sum += vm.agreement_l1;
        ++agreement_views;
      }
    }
    report.per_view.push_back(vm);
  }
  report.image_agreement = agreement_views == 0 ? 0.0 : agreement_sum / agreement_views;
  report.preservation_psnr =
      pooled.count == 0 ? kPsnrCap : PsnrFromMse(pooled.sum / pooled.count);
  return report;
}

}  // namespace dragscene
