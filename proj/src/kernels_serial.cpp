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

#include <cmath>
#include <limits>

#include "dragscene/kernels.hpp"

namespace dragscene::kernels::serial {

namespace {

bool Better(const SplatSample& a, const SplatSample& b) {
  if (a.center_dist2 != b.center_dist2) return a.center_dist2 < b.center_dist2;
  return a.key < b.key;
}

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace

std::vector<int> ZBufferSplat(std::span<const SplatSample> samples,
                              std::size_t num_pixels, double depth_eps) {
  std::vector<double> nearest(num_pixels, std::numeric_limits<double>::infinity());
  for (const SplatSample& s : samples) {
    if (s.pixel < 0) continue;
    double& d = nearest[static_cast<std::size_t>(s.pixel)];
    if (s.depth < d) d = s.depth;
  }
  std::vector<int> winner(num_pixels, -1);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const SplatSample& s = samples[k];
    if (s.pixel < 0) continue;
    const auto p = static_cast<std::size_t>(s.pixel);
    if (s.depth > nearest[p] + depth_eps) continue;
    if (winner[p] < 0 || Better(s, samples[static_cast<std::size_t>(winner[p])])) {
      winner[p] = static_cast<int>(k);
    }
  }
  return winner;
}

Field BoxBlur(const Field& in) {
  Field out(in.height(), in.width(), in.channels());
  for (int r = 0; r < in.height(); ++r) {
    for (int c = 0; c < in.width(); ++c) {
      for (int ch = 0; ch < in.channels(); ++ch) {
        double sum = 0.0;
        int n = 0;
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int rr = r + dr;
            const int cc = c + dc;
            if (rr < 0 || rr >= in.height() || cc < 0 || cc >= in.width()) continue;
            sum += in(rr, cc, ch);
            ++n;
          }
        }
        out(r, c, ch) = sum / n;
      }
    }
  }
  return out;
}

Field BoxBlurAdjoint(const Field& cotangent) {
  const int h = cotangent.height();
  const int w = cotangent.width();
  Field out(h, w, cotangent.channels());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const int rows = (r > 0) + 1 + (r + 1 < h);
      const int cols = (c > 0) + 1 + (c + 1 < w);
      const double share = 1.0 / (rows * cols);
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr;
          const int cc = c + dc;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          for (int ch = 0; ch < cotangent.channels(); ++ch) {
            out(rr, cc, ch) += share * cotangent(r, c, ch);
          }
        }
      }
    }
  }
  return out;
}

double MaskedL1(std::span<const double> a, std::span<const double> b,
                std::span<const double> pixel_weight, int channels,
                std::span<double> grad) {
  double loss = 0.0;
  for (std::size_t p = 0; p < pixel_weight.size(); ++p) {
    const double w = pixel_weight[p];
    for (int ch = 0; ch < channels; ++ch) {
      const std::size_t i = p * channels + ch;
      const double d = a[i] - b[i];
      loss += w * std::abs(d);
      if (!grad.empty()) grad[i] = w * Sign(d);
    }
  }
  return loss;
}

double RegressionView(const RegressionViewInput& in, std::span<Vec3> term_grad) {
  const std::size_t pixels = in.fused.size();
  const std::size_t frames = in.world_pred.size();
  const double inv_frames = 1.0 / static_cast<double>(frames);
  const double eps2 = in.epsilon * in.epsilon;
  double loss = 0.0;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!term_grad.empty()) {
      for (std::size_t n = 0; n < frames; ++n) term_grad[n * pixels + i].setZero();
    }
    if (!in.fused_valid[i]) continue;
    const double m = in.mask[i];
    for (std::size_t n = 0; n < frames; ++n) {
      if (!in.pred_valid[n][i]) continue;
      double weight = (1.0 - m) * inv_frames;
      if (static_cast<int>(n) == in.reference_index) weight += m;
      weight *= in.confidence[n][i];
      if (weight == 0.0) continue;
      const Vec3 r = (in.fused[i] - in.world_pred[n][i]) * in.inv_normalizer;
      const double sq = r.squaredNorm();
      const double d = std::sqrt(sq + eps2);
      loss += weight * sq / (d + in.epsilon);
      if (!term_grad.empty()) {
        term_grad[n * pixels + i] = (weight * in.inv_normalizer / d) * r;
      }
    }
  }
  return loss;
}

}  // namespace dragscene::kernels::serial
