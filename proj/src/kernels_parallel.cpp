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

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>

#include "dragscene/kernels.hpp"

namespace dragscene::kernels {

void ConfigureThreadsFromEnv() {
  const char* env = std::getenv("DRAGSCENE_THREADS");
  if (env == nullptr) return;
  const int n = std::atoi(env);
  if (n > 0) omp_set_num_threads(n);
}

namespace parallel {

namespace {

bool Better(const SplatSample& a, const SplatSample& b) {
  if (a.center_dist2 != b.center_dist2) return a.center_dist2 < b.center_dist2;
  return a.key < b.key;
}

double Sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Sums per-row partials in row order.
double OrderedSum(const std::vector<double>& partials) {
  return std::accumulate(partials.begin(), partials.end(), 0.0);
}

}  // namespace

std::vector<int> ZBufferSplat(std::span<const SplatSample> samples,
                              std::size_t num_pixels, double depth_eps) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const int threads = omp_get_max_threads();
  if (threads == 1 || samples.size() < 4096) {
    return serial::ZBufferSplat(samples, num_pixels, depth_eps);
  }
  std::vector<double> nearest(num_pixels, kInf);
  std::vector<int> winner(num_pixels, -1);

  // Both passes use a total order on samples, so merging the per-thread
  // buffers in any order gives the serial result.
  std::vector<std::vector<double>> local_depth(threads);
  std::vector<std::vector<int>> local_winner(threads);
  const auto n = static_cast<std::int64_t>(samples.size());
#pragma omp parallel num_threads(threads)
  {
    const int tid = omp_get_thread_num();
    std::vector<double>& ld = local_depth[tid];
    ld.assign(num_pixels, kInf);
#pragma omp for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
      const SplatSample& s = samples[k];
      if (s.pixel < 0) continue;
      double& d = ld[static_cast<std::size_t>(s.pixel)];
      if (s.depth < d) d = s.depth;
    }
#pragma omp for schedule(static)
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(num_pixels); ++p) {
      double d = kInf;
      for (int t = 0; t < threads; ++t) {
        if (!local_depth[t].empty()) d = std::min(d, local_depth[t][p]);
      }
      nearest[p] = d;
    }
    std::vector<int>& lw = local_winner[tid];
    lw.assign(num_pixels, -1);
#pragma omp for schedule(static)
    for (std::int64_t k = 0; k < n; ++k) {
      const SplatSample& s = samples[k];
      if (s.pixel < 0) continue;
      const auto p = static_cast<std::size_t>(s.pixel);
      if (s.depth > nearest[p] + depth_eps) continue;
      if (lw[p] < 0 || Better(s, samples[static_cast<std::size_t>(lw[p])])) {
        lw[p] = static_cast<int>(k);
      }
    }
#pragma omp for schedule(static)
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(num_pixels); ++p) {
      int best = -1;
      for (int t = 0; t < threads; ++t) {
        if (local_winner[t].empty()) continue;
        const int c = local_winner[t][p];
        if (c < 0) continue;
        if (best < 0 || Better(samples[c], samples[best])) best = c;
      }
      winner[p] = best;
    }
  }
  return winner;
}

Field BoxBlur(const Field& in) {
  const int h = in.height();
  const int w = in.width();
  const int channels = in.channels();
  Field out(h, w, channels);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    const int r0 = std::max(r - 1, 0);
    const int r1 = std::min(r + 1, h - 1);
    for (int c = 0; c < w; ++c) {
      const int c0 = std::max(c - 1, 0);
      const int c1 = std::min(c + 1, w - 1);
      const int count = (r1 - r0 + 1) * (c1 - c0 + 1);
      for (int ch = 0; ch < channels; ++ch) {
        double sum = 0.0;
        for (int rr = r0; rr <= r1; ++rr) {
          for (int cc = c0; cc <= c1; ++cc) sum += in(rr, cc, ch);
        }
        out(r, c, ch) = sum / count;
      }
    }
  }
  return out;
}

Field BoxBlurAdjoint(const Field& cotangent) {
  const int h = cotangent.height();
  const int w = cotangent.width();
  const int channels = cotangent.channels();
  // Gather form of the scatter in the serial reference: pixel (r,c) collects
  // share(p) * g(p) from every neighbour p whose window contains it.
  Field out(h, w, channels);
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        double sum = 0.0;
        for (int rr = std::max(r - 1, 0); rr <= std::min(r + 1, h - 1); ++rr) {
          const int rows = (rr > 0) + 1 + (rr + 1 < h);
          for (int cc = std::max(c - 1, 0); cc <= std::min(c + 1, w - 1); ++cc) {
            const int cols = (cc > 0) + 1 + (cc + 1 < w);
            sum += (1.0 / (rows * cols)) * cotangent(rr, cc, ch);
          }
        }
        out(r, c, ch) = sum;
      }
    }
  }
  return out;
}

double MaskedL1(std::span<const double> a, std::span<const double> b,
                std::span<const double> pixel_weight, int channels,
                std::span<double> grad) {
  const auto pixels = static_cast<std::int64_t>(pixel_weight.size());
  std::vector<double> partial(static_cast<std::size_t>(pixels), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < pixels; ++p) {
    const double w = pixel_weight[p];
    double acc = 0.0;
    for (int ch = 0; ch < channels; ++ch) {
      const std::size_t i = static_cast<std::size_t>(p) * channels + ch;
      const double d = a[i] - b[i];
      acc += w * std::abs(d);
      if (!grad.empty()) grad[i] = w * Sign(d);
    }
    partial[p] = acc;
  }
  return OrderedSum(partial);
}

double RegressionView(const RegressionViewInput& in, std::span<Vec3> term_grad) {
  const std::size_t pixels = in.fused.size();
  const std::size_t frames = in.world_pred.size();
  const double inv_frames = 1.0 / static_cast<double>(frames);
  const double eps2 = in.epsilon * in.epsilon;
  const int width = std::max(in.width, 1);
  const auto rows = static_cast<std::int64_t>((pixels + width - 1) / width);
  std::vector<double> partial(static_cast<std::size_t>(rows), 0.0);
#pragma omp parallel for schedule(static)
  for (std::int64_t row = 0; row < rows; ++row) {
    double acc = 0.0;
    const std::size_t begin = static_cast<std::size_t>(row) * width;
    const std::size_t end = std::min(pixels, begin + width);
    for (std::size_t i = begin; i < end; ++i) {
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
        acc += weight * sq / (d + in.epsilon);
        if (!term_grad.empty()) {
          term_grad[n * pixels + i] = (weight * in.inv_normalizer / d) * r;
        }
      }
    }
    partial[static_cast<std::size_t>(row)] = acc;
  }
  return OrderedSum(partial);
}

}  // namespace parallel
}  // namespace dragscene::kernels
