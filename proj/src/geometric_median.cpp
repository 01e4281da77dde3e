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

#include "dragscene/geometric_median.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace dragscene {

namespace {

double Objective(std::span<const Vec3> p, std::span<const double> w, const Vec3& x) {
  double f = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) f += w[k] * (x - p[k]).norm();
  return f;
}

}  // namespace

Vec3 WeightedGeometricMedian(std::span<const Vec3> points,
                             std::span<const double> weights, const Vec3& start,
                             int max_iters, double tol) {
  std::vector<Vec3> p;
  std::vector<double> w;
  p.reserve(points.size());
  w.reserve(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (weights[k] > 0.0) {
      p.push_back(points[k]);
      w.push_back(weights[k]);
    }
  }
  if (p.empty()) return start;
  if (p.size() == 1) return p[0];

  // Best anchor point first: if it satisfies the optimality condition
  // |R(a_j)| <= w_j it is the median.
  std::size_t best = 0;
  double best_f = Objective(p, w, p[0]);
  for (std::size_t k = 1; k < p.size(); ++k) {
    const double f = Objective(p, w, p[k]);
    if (f < best_f) {
      best_f = f;
      best = k;
    }
  }

  // Step away from anchor j along -R(a_j): S = a_j + (|R| - w_j) / L * dir.
  auto anchor_step = [&](std::size_t j, Vec3* out) -> bool {
    Vec3 r = Vec3::Zero();
    double l = 0.0;
    double w_here = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = (p[k] - p[j]).norm();
      if (d == 0.0) {
        w_here += w[k];
        continue;
      }
      r += w[k] * (p[j] - p[k]) / d;
      l += w[k] / d;
    }
    const double rn = r.norm();
    if (rn <= w_here || l == 0.0) {
      *out = p[j];
      return false;
    }
    *out = p[j] - (rn - w_here) / l * (r / rn);
    return true;
  };

  Vec3 x = start;
  if (!start.allFinite() || Objective(p, w, start) > best_f) {
    Vec3 s;
    if (!anchor_step(best, &s)) return s;
    x = s;
  }
  for (int it = 0; it < max_iters; ++it) {
    Vec3 num = Vec3::Zero();
    double den = 0.0;
    std::size_t at_anchor = p.size();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double d = (x - p[k]).norm();
      if (d == 0.0) {
        at_anchor = k;
        break;
      }
      num += (w[k] / d) * p[k];
      den += w[k] / d;
    }
    Vec3 next;
    if (at_anchor < p.size()) {
      if (!anchor_step(at_anchor, &next)) return next;
    } else {
      next = num / den;
    }
    const double change = (next - x).norm();
    x = next;
    if (change <= tol * (1.0 + x.norm())) break;
  }
  return x;
}

}  // namespace dragscene
