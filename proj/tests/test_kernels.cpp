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
#include <numeric>
#include <random>

#include "doctest.h"

#include "dragscene/kernels.hpp"
#include "test_util.hpp"

using namespace dragscene;
namespace ks = dragscene::kernels::serial;
namespace kp = dragscene::kernels::parallel;
using dragscene::testing::RandomField;

namespace {

std::vector<kernels::SplatSample> RandomSamples(std::mt19937_64& rng, std::size_t n,
                                                std::size_t pixels) {
  std::uniform_int_distribution<int> pix(-1, static_cast<int>(pixels) - 1);
  std::uniform_real_distribution<double> depth(1.0, 1.001);
  std::uniform_real_distribution<double> dist(0.0, 0.5);
  std::vector<kernels::SplatSample> s(n);
  for (std::size_t k = 0; k < n; ++k) {
    s[k] = {pix(rng), depth(rng), dist(rng), static_cast<std::int64_t>(k * 7919 % 100003)};
  }
  return s;
}

struct RegressionFixture {
  int h = 5, w = 6, frames = 3;
  std::vector<Vec3> fused;
  std::vector<std::uint8_t> fused_valid;
  std::vector<double> mask;
  std::vector<std::vector<Vec3>> pred;
  std::vector<std::vector<std::uint8_t>> valid;
  std::vector<std::vector<double>> conf;

  explicit RegressionFixture(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t px = static_cast<std::size_t>(h * w);
    for (std::size_t i = 0; i < px; ++i) {
      fused.emplace_back(n(rng), n(rng), n(rng));
      fused_valid.push_back(u(rng) > 0.1);
      mask.push_back(u(rng) > 0.5 ? 1.0 : u(rng));
    }
    pred.resize(frames);
    valid.resize(frames);
    conf.resize(frames);
    for (int f = 0; f < frames; ++f) {
      for (std::size_t i = 0; i < px; ++i) {
        pred[f].emplace_back(n(rng), n(rng), n(rng));
        valid[f].push_back(u(rng) > 0.1);
        conf[f].push_back(u(rng) * 2.0);
      }
    }
  }

  kernels::RegressionViewInput Input() const {
    kernels::RegressionViewInput in;
    in.fused = fused;
    in.fused_valid = fused_valid;
    in.mask = mask;
    for (int f = 0; f < frames; ++f) {
      in.world_pred.emplace_back(pred[f]);
      in.pred_valid.emplace_back(valid[f]);
      in.confidence.emplace_back(conf[f]);
    }
    in.width = w;
    in.reference_index = 0;
    in.inv_normalizer = 0.7;
    return in;
  }
};

}  // namespace

TEST_CASE("z-buffer splat: serial and parallel agree for every thread count") {
  std::mt19937_64 rng(11);
  const std::size_t pixels = 97;
  const auto samples = RandomSamples(rng, 2000, pixels);
  const std::vector<int> ref = ks::ZBufferSplat(samples, pixels, 1e-4);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    CHECK(kp::ZBufferSplat(samples, pixels, 1e-4) == ref);
  }
  omp_set_num_threads(1);
}

TEST_CASE("z-buffer splat: nearer point wins and ties use distance then key") {
  std::vector<kernels::SplatSample> s = {
      {0, 2.0, 0.0, 0}, {0, 1.0, 0.2, 1}, {1, 1.0, 0.3, 5}, {1, 1.00005, 0.1, 9},
      {2, 1.0, 0.1, 4}, {2, 1.0, 0.1, 3}, {-1, 0.1, 0.0, 2}};
  const std::vector<int> w = ks::ZBufferSplat(s, 4, 1e-4);
  CHECK(w[0] == 1);
  CHECK(w[1] == 3);
  CHECK(w[2] == 5);
  CHECK(w[3] == -1);
  // The winner is a property of the sample set, not of its order.
  std::vector<kernels::SplatSample> shuffled = s;
  std::mt19937_64 rng(5);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const std::vector<int> ws = ks::ZBufferSplat(shuffled, 4, 1e-4);
  for (int p = 0; p < 3; ++p) CHECK(shuffled[ws[p]].key == s[w[p]].key);
}

TEST_CASE("box blur: serial, parallel and adjoint") {
  std::mt19937_64 rng(12);
  const Field x = RandomField(rng, 9, 13, 3);
  const Field y = RandomField(rng, 9, 13, 3);
  const Field bx = ks::BoxBlur(x);
  CHECK(kp::BoxBlur(x) == bx);
  const Field aty = ks::BoxBlurAdjoint(y);
  CHECK(kp::BoxBlurAdjoint(y) == aty);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += bx[i] * y[i];
    rhs += x[i] * aty[i];
  }
  CHECK(std::abs(lhs - rhs) < 1e-12);
  const Field blurred = ks::BoxBlur(Field(4, 4, 2, 3.5));
  for (double v : blurred.data()) CHECK(std::abs(v - 3.5) < 1e-15);
}

TEST_CASE("masked L1: hand values and serial/parallel agreement") {
  const std::vector<double> a = {1.0, -2.0, 0.5, 0.5};
  const std::vector<double> b = {0.0, 1.0, 0.5, 1.5};
  const std::vector<double> w = {2.0, 0.5};
  std::vector<double> g(4, 0.0);
  // 2 * (1 + 3) + 0.5 * (0 + 1)
  CHECK(ks::MaskedL1(a, b, w, 2, g) == doctest::Approx(8.5).epsilon(1e-15));
  CHECK(g == std::vector<double>{2.0, -2.0, 0.0, -0.5});

  std::mt19937_64 rng(13);
  const Field fa = RandomField(rng, 20, 17, 4);
  const Field fb = RandomField(rng, 20, 17, 4);
  std::vector<double> weight(fa.pixels());
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : weight) v = u(rng);
  std::vector<double> gs(fa.size()), gp(fa.size());
  const double ls = ks::MaskedL1(fa.data(), fb.data(), weight, 4, gs);
  const double lp = kp::MaskedL1(fa.data(), fb.data(), weight, 4, gp);
  CHECK(std::abs(ls - lp) <= 1e-12 * ls);
  CHECK(gs == gp);
  for (int threads : {1, 3}) {
    omp_set_num_threads(threads);
    CHECK(kp::MaskedL1(fa.data(), fb.data(), weight, 4, {}) == lp);
  }
  omp_set_num_threads(1);
}

TEST_CASE("regression view: serial and parallel agree") {
  std::mt19937_64 rng(14);
  const RegressionFixture fx(rng);
  const auto in = fx.Input();
  const std::size_t n = fx.fused.size() * fx.frames;
  std::vector<Vec3> gs(n, Vec3::Zero()), gp(n, Vec3::Zero());
  const double ls = ks::RegressionView(in, gs);
  const double lp = kp::RegressionView(in, gp);
  CHECK(ls > 0.0);
  CHECK(std::abs(ls - lp) <= 1e-12 * ls);
  for (std::size_t i = 0; i < n; ++i) CHECK((gs[i] - gp[i]).norm() <= 1e-15);
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    CHECK(kp::RegressionView(in, {}) == lp);
  }
  omp_set_num_threads(1);
}

TEST_CASE("regression view: one pixel by hand") {
  // One pixel, two frames, mask 0: each term is conf/2 * |X - Y| / d.
  const std::vector<Vec3> fused = {Vec3(1, 0, 0)};
  const std::vector<std::uint8_t> fv = {1};
  const std::vector<double> mask = {0.0};
  const std::vector<Vec3> p0 = {Vec3(1, 3, 4)};
  const std::vector<Vec3> p1 = {Vec3(1, 0, 0)};  // exact fit
  const std::vector<std::uint8_t> v = {1};
  const std::vector<double> c = {1.0};
  kernels::RegressionViewInput in;
  in.fused = fused;
  in.fused_valid = fv;
  in.mask = mask;
  in.world_pred = {p0, p1};
  in.pred_valid = {v, v};
  in.confidence = {c, c};
  in.width = 1;
  in.inv_normalizer = 0.5;
  // Each term is conf * weight * (sqrt(|r|^2 + eps^2) - eps) with r scaled by 0.5:
  // 1/2 * (2.5 - 1e-8) + 1/2 * 0
  CHECK(ks::RegressionView(in, {}) == doctest::Approx(1.25 - 0.5e-8).epsilon(1e-14));
  const std::vector<double> ones = {1.0};
  in.mask = ones;
  // mask 1 keeps only the reference term at full weight: 5 * 0.5
  CHECK(ks::RegressionView(in, {}) == doctest::Approx(2.5 - 1e-8).epsilon(1e-14));
}
