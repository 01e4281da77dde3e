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
#include <random>

#include "doctest.h"

#include "dragscene/drag_edit.hpp"
#include "dragscene/errors.hpp"
#include "dragscene/latent_field.hpp"
#include "test_util.hpp"

using namespace dragscene;
using namespace dragscene::testing;

namespace {

Image Blob(int size, double cx, double cy, double radius) {
  Image img(size, size, 3);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      const double g = std::exp(-((c - cx) * (c - cx) + (r - cy) * (r - cy)) / (2 * radius * radius));
      img(r, c, 0) = 0.1 + 0.8 * g;
      img(r, c, 1) = 0.2 + 0.5 * g;
      img(r, c, 2) = 0.3;
    }
  }
  return img;
}

EditSpec BlobSpec(int size, Vec2 handle, Vec2 target) {
  EditSpec spec;
  spec.mask = MaskGrid(size, size, 1.0);
  spec.handles = {handle};
  spec.targets = {target};
  return spec;
}

}  // namespace

TEST_CASE("edit spec validation") {
  EditSpec spec = BlobSpec(8, Vec2(1, 1), Vec2(2, 1));
  CHECK_NOTHROW(spec.Validate(8, 8));
  CHECK_FALSE(spec.IsNoOp());
  CHECK_THROWS_AS(spec.Validate(8, 9), InvalidInput);
  EditSpec outside = spec;
  outside.targets[0] = Vec2(8.0, 1.0);
  CHECK_THROWS_AS(outside.Validate(8, 8), InvalidInput);
  EditSpec uneven = spec;
  uneven.targets.push_back(Vec2(0, 0));
  CHECK_THROWS_AS(uneven.Validate(8, 8), InvalidInput);
  EditSpec empty = spec;
  empty.mask = MaskGrid(8, 8, 0.0);
  CHECK_THROWS_AS(empty.Validate(8, 8), InvalidInput);
  EditSpec still = spec;
  still.targets = still.handles;
  CHECK(still.IsNoOp());
}

TEST_CASE("motion supervision loss on a ramp") {
  Field ramp(4, 5, 1);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 5; ++c) ramp(r, c, 0) = c * c;
  }
  Field grad(4, 5, 1, 0.0);
  bool clamped = false;
  // Unit step from (1, 1) toward (3, 1) lands on (2, 1): |4 - 1| = 3.
  const double loss = MotionSupervisionLoss(ramp, {Vec2(1, 1)}, {Vec2(3, 1)}, &grad, &clamped);
  CHECK(loss == 3.0);
  CHECK_FALSE(clamped);
  CHECK(grad(1, 2, 0) == 1.0);
  double total = 0.0;
  for (double g : grad.data()) total += std::abs(g);
  CHECK(total == 1.0);
  // A handle at the border stepping outward is clamped in place.
  Field g2(4, 5, 1, 0.0);
  CHECK(MotionSupervisionLoss(ramp, {Vec2(4, 1)}, {Vec2(4, 1)}, &g2, &clamped) == 0.0);
  CHECK_FALSE(clamped);
}

TEST_CASE("motion supervision gradient matches finite differences") {
  std::mt19937_64 rng(51);
  const Field f = RandomField(rng, 6, 6, 3);
  const std::vector<Vec2> handles = {Vec2(1.3, 2.2), Vec2(4.1, 3.6)};
  const std::vector<Vec2> targets = {Vec2(4.0, 1.0), Vec2(0.5, 3.6)};
  Field grad(6, 6, 3, 0.0);
  MotionSupervisionLoss(f, handles, targets, &grad);
  // The handle samples are constants, so perturbing the field moves only
  // the look-ahead terms; finite differences must freeze them as well.
  auto frozen = [&](const Field& g) {
    double loss = 0.0;
    std::vector<double> here(3);
    std::vector<double> ahead(3);
    for (std::size_t j = 0; j < handles.size(); ++j) {
      const Vec2 step = (targets[j] - handles[j]).normalized();
      const Vec2 next = handles[j] + step;
      SampleBilinear(f, handles[j].x(), handles[j].y(), here);
      SampleBilinear(g, next.x(), next.y(), ahead);
      for (int ch = 0; ch < 3; ++ch) loss += std::abs(ahead[ch] - here[ch]);
    }
    return loss;
  };
  const double h = 1e-7;
  for (std::size_t i = 0; i < f.size(); ++i) {
    Field plus = f;
    Field minus = f;
    plus[i] += h;
    minus[i] -= h;
    CHECK((frozen(plus) - frozen(minus)) / (2 * h) == doctest::Approx(grad[i]).epsilon(1e-6));
  }
}

TEST_CASE("point tracking") {
  Field f(7, 7, 2, 0.0);
  f(4, 5, 0) = 1.0;
  f(4, 5, 1) = -1.0;
  const std::vector<double> ref = {1.0, -1.0};
  CHECK(TrackPoint(f, Vec2(3, 3), ref, 2) == Vec2(5, 4));
  // Out of reach: the first window position with the smallest distance wins.
  CHECK(TrackPoint(f, Vec2(1, 1), ref, 1) == Vec2(0, 0));
  // The result never leaves the window, whatever the radius.
  std::mt19937_64 rng(52);
  const Field noise = RandomField(rng, 12, 12, 3);
  std::uniform_real_distribution<double> u(0.0, 11.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec2 h(std::floor(u(rng)), std::floor(u(rng)));
    const int radius = trial % 4;
    const Vec2 q = TrackPoint(noise, h, std::vector<double>{0.1, 0.2, -0.3}, radius);
    CHECK(std::abs(q.x() - h.x()) <= radius);
    CHECK(std::abs(q.y() - h.y()) <= radius);
  }
}

TEST_CASE("a drag that goes nowhere returns the input") {
  const Image img = Blob(16, 7, 7, 2.5);
  const ScalarLinearDenoiser den(0.1);
  const IdentityDecoder dec;
  const Schedule sched = MakeSchedule(50, 1e-4, 0.02);
  for (int m : {0, 40}) {
    EditSpec spec = BlobSpec(16, Vec2(7, 7), Vec2(7, 7));
    if (m == 0) spec.targets[0] = Vec2(11, 7);
    DragConfig cfg;
    cfg.m = m;
    const DragResult r = DragEdit(img, spec, den, dec, sched, cfg);
    CHECK(r.steps == 0);
    CHECK(r.loss_trace.empty());
    double worst = 0.0;
    for (std::size_t i = 0; i < img.size(); ++i) {
      worst = std::max(worst, std::abs(r.edited_image[i] - img[i]));
    }
    CHECK(worst < 1e-6);
    CHECK(r.reference_latent_tr.timestep == sched.t_r);
    CHECK(r.edited_latent_te.timestep == sched.t_e);
  }
}

TEST_CASE("dragging a blob moves the tracked handle toward the target") {
  const Image img = Blob(16, 5, 8, 2.0);
  const SmoothingDenoiser den;
  const IdentityDecoder dec;
  const Schedule sched = MakeSchedule(50, 1e-4, 0.02);
  EditSpec spec = BlobSpec(16, Vec2(5, 8), Vec2(10, 8));
  DragConfig cfg;
  cfg.m = 40;
  cfg.lr = 0.5;
  cfg.beta = 0.0;
  const DragResult r = DragEdit(img, spec, den, dec, sched, cfg);
  REQUIRE(r.steps > 0);
  const double before = (spec.handles[0] - spec.targets[0]).norm();
  const double after = (r.tracked_handles[0] - spec.targets[0]).norm();
  MESSAGE("tracked handle " << r.tracked_handles[0].transpose() << " after " << r.steps << " steps");
  CHECK(after < before);
  // The brightest column of the edited image follows the handle.
  int best = 0;
  for (int c = 1; c < 16; ++c) {
    if (r.edited_image(8, c, 0) > r.edited_image(8, best, 0)) best = c;
  }
  CHECK(best > 5);
}

TEST_CASE("drag loss decreases at a small step size") {
  const Image img = Blob(16, 5, 8, 2.0);
  const SmoothingDenoiser den;
  const IdentityDecoder dec;
  const Schedule sched = MakeSchedule(50, 1e-4, 0.02);
  DragConfig cfg;
  cfg.m = 20;
  cfg.lr = 1e-3;
  cfg.r_track = 0;
  const DragResult r = DragEdit(img, BlobSpec(16, Vec2(5, 8), Vec2(10, 8)), den, dec, sched, cfg);
  REQUIRE(r.loss_trace.size() == 20);
  for (std::size_t k = 1; k < r.loss_trace.size(); ++k) {
    CHECK(r.loss_trace[k] <= r.loss_trace[k - 1] + 1e-12);
  }
  CHECK(r.loss_trace.back() < r.loss_trace.front());
}

TEST_CASE("drag configuration and latent stride") {
  const Image img = Blob(16, 5, 8, 2.0);
  const ScalarLinearDenoiser den;
  const LinearDecoder dec(3, 4, 3);
  const Schedule sched = MakeSchedule(50, 1e-4, 0.02);
  DragConfig bad;
  bad.m = -1;
  CHECK_THROWS_AS(DragEdit(img, BlobSpec(16, Vec2(5, 8), Vec2(10, 8)), den, dec, sched, bad),
                  ConfigError);
  DragConfig cfg;
  cfg.m = 3;
  const DragResult r = DragEdit(img, BlobSpec(16, Vec2(5, 8), Vec2(13, 8)), den, dec, sched, cfg);
  CHECK(r.edited_latent_te.height() == 4);
  CHECK(r.edited_image.height() == 16);
  // Tracked handles are reported in image pixels.
  CHECK(r.tracked_handles[0].x() >= 5.0);
  CHECK(r.tracked_handles[0].x() <= 15.0);
  CHECK_THROWS_AS(LinearDecoder(4, 4, 3).Encode(img), ConfigError);
}
