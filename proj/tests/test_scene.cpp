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
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"

#include "dragscene/errors.hpp"
#include "dragscene/scene.hpp"

using namespace dragscene;

namespace {

struct OracleHit {
  double t = std::numeric_limits<double>::infinity();
  int primitive = -1;
  Vec3 normal = Vec3::Zero();
};

// Parallelogram c + a u + b v with |a|, |b| <= 1, solved as a 3x3 system.
bool HitParallelogram(const Vec3& o, const Vec3& d, const Vec3& c, const Vec3& u, const Vec3& v,
                      double* t) {
  Mat3 a;
  a.col(0) = d;
  a.col(1) = -u;
  a.col(2) = -v;
  if (std::abs(a.determinant()) < 1e-14) return false;
  const Vec3 x = a.fullPivLu().solve(c - o);
  if (x[0] <= kZNear || std::abs(x[1]) > 1.0 || std::abs(x[2]) > 1.0) return false;
  *t = x[0];
  return true;
}

// Chord midpoint construction, independent of the quadratic formula.
bool HitSphere(const Vec3& o, const Vec3& d, const Vec3& c, double radius, double* t) {
  const Vec3 dn = d.normalized();
  const double along = (c - o).dot(dn);
  const double miss2 = (c - o).squaredNorm() - along * along;
  if (miss2 > radius * radius) return false;
  const double s = (along - std::sqrt(radius * radius - miss2)) / d.norm();
  if (s <= kZNear) return false;
  *t = s;
  return true;
}

OracleHit Trace(const SceneGeometry& g, const Vec3& o, const Vec3& d) {
  OracleHit best;
  auto offer = [&](double t, int k, const Vec3& n) {
    if (t < best.t) best = {t, k, n};
  };
  for (int k = 0; k < static_cast<int>(g.primitives.size()); ++k) {
    const Primitive& p = g.primitives[k];
    double t = 0.0;
    if (p.type == Primitive::Type::kQuad) {
      if (HitParallelogram(o, d, p.center, p.axis_u, p.axis_v, &t)) {
        offer(t, k, p.axis_u.cross(p.axis_v).normalized());
      }
    } else if (p.type == Primitive::Type::kSphere) {
      if (HitSphere(o, d, p.center, p.half_extent.x(), &t)) {
        offer(t, k, (o + t * d - p.center).normalized());
      }
    } else {
      // Six faces; only faces that look at the ray origin can be entry faces.
      for (int axis = 0; axis < 3; ++axis) {
        for (double s : {-1.0, 1.0}) {
          Vec3 n = Vec3::Zero();
          n[axis] = s;
          if (n.dot(d) >= 0.0) continue;
          Vec3 u = Vec3::Zero();
          Vec3 v = Vec3::Zero();
          u[(axis + 1) % 3] = p.half_extent[(axis + 1) % 3];
          v[(axis + 2) % 3] = p.half_extent[(axis + 2) % 3];
          if (HitParallelogram(o, d, p.center + s * p.half_extent[axis] * n.cwiseAbs(), u, v,
                               &t)) {
            offer(t, k, n);
          }
        }
      }
    }
  }
  return best;
}

Vec3 Center(const CameraView& cam) { return -cam.rotation().transpose() * cam.translation(); }

Vec3 OracleShade(const Primitive& p, const Vec3& x, const Vec3& n) {
  const Vec3 light = Vec3(-0.3, -1.0, -0.5) / std::sqrt(0.09 + 1.0 + 0.25);
  const double lambert = 0.6 + 0.4 * std::abs(n.dot(light));
  const Vec3 q = x - p.center;
  const double arg = p.frequency * (q.x() + 0.7 * q.y() + 0.4 * q.z());
  Vec3 out;
  for (int k = 0; k < 3; ++k) out[k] = p.color[k] * lambert * (0.75 + 0.25 * std::sin(arg + p.phase[k]));
  return out;
}

}  // namespace

TEST_CASE("renderer matches an independent ray caster") {
  for (SceneKind kind : {SceneKind::kTwoBox, SceneKind::kPlaneBillboards, SceneKind::kTexturedBlobs}) {
    const Scene scene = GenerateSyntheticScene(kind, 4, 11, 32, 32);
    for (const CameraView& cam : scene.cameras) {
      const RenderedView rv = RenderView(scene.geometry, cam);
      const Mat3 rt = cam.rotation().transpose();
      const Vec3 origin = -rt * cam.translation();
      int mismatched = 0;
      for (int r = 0; r < cam.height; ++r) {
        for (int c = 0; c < cam.width; ++c) {
          const Vec3 ray = rt * Vec3((c - cam.intrinsics.cx) / cam.intrinsics.fx,
                                     (r - cam.intrinsics.cy) / cam.intrinsics.fy, 1.0);
          const OracleHit hit = Trace(scene.geometry, origin, ray);
          if (hit.primitive != rv.primitive_id(r, c)) {
            ++mismatched;
            continue;
          }
          if (hit.primitive < 0) {
            CHECK(rv.points.valid(r, c) == 0);
            for (int ch = 0; ch < 3; ++ch) CHECK(rv.image(r, c, ch) == scene.geometry.background[ch]);
            continue;
          }
          const Vec3 x = origin + hit.t * ray;
          CHECK((rv.points.points(r, c) - x).norm() < 1e-6);
          const Vec3 color = OracleShade(scene.geometry.primitives[hit.primitive], x, hit.normal);
          for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(rv.image(r, c, ch) - color[ch]) < 1e-6);
        }
      }
      CHECK(mismatched == 0);
    }
  }
}

TEST_CASE("arc cameras look at the origin from the trajectory") {
  Trajectory traj;
  const CameraView cam = ArcCamera(3, 20.0, traj, 40, 30);
  const double a = 20.0 * std::numbers::pi / 180.0;
  const Vec3 center(4.0 * std::sin(a), -0.5, -4.0 * std::cos(a));
  CHECK((Center(cam) - center).norm() < 1e-12);
  const Vec3 origin_cam = cam.rotation() * Vec3::Zero() + cam.translation();
  CHECK(std::abs(origin_cam.x()) < 1e-12);
  CHECK(std::abs(origin_cam.y()) < 1e-12);
  CHECK(origin_cam.z() == doctest::Approx(center.norm()));
  CHECK(cam.intrinsics.fx == doctest::Approx(36.0));
  CHECK(cam.intrinsics.cx == doctest::Approx(19.5));
  CHECK(cam.intrinsics.cy == doctest::Approx(14.5));
}

TEST_CASE("synthetic scenes are deterministic and span the arc") {
  const Scene a = GenerateSyntheticScene(SceneKind::kTwoBox, kDefaultViewCount, 5);
  const Scene b = GenerateSyntheticScene(SceneKind::kTwoBox, kDefaultViewCount, 5);
  REQUIRE(a.size() == 20);
  for (int k = 0; k < a.size(); ++k) {
    CHECK(a.cameras[k].view_id == k);
    CHECK(a.cameras[k].pose == b.cameras[k].pose);
    CHECK(a.images[k].data() == b.images[k].data());
  }
  const Scene c = GenerateSyntheticScene(SceneKind::kTwoBox, kDefaultViewCount, 6);
  CHECK(a.images[0].data() != c.images[0].data());
  const double a0 = std::atan2(Center(a.cameras.front()).x(), -Center(a.cameras.front()).z());
  const double a1 = std::atan2(Center(a.cameras.back()).x(), -Center(a.cameras.back()).z());
  CHECK(a0 * 180.0 / std::numbers::pi == doctest::Approx(-30.0));
  CHECK(a1 * 180.0 / std::numbers::pi == doctest::Approx(30.0));
  CHECK(a.edit.primitive == 2);
  CHECK(ParseSceneKind("textured-blobs") == SceneKind::kTexturedBlobs);
  CHECK(SceneKindName(SceneKind::kPlaneBillboards) == "plane-billboards");
  CHECK_THROWS_AS(ParseSceneKind("cube"), ConfigError);
  CHECK_THROWS_AS(GenerateSyntheticScene(SceneKind::kTwoBox, 1, 0), ContractError);
  CHECK_THROWS_AS(a.IndexOf(20), ContractError);
}

TEST_CASE("edit region covers the edited primitive before and after the move") {
  const Scene scene = GenerateSyntheticScene(SceneKind::kTwoBox, 3, 2, 32, 32);
  const CameraView& cam = scene.cameras[1];
  const MaskGrid region = EditRegion(scene, cam);
  const RenderedView before = RenderView(scene.geometry, cam);
  const RenderedView after = RenderView(EditedGeometry(scene), cam);
  int count = 0;
  for (std::size_t i = 0; i < region.size(); ++i) {
    const bool expect = before.primitive_id[i] == 2 || after.primitive_id[i] == 2;
    CHECK((region[i] == 1.0) == expect);
    count += expect;
  }
  CHECK(count > 0);
  CHECK((EditedGeometry(scene).primitives[2].center - scene.geometry.primitives[2].center -
         scene.edit.displacement).norm() == 0.0);
}

TEST_CASE("noise-free provider returns ground truth in the target frame") {
  const Scene scene = GenerateSyntheticScene(SceneKind::kTwoBox, 4, 3, 24, 24);
  const SyntheticProvider provider(scene, 1, 0.0, 0);
  const SceneGeometry edited = EditedGeometry(scene);
  for (int s = 0; s < 4; ++s) {
    const RenderedView orig = RenderView(scene.geometry, scene.cameras[s]);
    const RenderedView moved = RenderView(edited, scene.cameras[s]);
    const MaskGrid region = EditRegion(scene, scene.cameras[s]);
    for (int t = 0; t < 4; ++t) {
      const PairwisePrediction p = provider.Predict(s, t);
      CHECK(p.src_view == s);
      CHECK(p.tgt_view == t);
      CHECK(p.pointmap.frame == t);
      const bool involves_ref = s == 1 || t == 1;
      const CameraView& tgt = scene.cameras[t];
      for (std::size_t i = 0; i < orig.points.points.size(); ++i) {
        const RenderedView& src = involves_ref && region[i] >= 0.5 ? moved : orig;
        REQUIRE(p.pointmap.valid[i] == src.points.valid[i]);
        CHECK(p.confidence[i] == 1.0);
        if (!src.points.valid[i]) continue;
        const Vec3 expect = tgt.rotation() * src.points.points[i] + tgt.translation();
        CHECK((p.pointmap.points[i] - expect).norm() < 1e-12);
      }
    }
  }
  CHECK_THROWS_AS(provider.Predict(0, 7), ContractError);
  CHECK_THROWS_AS(SyntheticProvider(scene, 9, 0.0, 0), ContractError);
  CHECK_THROWS_AS(SyntheticProvider(scene, 0, -1.0, 0), ContractError);
}

TEST_CASE("provider noise is seeded per pair with the requested spread") {
  const Scene scene = GenerateSyntheticScene(SceneKind::kTwoBox, 3, 4, 64, 64);
  const double sigma = 0.05;
  const SyntheticProvider clean(scene, 1, 0.0, 0);
  const SyntheticProvider noisy(scene, 1, sigma, 9);
  const SyntheticProvider again(scene, 1, sigma, 9);
  const SyntheticProvider other(scene, 1, sigma, 10);
  double sum = 0.0;
  double sum2 = 0.0;
  std::size_t n = 0;
  for (int s = 0; s < 3; ++s) {
    for (int t = 0; t < 3; ++t) {
      const PairwisePrediction a = noisy.Predict(s, t);
      const PairwisePrediction b = again.Predict(s, t);
      const PairwisePrediction c = other.Predict(s, t);
      const PairwisePrediction g = clean.Predict(s, t);
      bool differs = false;
      for (std::size_t i = 0; i < a.pointmap.points.size(); ++i) {
        if (!g.pointmap.valid[i]) continue;
        CHECK(a.pointmap.points[i] == b.pointmap.points[i]);
        differs |= a.pointmap.points[i] != c.pointmap.points[i];
        const Vec3 e = a.pointmap.points[i] - g.pointmap.points[i];
        for (int k = 0; k < 3; ++k) {
          sum += e[k];
          sum2 += e[k] * e[k];
          ++n;
        }
      }
      CHECK(differs);
    }
  }
  REQUIRE(n >= 10000);
  const double mean = sum / n;
  const double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(std::abs(sd - sigma) < 0.1 * sigma);
  CHECK(std::abs(mean) < 0.1 * sigma);
}
