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

#include "dragscene/scene.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "dragscene/errors.hpp"

namespace dragscene {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool IntersectBox(const Primitive& p, const Vec3& o, const Vec3& d, double* t_hit,
                  Vec3* normal) {
  double t0 = -kInf;
  double t1 = kInf;
  int axis = -1;
  double sign = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double lo = p.center[k] - p.half_extent[k];
    const double hi = p.center[k] + p.half_extent[k];
    if (d[k] == 0.0) {
      if (o[k] < lo || o[k] > hi) return false;
      continue;
    }
    double a = (lo - o[k]) / d[k];
    double b = (hi - o[k]) / d[k];
    double s = -1.0;
    if (a > b) {
      std::swap(a, b);
      s = 1.0;
    }
    if (a > t0) {
      t0 = a;
      axis = k;
      sign = s;
    }
    t1 = std::min(t1, b);
  }
  if (t0 > t1 || axis < 0 || t0 <= kZNear) return false;
  *t_hit = t0;
  *normal = Vec3::Zero();
  (*normal)[axis] = sign;
  return true;
}

bool IntersectSphere(const Primitive& p, const Vec3& o, const Vec3& d, double* t_hit,
                     Vec3* normal) {
  const Vec3 oc = o - p.center;
  const double a = d.squaredNorm();
  const double b = oc.dot(d);
  const double c = oc.squaredNorm() - p.half_extent.x() * p.half_extent.x();
  const double disc = b * b - a * c;
  if (disc < 0.0) return false;
  const double t = (-b - std::sqrt(disc)) / a;
  if (t <= kZNear) return false;
  *t_hit = t;
  *normal = (o + t * d - p.center).normalized();
  return true;
}

bool IntersectQuad(const Primitive& p, const Vec3& o, const Vec3& d, double* t_hit,
                   Vec3* normal) {
  const Vec3 n = p.axis_u.cross(p.axis_v).normalized();
  const double denom = d.dot(n);
  if (denom == 0.0) return false;
  const double t = (p.center - o).dot(n) / denom;
  if (t <= kZNear) return false;
  const Vec3 rel = o + t * d - p.center;
  const double a = rel.dot(p.axis_u) / p.axis_u.squaredNorm();
  const double b = rel.dot(p.axis_v) / p.axis_v.squaredNorm();
  if (std::abs(a) > 1.0 || std::abs(b) > 1.0) return false;
  *t_hit = t;
  *normal = n;
  return true;
}

Primitive MakeBox(const Vec3& center, const Vec3& half, const Vec3& color) {
  Primitive p;
  p.type = Primitive::Type::kBox;
  p.center = center;
  p.half_extent = half;
  p.color = color;
  return p;
}

Primitive MakeSphere(const Vec3& center, double radius, const Vec3& color) {
  Primitive p;
  p.type = Primitive::Type::kSphere;
  p.center = center;
  p.half_extent = Vec3(radius, radius, radius);
  p.color = color;
  return p;
}

Primitive MakeQuad(const Vec3& center, const Vec3& u, const Vec3& v, const Vec3& color) {
  Primitive p;
  p.type = Primitive::Type::kQuad;
  p.center = center;
  p.axis_u = u;
  p.axis_v = v;
  p.color = color;
  return p;
}

}  // namespace

std::string SceneKindName(SceneKind kind) {
  switch (kind) {
    case SceneKind::kTwoBox:
      return "two-box";
    case SceneKind::kPlaneBillboards:
      return "plane-billboards";
    case SceneKind::kTexturedBlobs:
      return "textured-blobs";
  }
  return "two-box";
}

SceneKind ParseSceneKind(const std::string& name) {
  if (name == "two-box") return SceneKind::kTwoBox;
  if (name == "plane-billboards") return SceneKind::kPlaneBillboards;
  if (name == "textured-blobs") return SceneKind::kTexturedBlobs;
  throw ConfigError("unknown scene kind '" + name + "'");
}

bool CastRay(const SceneGeometry& geometry, const Vec3& origin, const Vec3& dir,
             RayHit* hit) {
  hit->t = kInf;
  hit->primitive = -1;
  for (std::size_t k = 0; k < geometry.primitives.size(); ++k) {
    const Primitive& p = geometry.primitives[k];
    double t = 0.0;
    Vec3 n;
    bool found = false;
    switch (p.type) {
      case Primitive::Type::kBox:
        found = IntersectBox(p, origin, dir, &t, &n);
        break;
      case Primitive::Type::kSphere:
        found = IntersectSphere(p, origin, dir, &t, &n);
        break;
      case Primitive::Type::kQuad:
        found = IntersectQuad(p, origin, dir, &t, &n);
        break;
    }
    if (found && t < hit->t) {
      hit->t = t;
      hit->primitive = static_cast<int>(k);
      hit->normal = n;
    }
  }
  return hit->primitive >= 0;
}

Vec3 ShadePoint(const Primitive& primitive, const Vec3& point, const Vec3& normal) {
  const Vec3 local = point - primitive.center;
  const Vec3 light = Vec3(-0.3, -1.0, -0.5).normalized();
  const double shade = 0.6 + 0.4 * std::abs(normal.dot(light));
  const double s = primitive.frequency * (local.x() + 0.7 * local.y() + 0.4 * local.z());
  Vec3 c;
  for (int k = 0; k < 3; ++k) {
    c[k] = primitive.color[k] * shade * (0.75 + 0.25 * std::sin(s + primitive.phase[k]));
  }
  return c;
}

RenderedView RenderView(const SceneGeometry& geometry, const CameraView& cam) {
  const int h = cam.height;
  const int w = cam.width;
  RenderedView out{Image(h, w, 3), Pointmap(kWorldFrame, h, w), Grid<int>(h, w, -1)};
  const Mat3 rt = cam.rotation().transpose();
  const Vec3 origin = -rt * cam.translation();
  const Intrinsics& k = cam.intrinsics;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const Vec3 dir_cam((c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0);
      const Vec3 dir = rt * dir_cam;
      RayHit hit;
      Vec3 color = geometry.background;
      if (CastRay(geometry, origin, dir, &hit)) {
        // Depth along the optical axis equals t because dir_cam.z = 1.
        const Vec3 p_cam = LiftPixel(c, r, hit.t, k);
        const Vec3 p = rt * (p_cam - cam.translation());
        out.points.points(r, c) = p;
        out.points.valid(r, c) = 1;
        out.primitive_id(r, c) = hit.primitive;
        color = ShadePoint(geometry.primitives[hit.primitive], p, hit.normal);
      }
      for (int ch = 0; ch < 3; ++ch) out.image(r, c, ch) = color[ch];
    }
  }
  return out;
}

int Scene::IndexOf(int view_id) const {
  for (int k = 0; k < size(); ++k) {
    if (cameras[k].view_id == view_id) return k;
  }
  throw ContractError("unknown view id " + std::to_string(view_id));
}

CameraView ArcCamera(int view_id, double angle_deg, const Trajectory& trajectory, int width,
                     int height) {
  const double a = angle_deg * std::numbers::pi / 180.0;
  const Vec3 center(trajectory.radius * std::sin(a), trajectory.height,
                    -trajectory.radius * std::cos(a));
  const Vec3 z = (-center).normalized();
  const Vec3 x = Vec3(0.0, 1.0, 0.0).cross(z).normalized();
  const Vec3 y = z.cross(x);
  Mat3 r;
  r.row(0) = x.transpose();
  r.row(1) = y.transpose();
  r.row(2) = z.transpose();
  CameraView cam;
  cam.view_id = view_id;
  cam.pose = MakePose(r, -r * center);
  cam.intrinsics = {0.9 * width, 0.9 * width, (width - 1) / 2.0, (height - 1) / 2.0};
  cam.width = width;
  cam.height = height;
  return cam;
}

Scene GenerateSyntheticScene(SceneKind kind, int n_views, std::uint64_t seed, int width,
                             int height, const Trajectory& trajectory) {
  if (n_views < 2) throw ContractError("a scene needs at least 2 views");
  if (width < 4 || height < 4) throw ContractError("scene images must be at least 4x4");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto jitter = [&](double amount) { return amount * (2.0 * unit(rng) - 1.0); };
  auto color = [&](double r, double g, double b) {
    return Vec3(std::clamp(r + jitter(0.08), 0.05, 1.0), std::clamp(g + jitter(0.08), 0.05, 1.0),
                std::clamp(b + jitter(0.08), 0.05, 1.0));
  };

  Scene scene;
  scene.kind = kind;
  scene.seed = seed;
  scene.trajectory = trajectory;
  scene.scene_id = SceneKindName(kind) + "-" + std::to_string(seed);

  SceneGeometry& g = scene.geometry;
  g.primitives.push_back(MakeQuad(Vec3(0.0, -4.5, 3.0), Vec3(20.0, 0.0, 0.0),
                                  Vec3(0.0, 5.5, 0.0), color(0.55, 0.6, 0.7)));
  g.primitives.push_back(MakeQuad(Vec3(0.0, 1.0, 0.0), Vec3(20.0, 0.0, 0.0),
                                  Vec3(0.0, 0.0, 3.0), color(0.6, 0.5, 0.35)));
  g.primitives[0].frequency = 2.0;
  g.primitives[1].frequency = 3.0;
  switch (kind) {
    case SceneKind::kTwoBox:
      g.primitives.push_back(MakeBox(Vec3(-0.55 + jitter(0.05), 0.55, jitter(0.05)),
                                     Vec3(0.45, 0.45, 0.45), color(0.85, 0.25, 0.2)));
      g.primitives.push_back(MakeBox(Vec3(0.75 + jitter(0.05), 0.6, 0.6 + jitter(0.05)),
                                     Vec3(0.4, 0.4, 0.4), color(0.2, 0.45, 0.85)));
      scene.edit = {2, Vec3(0.4, 0.0, 0.0)};
      break;
    case SceneKind::kPlaneBillboards:
      g.primitives.push_back(MakeQuad(Vec3(-0.6 + jitter(0.05), 0.1, -0.2),
                                      Vec3(0.45, 0.0, 0.0), Vec3(0.0, 0.6, 0.0),
                                      color(0.9, 0.3, 0.3)));
      g.primitives.push_back(MakeQuad(Vec3(0.5 + jitter(0.05), 0.0, 0.8),
                                      Vec3(0.5, 0.0, 0.0), Vec3(0.0, 0.7, 0.0),
                                      color(0.3, 0.8, 0.4)));
      g.primitives.push_back(MakeQuad(Vec3(1.6, -0.2, 1.8), Vec3(0.45, 0.0, 0.0),
                                      Vec3(0.0, 0.6, 0.0), color(0.35, 0.4, 0.9)));
      scene.edit = {2, Vec3(0.4, 0.0, 0.0)};
      break;
    case SceneKind::kTexturedBlobs:
      g.primitives.push_back(
          MakeSphere(Vec3(-0.6 + jitter(0.05), 0.5, 0.0), 0.5, color(0.9, 0.5, 0.2)));
      g.primitives.push_back(
          MakeSphere(Vec3(0.7, 0.55, 0.7 + jitter(0.05)), 0.45, color(0.3, 0.7, 0.8)));
      g.primitives.push_back(
          MakeSphere(Vec3(0.1, 0.7, -0.9), 0.3, color(0.8, 0.3, 0.7)));
      scene.edit = {2, Vec3(0.4, 0.0, 0.0)};
      break;
  }
  for (Primitive& p : g.primitives) {
    p.phase = Vec3(unit(rng), unit(rng), unit(rng)) * 2.0 * std::numbers::pi;
  }

  for (int k = 0; k < n_views; ++k) {
    const double frac = static_cast<double>(k) / (n_views - 1);
    const double angle = -trajectory.arc_degrees + 2.0 * trajectory.arc_degrees * frac;
    scene.cameras.push_back(ArcCamera(k, angle, trajectory, width, height));
    scene.images.push_back(RenderView(g, scene.cameras.back()).image);
  }
  return scene;
}

SceneGeometry EditedGeometry(const Scene& scene) {
  SceneGeometry g = scene.geometry;
  g.primitives.at(static_cast<std::size_t>(scene.edit.primitive)).center +=
      scene.edit.displacement;
  return g;
}

MaskGrid EditRegion(const Scene& scene, const CameraView& cam) {
  const RenderedView before = RenderView(scene.geometry, cam);
  const RenderedView after = RenderView(EditedGeometry(scene), cam);
  MaskGrid region(cam.height, cam.width, 0.0);
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (before.primitive_id[i] == scene.edit.primitive ||
        after.primitive_id[i] == scene.edit.primitive) {
      region[i] = 1.0;
    }
  }
  return region;
}

SyntheticProvider::SyntheticProvider(const Scene& scene, int reference_view,
                                     double noise_sigma, std::uint64_t seed)
    : cameras_(scene.cameras),
      reference_view_(reference_view),
      noise_sigma_(noise_sigma),
      seed_(seed) {
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw ContractError("noise_sigma must be finite and >= 0");
  }
  scene.IndexOf(reference_view);
  const SceneGeometry edited = EditedGeometry(scene);
  for (const CameraView& cam : cameras_) {
    RenderedView before = RenderView(scene.geometry, cam);
    RenderedView after = RenderView(edited, cam);
    MaskGrid region(cam.height, cam.width, 0.0);
    for (std::size_t i = 0; i < region.size(); ++i) {
      if (before.primitive_id[i] == scene.edit.primitive ||
          after.primitive_id[i] == scene.edit.primitive) {
        region[i] = 1.0;
      }
    }
    original_.push_back(std::move(before.points));
    edited_.push_back(std::move(after.points));
    regions_.push_back(std::move(region));
  }
}

int SyntheticProvider::IndexOf(int view_id) const {
  for (std::size_t k = 0; k < cameras_.size(); ++k) {
    if (cameras_[k].view_id == view_id) return static_cast<int>(k);
  }
  throw ContractError("provider has no view " + std::to_string(view_id));
}

PairwisePrediction SyntheticProvider::Predict(int src_view, int tgt_view) const {
  const int s = IndexOf(src_view);
  const int t = IndexOf(tgt_view);
  const bool involves_ref = src_view == reference_view_ || tgt_view == reference_view_;
  const Pointmap& orig = original_[s];
  const CameraView& tgt = cameras_[t];
  PairwisePrediction out;
  out.src_view = src_view;
  out.tgt_view = tgt_view;
  out.pointmap = Pointmap(tgt_view, orig.height(), orig.width());
  out.confidence = Grid<double>(orig.height(), orig.width(), 1.0);
  const Mat3 rot = tgt.rotation();
  const Vec3 tr = tgt.translation();

  std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                    static_cast<std::uint32_t>(src_view), static_cast<std::uint32_t>(tgt_view)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t i = 0; i < orig.points.size(); ++i) {
    const Pointmap& source = involves_ref && regions_[s][i] >= 0.5 ? edited_[s] : orig;
    if (!source.valid[i]) continue;
    Vec3 p = rot * source.points[i] + tr;
    if (noise_sigma_ > 0.0) {
      p += noise_sigma_ * Vec3(noise(rng), noise(rng), noise(rng));
    }
    out.pointmap.points[i] = p;
    out.pointmap.valid[i] = 1;
  }
  return out;
}

}  // namespace dragscene
