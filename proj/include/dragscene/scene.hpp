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

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dragscene/alignment.hpp"
#include "dragscene/geometry.hpp"

namespace dragscene {

// Frame tag of pointmaps expressed in scene world coordinates.
inline constexpr int kWorldFrame = -1;

enum class SceneKind { kTwoBox, kPlaneBillboards, kTexturedBlobs };

std::string SceneKindName(SceneKind kind);
SceneKind ParseSceneKind(const std::string& name);

// Axis-aligned box, sphere or parallelogram. Textures are functions of the
// point relative to `center`, so they travel with the primitive.
struct Primitive {
  enum class Type { kBox, kSphere, kQuad };
  Type type = Type::kBox;
  Vec3 center = Vec3::Zero();
  Vec3 half_extent = Vec3::Zero();  // box half sizes; x is the sphere radius
  Vec3 axis_u = Vec3::Zero();       // quad half-edge vectors
  Vec3 axis_v = Vec3::Zero();
  Vec3 color = Vec3::Ones();
  Vec3 phase = Vec3::Zero();
  double frequency = 6.0;
};

struct SceneGeometry {
  std::vector<Primitive> primitives;
  Vec3 background = Vec3(0.1, 0.1, 0.15);
};

struct RayHit {
  double t = 0.0;
  int primitive = -1;
  Vec3 normal = Vec3::Zero();
};

// Nearest intersection with t > kZNear along origin + t * dir.
bool CastRay(const SceneGeometry& geometry, const Vec3& origin, const Vec3& dir,
             RayHit* hit);
Vec3 ShadePoint(const Primitive& primitive, const Vec3& point, const Vec3& normal);

struct RenderedView {
  Image image;
  Pointmap points;          // world frame
  Grid<int> primitive_id;   // -1 for background
};

RenderedView RenderView(const SceneGeometry& geometry, const CameraView& cam);

struct GroundTruthEdit {
  int primitive = 0;
  Vec3 displacement = Vec3::Zero();
};

struct Trajectory {
  double arc_degrees = 30.0;
  double radius = 4.0;
  double height = -0.5;
};

struct Scene {
  std::string scene_id;
  SceneKind kind = SceneKind::kTwoBox;
  std::uint64_t seed = 0;
  Trajectory trajectory;
  std::vector<CameraView> cameras;  // world-to-camera
  std::vector<Image> images;
  SceneGeometry geometry;
  GroundTruthEdit edit;

  int size() const { return static_cast<int>(cameras.size()); }
  int IndexOf(int view_id) const;
};

inline constexpr int kDefaultViewCount = 20;

Scene GenerateSyntheticScene(SceneKind kind, int n_views, std::uint64_t seed,
                             int width = 64, int height = 64,
                             const Trajectory& trajectory = {});

// Camera on the arc at `angle_deg`, looking at the origin.
CameraView ArcCamera(int view_id, double angle_deg, const Trajectory& trajectory, int width,
                     int height);

SceneGeometry EditedGeometry(const Scene& scene);

// Pixels of `cam` where the edited primitive shows up before or after the
// ground-truth edit.
MaskGrid EditRegion(const Scene& scene, const CameraView& cam);

// Ground-truth pointmaps in the target camera frame. Pairs that involve the
// reference view use the edited geometry inside the source view's edit
// region. Gaussian noise is seeded per ordered pair.
class SyntheticProvider final : public PointmapProvider {
 public:
  SyntheticProvider(const Scene& scene, int reference_view, double noise_sigma,
                    std::uint64_t seed);
  PairwisePrediction Predict(int src_view, int tgt_view) const override;

 private:
  std::vector<CameraView> cameras_;
  std::vector<Pointmap> original_;
  std::vector<Pointmap> edited_;
  std::vector<MaskGrid> regions_;
  int reference_view_;
  double noise_sigma_;
  std::uint64_t seed_;

  int IndexOf(int view_id) const;
};

}  // namespace dragscene
