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

#include "dragscene/grid.hpp"

namespace dragscene {

inline constexpr double kZNear = 1e-3;
inline constexpr double kDepthEpsilon = 1e-4;

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;

  // Intrinsics of the same camera sampled on a grid `stride` times coarser.
  // Pixel u maps to u / stride.
  Intrinsics Downsampled(int stride) const {
    return {fx / stride, fy / stride, cx / stride, cy / stride};
  }
  bool operator==(const Intrinsics&) const = default;
};

// World-to-camera rigid pose plus pinhole intrinsics for one view.
struct CameraView {
  int view_id = 0;
  Mat4 pose = Mat4::Identity();
  Intrinsics intrinsics;
  int width = 0;
  int height = 0;

  Mat3 rotation() const { return pose.topLeftCorner<3, 3>(); }
  Vec3 translation() const { return pose.topRightCorner<3, 1>(); }

  // Throws InvalidInput if the pose is not rigid or intrinsics are out of range.
  void Validate() const;
};

// Points of one view's pixels expressed in the frame of view `frame`.
struct Pointmap {
  int frame = 0;
  Grid<Vec3> points;
  Grid<std::uint8_t> valid;

  Pointmap() = default;
  Pointmap(int frame_id, int height, int width)
      : frame(frame_id), points(height, width, Vec3::Zero()),
        valid(height, width, 0) {}

  int height() const { return points.height(); }
  int width() const { return points.width(); }
  std::size_t CountValid() const;
  // Mean Euclidean norm over valid points; 0 when nothing is valid.
  double MeanNorm() const;
};

Vec4 Homogenize(const Vec3& p);

Mat4 MakePose(const Mat3& rotation, const Vec3& translation);
Mat4 RigidInverse(const Mat4& pose);
bool IsRigid(const Mat4& pose, double tol = 1e-9);

// Left-multiplies the pose by exp([omega]) and adds `delta_t` to its
// translation: R' = Exp(w) R, t' = Exp(w) t + dt.
Mat4 ComposeIncrement(const Mat4& pose, const Vec3& omega, const Vec3& delta_t);
Mat3 AxisAngleToMatrix(const Vec3& omega);
// Angle of R_a R_b^T in radians.
double RotationAngleBetween(const Mat3& a, const Mat3& b);
Mat3 Skew(const Vec3& v);

// X' = P_dst P_src^-1 h(X) on every valid pixel. Exact copy when both poses
// are identical.
Pointmap TransformPointmap(const Pointmap& pointmap, const CameraView& src,
                           const CameraView& dst);

Vec2 ProjectPoint(const Vec3& p_cam, const Intrinsics& k);
Vec3 LiftPixel(double u, double v, double depth, const Intrinsics& k);

// Nearest integer pixel of a projected point, or false when it falls outside
// the image or in front of the near plane.
bool NearestPixel(const Vec3& p_cam, const Intrinsics& k, int width, int height,
                  int* col, int* row);

struct Projection {
  Grid<Vec2> pixels;
  Grid<double> depth;
  MaskGrid visible;
};

Projection Project(const Pointmap& pointmap, const CameraView& cam);

// Carries the reference mask into `dst` by lifting reference pixels through
// `ref_points`, z-buffered nearest-pixel splatting and one closing pass of
// `closing_radius` (0 skips the closing).
MaskGrid WarpMask(const MaskGrid& mask, const Pointmap& ref_points,
                  const CameraView& ref, const CameraView& dst,
                  int closing_radius = 1);

// Binary dilation and erosion with a (2r+1)^2 square; pixels outside the
// image never take part.
MaskGrid DilateMask(const MaskGrid& mask, int radius);
MaskGrid ErodeMask(const MaskGrid& mask, int radius);
MaskGrid CloseMask(const MaskGrid& mask, int radius);

double MaskIoU(const MaskGrid& a, const MaskGrid& b, double threshold = 0.5);
bool MaskInRange(const MaskGrid& mask);

}  // namespace dragscene
