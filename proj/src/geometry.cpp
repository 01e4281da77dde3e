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

#include "dragscene/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Geometry>

#include "dragscene/kernels.hpp"

namespace dragscene {

void CameraView::Validate() const {
  if (!pose.allFinite()) throw InvalidInput("pose has non-finite entries");
  if (!IsRigid(pose)) {
    throw InvalidInput("pose of view " + std::to_string(view_id) +
                       " is not a rigid transform");
  }
  if (!(intrinsics.fx > 0.0) || !(intrinsics.fy > 0.0)) {
    throw InvalidInput("focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) throw InvalidInput("empty image resolution");
  if (!(intrinsics.cx >= 0.0 && intrinsics.cx < width &&
        intrinsics.cy >= 0.0 && intrinsics.cy < height)) {
    throw InvalidInput("principal point outside the image");
  }
}

std::size_t Pointmap::CountValid() const {
  return static_cast<std::size_t>(
      std::count_if(valid.data().begin(), valid.data().end(),
                    [](std::uint8_t v) { return v != 0; }));
}

double Pointmap::MeanNorm() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!valid[i]) continue;
    sum += points[i].norm();
    ++n;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

Vec4 Homogenize(const Vec3& p) {
  if (!p.allFinite()) throw InvalidInput("cannot homogenize a non-finite point");
  return {p.x(), p.y(), p.z(), 1.0};
}

Mat4 MakePose(const Mat3& rotation, const Vec3& translation) {
  Mat4 pose = Mat4::Identity();
  pose.topLeftCorner<3, 3>() = rotation;
  pose.topRightCorner<3, 1>() = translation;
  return pose;
}

Mat4 RigidInverse(const Mat4& pose) {
  const Mat3 rt = pose.topLeftCorner<3, 3>().transpose();
  return MakePose(rt, -rt * pose.topRightCorner<3, 1>());
}

bool IsRigid(const Mat4& pose, double tol) {
  const Mat3 r = pose.topLeftCorner<3, 3>();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > tol) {
    return false;
  }
  if (std::abs(r.determinant() - 1.0) > tol) return false;
  return pose(3, 0) == 0.0 && pose(3, 1) == 0.0 && pose(3, 2) == 0.0 &&
         pose(3, 3) == 1.0;
}

Mat3 AxisAngleToMatrix(const Vec3& omega) {
  const double angle = omega.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

Mat4 ComposeIncrement(const Mat4& pose, const Vec3& omega, const Vec3& delta_t) {
  const Mat3 e = AxisAngleToMatrix(omega);
  const Mat3 r = e * pose.topLeftCorner<3, 3>();
  const Vec3 t = e * Vec3(pose.topRightCorner<3, 1>()) + delta_t;
  // Re-orthonormalize so repeated increments keep the rotation rigid.
  const Eigen::Quaterniond q(r);
  return MakePose(q.normalized().toRotationMatrix(), t);
}

double RotationAngleBetween(const Mat3& a, const Mat3& b) {
  const Eigen::AngleAxisd aa(Mat3(a * b.transpose()));
  return std::abs(aa.angle());
}

Mat3 Skew(const Vec3& v) {
  Mat3 s;
  s << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return s;
}

Pointmap TransformPointmap(const Pointmap& pointmap, const CameraView& src,
                           const CameraView& dst) {
  if (pointmap.frame != src.view_id) {
    throw ContractError("pointmap frame " + std::to_string(pointmap.frame) +
                        " does not match source view " +
                        std::to_string(src.view_id));
  }
  if (!IsRigid(src.pose) || !IsRigid(dst.pose)) {
    throw InvalidInput("transform_pointmap needs rigid poses");
  }
  Pointmap out = pointmap;
  out.frame = dst.view_id;
  if (src.pose == dst.pose) return out;

  const Mat4 relative = dst.pose * RigidInverse(src.pose);
  const Mat3 r = relative.topLeftCorner<3, 3>();
  const Vec3 t = relative.topRightCorner<3, 1>();
  for (std::size_t i = 0; i < out.points.size(); ++i) {
    if (!out.valid[i]) continue;
    out.points[i] = r * pointmap.points[i] + t;
  }
  return out;
}

Vec2 ProjectPoint(const Vec3& p_cam, const Intrinsics& k) {
  return {k.fx * p_cam.x() / p_cam.z() + k.cx, k.fy * p_cam.y() / p_cam.z() + k.cy};
}

Vec3 LiftPixel(double u, double v, double depth, const Intrinsics& k) {
  return {(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth};
}

bool NearestPixel(const Vec3& p_cam, const Intrinsics& k, int width, int height,
                  int* col, int* row) {
  if (!(p_cam.z() > kZNear)) return false;
  const Vec2 uv = ProjectPoint(p_cam, k);
  const double cu = std::round(uv.x());
  const double rv = std::round(uv.y());
  if (!(cu >= 0.0 && cu < width && rv >= 0.0 && rv < height)) return false;
  *col = static_cast<int>(cu);
  *row = static_cast<int>(rv);
  return true;
}

Projection Project(const Pointmap& pointmap, const CameraView& cam) {
  if (pointmap.frame != cam.view_id) {
    throw ContractError("project: pointmap not in camera frame");
  }
  const int h = pointmap.height();
  const int w = pointmap.width();
  Projection out{Grid<Vec2>(h, w, Vec2::Zero()), Grid<double>(h, w, 0.0),
                 MaskGrid(h, w, 0.0)};
  for (std::size_t i = 0; i < pointmap.points.size(); ++i) {
    const Vec3& p = pointmap.points[i];
    out.depth[i] = p.z();
    if (!pointmap.valid[i]) continue;
    if (p.z() > kZNear) out.pixels[i] = ProjectPoint(p, cam.intrinsics);
    int col = 0;
    int row = 0;
    if (NearestPixel(p, cam.intrinsics, cam.width, cam.height, &col, &row)) {
      out.visible[i] = 1.0;
    }
  }
  return out;
}

MaskGrid WarpMask(const MaskGrid& mask, const Pointmap& ref_points,
                  const CameraView& ref, const CameraView& dst,
                  int closing_radius) {
  if (mask.height() != ref_points.height() || mask.width() != ref_points.width()) {
    throw ContractError("warp_mask: mask and reference pointmap differ in size");
  }
  MaskGrid out(dst.height, dst.width, 0.0);
  const bool any = std::any_of(mask.data().begin(), mask.data().end(),
                               [](double v) { return v >= 0.5; });
  if (!any) return out;

  const Pointmap in_dst = TransformPointmap(ref_points, ref, dst);
  std::vector<kernels::SplatSample> samples;
  std::vector<std::uint8_t> masked;
  samples.reserve(in_dst.points.size());
  for (std::size_t i = 0; i < in_dst.points.size(); ++i) {
    if (!in_dst.valid[i]) continue;
    const Vec3& p = in_dst.points[i];
    int col = 0;
    int row = 0;
    if (!NearestPixel(p, dst.intrinsics, dst.width, dst.height, &col, &row)) {
      continue;
    }
    const Vec2 uv = ProjectPoint(p, dst.intrinsics);
    samples.push_back({static_cast<std::int32_t>(out.Index(row, col)), p.z(),
                       (uv - Vec2(col, row)).squaredNorm(),
                       static_cast<std::int64_t>(i)});
    masked.push_back(mask[i] >= 0.5 ? 1 : 0);
  }
  const std::vector<int> winner =
      kernels::parallel::ZBufferSplat(samples, out.size(), kDepthEpsilon);
  for (std::size_t p = 0; p < out.size(); ++p) {
    if (winner[p] >= 0 && masked[static_cast<std::size_t>(winner[p])]) out[p] = 1.0;
  }
  return closing_radius > 0 ? CloseMask(out, closing_radius) : out;
}

namespace {

MaskGrid Morph(const MaskGrid& mask, int radius, bool dilate) {
  MaskGrid out(mask.height(), mask.width(), 0.0);
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      bool hit = !dilate;
      for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
          if (!mask.Contains(r + dr, c + dc)) continue;
          const bool on = mask(r + dr, c + dc) >= 0.5;
          if (dilate && on) hit = true;
          if (!dilate && !on) hit = false;
        }
      }
      out(r, c) = hit ? 1.0 : 0.0;
    }
  }
  return out;
}

}  // namespace

MaskGrid DilateMask(const MaskGrid& mask, int radius) { return Morph(mask, radius, true); }
MaskGrid ErodeMask(const MaskGrid& mask, int radius) { return Morph(mask, radius, false); }
MaskGrid CloseMask(const MaskGrid& mask, int radius) {
  return ErodeMask(DilateMask(mask, radius), radius);
}

double MaskIoU(const MaskGrid& a, const MaskGrid& b, double threshold) {
  if (!a.SameShape(b)) throw ContractError("mask_iou: shape mismatch");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] >= threshold;
    const bool y = b[i] >= threshold;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool MaskInRange(const MaskGrid& mask) {
  return std::all_of(mask.data().begin(), mask.data().end(),
                     [](double v) { return v >= 0.0 && v <= 1.0; });
}

}  // namespace dragscene
