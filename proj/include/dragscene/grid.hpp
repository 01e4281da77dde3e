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

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "dragscene/errors.hpp"

namespace dragscene {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Row-major H x W grid of T.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, const T& fill = T())
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width, fill) {
    if (height < 0 || width < 0) throw ContractError("negative grid size");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int row, int col) { return data_[Index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[Index(row, col)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::size_t Index(int row, int col) const {
    return static_cast<std::size_t>(row) * width_ + col;
  }
  bool Contains(int row, int col) const {
    return row >= 0 && row < height_ && col >= 0 && col < width_;
  }
  bool SameShape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

// Soft mask, values in [0,1].
using MaskGrid = Grid<double>;

// H x W x C channels-last real field (images, latents, feature maps).
class Field {
 public:
  Field() = default;
  Field(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<std::size_t>(height) * width * channels, fill) {
    if (height < 0 || width < 0 || channels < 0) {
      throw ContractError("negative field size");
    }
  }

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  std::size_t pixels() const { return static_cast<std::size_t>(height_) * width_; }

  double& operator()(int row, int col, int ch) { return data_[Index(row, col, ch)]; }
  double operator()(int row, int col, int ch) const { return data_[Index(row, col, ch)]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::size_t Index(int row, int col, int ch) const {
    return (static_cast<std::size_t>(row) * width_ + col) * channels_ + ch;
  }
  bool SameShape(const Field& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }

  std::span<double> pixel(int row, int col) {
    return {data_.data() + Index(row, col, 0), static_cast<std::size_t>(channels_)};
  }
  std::span<const double> pixel(int row, int col) const {
    return {data_.data() + Index(row, col, 0), static_cast<std::size_t>(channels_)};
  }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool AllFinite() const;
  double MaxAbsDiff(const Field& other) const;

  bool operator==(const Field& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

// Three-channel image with values nominally in [0,1].
using Image = Field;

inline bool Field::AllFinite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

inline double Field::MaxAbsDiff(const Field& other) const {
  if (!SameShape(other)) throw ContractError("field shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) {
    m = std::max(m, std::abs(data_[i] - other.data_[i]));
  }
  return m;
}

}  // namespace dragscene
