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
#include <map>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dragscene/geometry.hpp"

namespace dragscene {

// Points of view `src_view` expressed in the camera frame of `tgt_view`.
struct PairwisePrediction {
  int src_view = 0;
  int tgt_view = 0;
  Pointmap pointmap;
  Grid<double> confidence;

  // Throws InvalidInput on negative or non-finite confidence and
  // ContractError when the pointmap frame is not tgt_view.
  void Validate() const;
};

class PointmapProvider {
 public:
  virtual ~PointmapProvider() = default;
  virtual PairwisePrediction Predict(int src_view, int tgt_view) const = 0;
};

class PredictionSet {
 public:
  void Add(PairwisePrediction prediction);
  bool Contains(int src_view, int tgt_view) const;
  // Throws ContractError when the pair is missing.
  const PairwisePrediction& Get(int src_view, int tgt_view) const;
  std::size_t size() const { return pairs_.size(); }

 private:
  std::map<std::pair<int, int>, PairwisePrediction> pairs_;
};

// Every ordered pair (src, tgt) of `view_ids`, including src == tgt.
PredictionSet CollectPredictions(const PointmapProvider& provider,
                                 std::span<const int> view_ids);

// Optimization variables. Index 0 is the reference view; its pose stays the
// identity and its scale stays 1. Fused pointmaps live in the reference
// camera frame. `normalizer` divides every residual and is fixed at the mean
// norm of the reference self-prediction.
struct AlignmentState {
  std::vector<CameraView> poses;
  std::vector<Pointmap> fused;
  std::vector<double> scales;
  double normalizer = 1.0;

  int size() const { return static_cast<int>(poses.size()); }
  int reference_view() const { return poses.front().view_id; }
  int IndexOf(int view_id) const;
};

// (omega, delta_t, log scale) increment of one view.
using PoseDelta = Eigen::Matrix<double, 7, 1>;

// Applies an increment to view `index`: R' = Exp(w) R, t' = Exp(w) t + dt,
// z' = z exp(zeta).
AlignmentState ApplyPoseDelta(const AlignmentState& state, int index,
                              const PoseDelta& delta);

inline constexpr double kRegressionEpsilon = 1e-8;

double RegressionLoss(const AlignmentState& state, const PredictionSet& preds,
                      std::span<const MaskGrid> warped_masks,
                      double epsilon = kRegressionEpsilon);

struct RegressionGradient {
  double loss = 0.0;
  std::vector<Grid<Vec3>> fused;  // dL/dX per view
  std::vector<PoseDelta> pose;    // dL/d(omega, dt, zeta) at zero increment
};

RegressionGradient RegressionLossGradient(const AlignmentState& state,
                                          const PredictionSet& preds,
                                          std::span<const MaskGrid> warped_masks,
                                          double epsilon = kRegressionEpsilon);

enum class AlignMethod {
  kIrls,      // joint reweighted Gauss-Newton with the fused points eliminated
  kGradient,  // constant-step gradient descent
};

struct AlignConfig {
  int iters = 500;
  double lr = 0.01;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  int aux_views = 4;
  AlignMethod method = AlignMethod::kIrls;
  bool freeze_poses = false;
};

struct AlignResult {
  AlignmentState state;
  double initial_loss = 0.0;
  double final_loss = 0.0;
  int iterations = 0;
  std::vector<double> loss_trace;
};

// Poses re-expressed relative to views[0], self predictions lifted through
// them as the initial fused pointmaps, unit scales.
AlignmentState InitialState(std::span<const CameraView> views,
                            const PredictionSet& preds);

// Edit mask carried from the reference into every view of `state` through
// the reference self-prediction.
std::vector<MaskGrid> WarpEditMask(const AlignmentState& state,
                                   const PredictionSet& preds,
                                   const MaskGrid& edit_mask);

AlignResult Optimize(AlignmentState state, const PredictionSet& preds,
                     std::span<const MaskGrid> warped_masks, const AlignConfig& config);

// Full stage: views[0] is the (edited) reference, the rest are auxiliary
// views with initial pose guesses.
AlignResult GlobalAlign(std::span<const CameraView> views,
                        const PointmapProvider& provider, const MaskGrid& edit_mask,
                        const AlignConfig& config);

// `count` views spread evenly over `all_ids` excluding the reference.
std::vector<int> SelectAuxViews(std::span<const int> all_ids, int reference_view,
                                int count);

}  // namespace dragscene
