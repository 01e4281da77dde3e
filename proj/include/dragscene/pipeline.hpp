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

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dragscene/alignment.hpp"
#include "dragscene/diffusion.hpp"
#include "dragscene/drag_edit.hpp"
#include "dragscene/latent_field.hpp"
#include "dragscene/metrics.hpp"
#include "dragscene/mv_optimizer.hpp"
#include "dragscene/scene.hpp"

namespace dragscene {

// Last stage RunPipeline executes. kAll adds reconstruction, metrics and
// the optional baseline.
enum class PipelineStage { kDrag, kAlign, kPropagate, kAll };

struct PipelineConfig {
  Schedule schedule = MakeSchedule(kDefaultTotalSteps, 1e-4, 0.02);
  DragConfig drag;
  AlignConfig align;
  MVOptConfig mvopt;
  bool baseline = false;
  PipelineStage last_stage = PipelineStage::kAll;
};

// Drag derived from the scene's ground-truth edit: the mask covers the edited
// primitive before and after the move (dilated by one pixel), the handle is
// the primitive center and the target its displaced center, both projected
// into the reference view.
EditSpec AutoEditSpec(const Scene& scene, int ref_view);

// Fused colored cloud. `points[k]` are world points of view k; a point takes
// the mean color of every view that sees it (within 1% of that view's
// nearest depth) and the per-channel population variance averaged over
// channels.
struct ColoredCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<double> variance;
  std::vector<int> observations;
};

ColoredCloud ReconstructScene(std::span<const Image> images,
                              std::span<const CameraView> cameras,
                              std::span<const Pointmap> points);
ColoredCloud ReconstructScene(std::span<const Image> edited_views,
                              const AlignmentState& aligned);

struct BaselineResult {
  std::vector<DragResult> drags;  // per scene view
  std::vector<Field> clean_latents;
  std::vector<Image> edited_images;
};

struct EditedScene {
  PipelineStage last_stage = PipelineStage::kAll;
  int reference_view = 0;
  int reference_index = 0;
  Schedule schedule;
  DragResult drag;
  AlignResult align;
  std::vector<int> aligned_views;
  AttributedPointCloud cloud;
  bool edit_support_empty = false;
  std::vector<CameraView> cameras;      // every scene view, reference frame
  std::vector<ViewEditResult> views;    // every scene view but the reference
  std::vector<Field> clean_latents;     // per scene view
  std::vector<Image> edited_images;     // per scene view
  std::vector<Image> round_trip_images; // per scene view
  std::vector<MaskGrid> view_masks;     // per scene view, image resolution
  ColoredCloud reconstruction;
  ConsistencyReport report;
  std::optional<BaselineResult> baseline;
  std::optional<ConsistencyReport> baseline_report;
};

// Drag the reference, align, build the cloud, propagate to every other view,
// reconstruct and measure. Stage failures are rethrown as StageError.
EditedScene RunPipeline(const Scene& scene, const EditSpec& spec, const Denoiser& den,
                        const Decoder& decoder, const PipelineConfig& cfg);

// Scene cameras re-expressed in the reference camera frame.
std::vector<CameraView> ReferenceFrameCameras(const Scene& scene, int ref_view);

// Independent drag of every view with handles and targets carried over by
// the ground-truth geometry.
BaselineResult RunBaseline(const Scene& scene, const EditSpec& spec, const Denoiser& den,
                           const Decoder& decoder, const PipelineConfig& cfg);

struct SweepRow {
  double eta = 0.0;
  int t_r = 0;
  ConsistencyReport report;
  double runtime_seconds = 0.0;
  std::string error;
};

// Propagation at t_r = round(eta * t_total) for every eta, reusing one drag
// and one alignment. Errors are recorded per row.
std::vector<SweepRow> EtaSweep(const Scene& scene, const EditSpec& spec,
                               std::span<const double> etas, const Denoiser& den,
                               const Decoder& decoder, const PipelineConfig& cfg);

}  // namespace dragscene
