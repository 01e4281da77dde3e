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

#include <filesystem>
#include <optional>
#include <span>
#include <string>

#include "json.hpp"

#include "dragscene/config.hpp"
#include "dragscene/metrics.hpp"
#include "dragscene/pipeline.hpp"

namespace dragscene {

// Writes every artifact the run produced, up to `es.last_stage`:
//   config.json, scene.json, images/, edit.json, edit_mask.png
//   reference/   drag outputs
//   aligned/     poses.json, cameras.json, loss.csv, fused_view_<id>.dstn
//   cloud/       positions, latents, mask_weights, source_pixel, cloud.json
//   views/<id>/  latents, images, mask, loss.csv
//   baseline/views/<id>/
// Tensors are float32, so anything read back is rounded to float.
void WriteRunArtifacts(const std::filesystem::path& dir, const RunConfig& cfg,
                       const Scene& scene, const EditSpec& spec, const EditedScene& es);

struct TreeMetrics {
  ConsistencyReport pipeline;
  std::optional<ConsistencyReport> baseline;
};

// Recomputes the metrics from a run directory. `run` and `metrics` both go
// through here so they report the same numbers.
TreeMetrics MetricsFromTree(const std::filesystem::path& dir);

nlohmann::json ReportToJson(const ConsistencyReport& report);
nlohmann::json TreeMetricsToJson(const TreeMetrics& metrics);
void WriteReport(const std::filesystem::path& dir, const TreeMetrics& metrics);

void WriteSweepCsv(const std::filesystem::path& path, std::span<const SweepRow> rows);

// %.17g
std::string FormatDouble(double v);

}  // namespace dragscene
