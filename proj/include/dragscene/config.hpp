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
#include <filesystem>
#include <memory>
#include <string>

#include "json.hpp"

#include "dragscene/alignment.hpp"
#include "dragscene/diffusion.hpp"
#include "dragscene/drag_edit.hpp"
#include "dragscene/mv_optimizer.hpp"
#include "dragscene/pipeline.hpp"

namespace dragscene {

struct ScheduleConfig {
  int t_total = kDefaultTotalSteps;
  double beta_min = 1e-4;
  double beta_max = 0.02;
  double eta_e = kDefaultEditStrength;
  double eta_r = kDefaultInversionStrength;
};

struct DenoiserConfig {
  std::string kind = "linear";  // zero | linear | smoothing
  double a = 0.1;
};

struct DecoderConfig {
  std::string kind = "linear";  // identity | linear
  int latent_channels = 3;
  int latent_stride = 2;
  std::uint64_t seed = 0;
};

struct SceneConfig {
  std::string kind = "two-box";
  int views = kDefaultViewCount;
  std::uint64_t seed = 0;
  int width = 64;
  int height = 64;
  double arc_degrees = 30.0;
  std::string path;  // scene.json to load instead of generating
};

struct EditConfig {
  std::string path;   // edit.json; empty derives the edit from the scene
  int ref_view = -1;  // -1 picks the middle view
};

struct RunConfig {
  std::uint64_t seed = 0;
  ScheduleConfig schedule;
  DenoiserConfig denoiser;
  DecoderConfig decoder;
  AlignConfig align;
  DragConfig drag;
  MVOptConfig mvopt;
  SceneConfig scene;
  EditConfig edit;
  bool baseline = true;

  // Throws ConfigError on out-of-range values or missing paths.
  void Validate() const;
};

// Missing keys keep their defaults; unknown keys and wrong types throw
// ConfigError. `seed` seeds scene, alignment noise and decoder unless their
// sections set their own.
RunConfig ParseRunConfig(const nlohmann::json& j);
nlohmann::json ToJson(const RunConfig& cfg);
RunConfig LoadRunConfig(const std::filesystem::path& path);

Schedule BuildSchedule(const ScheduleConfig& cfg);
std::unique_ptr<Denoiser> MakeDenoiser(const DenoiserConfig& cfg);
std::unique_ptr<Decoder> MakeDecoder(const DecoderConfig& cfg);
PipelineConfig MakePipelineConfig(const RunConfig& cfg);

// Deterministic JSON text: two-space indent and a trailing newline.
std::string DumpJson(const nlohmann::json& j);

}  // namespace dragscene
