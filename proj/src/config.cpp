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

#include "dragscene/config.hpp"

#include <fstream>
#include <set>
#include <type_traits>

#include "dragscene/errors.hpp"
#include "dragscene/scene.hpp"

namespace dragscene {

namespace {

using nlohmann::json;

void CheckKeys(const json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown config key '" + (section.empty() ? key : section + "." + key) + "'");
    }
  }
}

template <typename T>
void Read(const json& j, const std::string& section, const char* key, T* out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  const std::string name = section.empty() ? key : section + "." + key;
  if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) throw ConfigError("config key '" + name + "' must be a boolean");
  } else if constexpr (std::is_integral_v<T>) {
    if (!v.is_number_integer()) throw ConfigError("config key '" + name + "' must be an integer");
    if constexpr (std::is_unsigned_v<T>) {
      if (v.is_number_unsigned() == false && v.get<std::int64_t>() < 0) {
        throw ConfigError("config key '" + name + "' must be non-negative");
      }
    }
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) throw ConfigError("config key '" + name + "' must be a number");
  } else {
    if (!v.is_string()) throw ConfigError("config key '" + name + "' must be a string");
  }
  *out = v.get<T>();
}

std::string MethodName(AlignMethod m) {
  return m == AlignMethod::kGradient ? "gradient" : "irls";
}

}  // namespace

void RunConfig::Validate() const {
  if (schedule.t_total < 1) throw ConfigError("schedule.t_total must be >= 1");
  if (!(schedule.beta_min > 0.0 && schedule.beta_min <= schedule.beta_max &&
        schedule.beta_max < 1.0)) {
    throw ConfigError("schedule beta range must satisfy 0 < beta_min <= beta_max < 1");
  }
  for (double eta : {schedule.eta_e, schedule.eta_r}) {
    if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError("schedule strengths must lie in (0, 1]");
  }
  if (denoiser.kind != "zero" && denoiser.kind != "linear" && denoiser.kind != "smoothing") {
    throw ConfigError("unknown denoiser kind '" + denoiser.kind + "'");
  }
  if (decoder.kind != "identity" && decoder.kind != "linear") {
    throw ConfigError("unknown decoder kind '" + decoder.kind + "'");
  }
  if (decoder.latent_channels < 1 || decoder.latent_stride < 1) {
    throw ConfigError("decoder needs latent_channels >= 1 and latent_stride >= 1");
  }
  if (align.iters < 0 || !(align.lr > 0.0) || !(align.noise_sigma >= 0.0) || align.aux_views < 1) {
    throw ConfigError("invalid align section");
  }
  if (drag.m < 0 || !(drag.lr >= 0.0) || !(drag.beta >= 0.0) || drag.r_track < 0) {
    throw ConfigError("invalid drag section");
  }
  mvopt.Validate();
  ParseSceneKind(scene.kind);
  if (scene.views < 2 || scene.width < 4 || scene.height < 4) {
    throw ConfigError("scene needs >= 2 views of at least 4x4 pixels");
  }
  if (scene.width % decoder.latent_stride != 0 || scene.height % decoder.latent_stride != 0) {
    throw ConfigError("scene size must be divisible by decoder.latent_stride");
  }
  if (!scene.path.empty() && !std::filesystem::exists(scene.path)) {
    throw ConfigError("scene.path does not exist: " + scene.path);
  }
  if (!edit.path.empty() && !std::filesystem::exists(edit.path)) {
    throw ConfigError("edit.path does not exist: " + edit.path);
  }
}

RunConfig ParseRunConfig(const json& j) {
  RunConfig cfg;
  CheckKeys(j, "", {"seed", "schedule", "denoiser", "decoder", "align", "drag", "mvopt", "scene",
                    "edit", "baseline"});
  Read(j, "", "seed", &cfg.seed);
  Read(j, "", "baseline", &cfg.baseline);
  cfg.scene.seed = cfg.seed;
  cfg.align.seed = cfg.seed;
  cfg.decoder.seed = cfg.seed;
  if (j.contains("schedule")) {
    const json& s = j.at("schedule");
    CheckKeys(s, "schedule", {"t_total", "beta_min", "beta_max", "eta_e", "eta_r"});
    Read(s, "schedule", "t_total", &cfg.schedule.t_total);
    Read(s, "schedule", "beta_min", &cfg.schedule.beta_min);
    Read(s, "schedule", "beta_max", &cfg.schedule.beta_max);
    Read(s, "schedule", "eta_e", &cfg.schedule.eta_e);
    Read(s, "schedule", "eta_r", &cfg.schedule.eta_r);
  }
  if (j.contains("denoiser")) {
    const json& s = j.at("denoiser");
    CheckKeys(s, "denoiser", {"kind", "a"});
    Read(s, "denoiser", "kind", &cfg.denoiser.kind);
    Read(s, "denoiser", "a", &cfg.denoiser.a);
  }
  if (j.contains("decoder")) {
    const json& s = j.at("decoder");
    CheckKeys(s, "decoder", {"kind", "latent_channels", "latent_stride", "seed"});
    Read(s, "decoder", "kind", &cfg.decoder.kind);
    Read(s, "decoder", "latent_channels", &cfg.decoder.latent_channels);
    Read(s, "decoder", "latent_stride", &cfg.decoder.latent_stride);
    Read(s, "decoder", "seed", &cfg.decoder.seed);
  }
  if (j.contains("align")) {
    const json& s = j.at("align");
    CheckKeys(s, "align", {"iters", "lr", "noise_sigma", "seed", "aux_views", "method"});
    Read(s, "align", "iters", &cfg.align.iters);
    Read(s, "align", "lr", &cfg.align.lr);
    Read(s, "align", "noise_sigma", &cfg.align.noise_sigma);
    Read(s, "align", "seed", &cfg.align.seed);
    Read(s, "align", "aux_views", &cfg.align.aux_views);
    std::string method = MethodName(cfg.align.method);
    Read(s, "align", "method", &method);
    if (method == "irls") {
      cfg.align.method = AlignMethod::kIrls;
    } else if (method == "gradient") {
      cfg.align.method = AlignMethod::kGradient;
    } else {
      throw ConfigError("align.method must be 'irls' or 'gradient'");
    }
  }
  if (j.contains("drag")) {
    const json& s = j.at("drag");
    CheckKeys(s, "drag", {"m", "lr", "beta", "r_track"});
    Read(s, "drag", "m", &cfg.drag.m);
    Read(s, "drag", "lr", &cfg.drag.lr);
    Read(s, "drag", "beta", &cfg.drag.beta);
    Read(s, "drag", "r_track", &cfg.drag.r_track);
  }
  if (j.contains("mvopt")) {
    const json& s = j.at("mvopt");
    CheckKeys(s, "mvopt", {"lambda", "sigma", "m_iters", "mask_threshold", "literal_rec"});
    Read(s, "mvopt", "lambda", &cfg.mvopt.lambda);
    Read(s, "mvopt", "sigma", &cfg.mvopt.sigma);
    Read(s, "mvopt", "m_iters", &cfg.mvopt.m_iters);
    Read(s, "mvopt", "mask_threshold", &cfg.mvopt.mask_threshold);
    Read(s, "mvopt", "literal_rec", &cfg.mvopt.literal_rec);
  }
  if (j.contains("scene")) {
    const json& s = j.at("scene");
    CheckKeys(s, "scene", {"kind", "views", "seed", "width", "height", "arc_degrees", "path"});
    Read(s, "scene", "kind", &cfg.scene.kind);
    Read(s, "scene", "views", &cfg.scene.views);
    Read(s, "scene", "seed", &cfg.scene.seed);
    Read(s, "scene", "width", &cfg.scene.width);
    Read(s, "scene", "height", &cfg.scene.height);
    Read(s, "scene", "arc_degrees", &cfg.scene.arc_degrees);
    Read(s, "scene", "path", &cfg.scene.path);
  }
  if (j.contains("edit")) {
    const json& s = j.at("edit");
    CheckKeys(s, "edit", {"path", "ref_view"});
    Read(s, "edit", "path", &cfg.edit.path);
    Read(s, "edit", "ref_view", &cfg.edit.ref_view);
  }
  cfg.Validate();
  return cfg;
}

json ToJson(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["baseline"] = cfg.baseline;
  j["schedule"] = {{"t_total", cfg.schedule.t_total},
                   {"beta_min", cfg.schedule.beta_min},
                   {"beta_max", cfg.schedule.beta_max},
                   {"eta_e", cfg.schedule.eta_e},
                   {"eta_r", cfg.schedule.eta_r}};
  j["denoiser"] = {{"kind", cfg.denoiser.kind}, {"a", cfg.denoiser.a}};
  j["decoder"] = {{"kind", cfg.decoder.kind},
                  {"latent_channels", cfg.decoder.latent_channels},
                  {"latent_stride", cfg.decoder.latent_stride},
                  {"seed", cfg.decoder.seed}};
  j["align"] = {{"iters", cfg.align.iters},
                {"lr", cfg.align.lr},
                {"noise_sigma", cfg.align.noise_sigma},
                {"seed", cfg.align.seed},
                {"aux_views", cfg.align.aux_views},
                {"method", MethodName(cfg.align.method)}};
  j["drag"] = {{"m", cfg.drag.m},
               {"lr", cfg.drag.lr},
               {"beta", cfg.drag.beta},
               {"r_track", cfg.drag.r_track}};
  j["mvopt"] = {{"lambda", cfg.mvopt.lambda},
                {"sigma", cfg.mvopt.sigma},
                {"m_iters", cfg.mvopt.m_iters},
                {"mask_threshold", cfg.mvopt.mask_threshold},
                {"literal_rec", cfg.mvopt.literal_rec}};
  j["scene"] = {{"kind", cfg.scene.kind},
                {"views", cfg.scene.views},
                {"seed", cfg.scene.seed},
                {"width", cfg.scene.width},
                {"height", cfg.scene.height},
                {"arc_degrees", cfg.scene.arc_degrees},
                {"path", cfg.scene.path}};
  j["edit"] = {{"path", cfg.edit.path}, {"ref_view", cfg.edit.ref_view}};
  return j;
}

RunConfig LoadRunConfig(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return ParseRunConfig(j);
}

Schedule BuildSchedule(const ScheduleConfig& cfg) {
  return MakeSchedule(cfg.t_total, cfg.beta_min, cfg.beta_max, cfg.eta_e, cfg.eta_r);
}

std::unique_ptr<Denoiser> MakeDenoiser(const DenoiserConfig& cfg) {
  if (cfg.kind == "zero") return std::make_unique<ZeroDenoiser>();
  if (cfg.kind == "linear") return std::make_unique<ScalarLinearDenoiser>(cfg.a);
  if (cfg.kind == "smoothing") return std::make_unique<SmoothingDenoiser>();
  throw ConfigError("unknown denoiser kind '" + cfg.kind + "'");
}

std::unique_ptr<Decoder> MakeDecoder(const DecoderConfig& cfg) {
  if (cfg.kind == "identity") {
    if (cfg.latent_channels != 3 || cfg.latent_stride != 1) {
      throw ConfigError("identity decoder needs latent_channels = 3 and latent_stride = 1");
    }
    return std::make_unique<IdentityDecoder>();
  }
  if (cfg.kind == "linear") {
    return std::make_unique<LinearDecoder>(cfg.latent_channels, cfg.latent_stride, cfg.seed);
  }
  throw ConfigError("unknown decoder kind '" + cfg.kind + "'");
}

PipelineConfig MakePipelineConfig(const RunConfig& cfg) {
  PipelineConfig p;
  p.schedule = BuildSchedule(cfg.schedule);
  p.drag = cfg.drag;
  p.align = cfg.align;
  p.mvopt = cfg.mvopt;
  p.baseline = cfg.baseline;
  return p;
}

std::string DumpJson(const json& j) { return j.dump(2) + "\n"; }

}  // namespace dragscene
