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

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dragscene/artifacts.hpp"
#include "dragscene/config.hpp"
#include "dragscene/errors.hpp"
#include "dragscene/kernels.hpp"
#include "dragscene/manifest.hpp"
#include "dragscene/pipeline.hpp"
#include "dragscene/tensor_io.hpp"

namespace fs = std::filesystem;
using namespace dragscene;

namespace {

struct StageOptions {
  std::string config;
  std::string scene;
  std::string edit;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void AddStageOptions(CLI::App* cmd, StageOptions* o, bool needs_out = true) {
  cmd->add_option("--config", o->config, "run configuration (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--scene", o->scene, "scene.json to load instead of generating one")
      ->check(CLI::ExistingFile);
  cmd->add_option("--edit", o->edit, "edit.json; defaults to the scene's ground-truth drag")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o->seed, "overrides the config seed");
  auto* out = cmd->add_option("--out", o->out, "output directory");
  if (needs_out) out->required();
}

RunConfig ResolveConfig(const StageOptions& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.config.empty()) j = ToJson(LoadRunConfig(o.config));
  if (o.seed) {
    j["seed"] = *o.seed;
    for (const char* section : {"scene", "align", "decoder"}) {
      if (j.contains(section)) j[section]["seed"] = *o.seed;
    }
  }
  if (!o.scene.empty()) j["scene"]["path"] = o.scene;
  if (!o.edit.empty()) j["edit"]["path"] = o.edit;
  return ParseRunConfig(j);
}

Scene LoadScene(const RunConfig& cfg) {
  if (!cfg.scene.path.empty()) return ReadScene(cfg.scene.path);
  Trajectory traj;
  traj.arc_degrees = cfg.scene.arc_degrees;
  return GenerateSyntheticScene(ParseSceneKind(cfg.scene.kind), cfg.scene.views, cfg.scene.seed,
                                cfg.scene.width, cfg.scene.height, traj);
}

int DefaultReference(const Scene& scene) { return scene.cameras[scene.size() / 2].view_id; }

EditSpec LoadEdit(const RunConfig& cfg, const Scene& scene) {
  if (!cfg.edit.path.empty()) return ReadEditSpec(cfg.edit.path);
  const int ref = cfg.edit.ref_view >= 0 ? cfg.edit.ref_view : DefaultReference(scene);
  return AutoEditSpec(scene, ref);
}

void PrintReport(const TreeMetrics& m) {
  auto line = [](const char* name, const ConsistencyReport& r) {
    std::printf("%-9s latent_variance=%.6g image_agreement=%.6g preservation_psnr=%.4g points=%d\n",
                name, r.latent_variance, r.image_agreement, r.preservation_psnr,
                r.measured_points);
  };
  line("pipeline", m.pipeline);
  if (m.baseline) line("baseline", *m.baseline);
}

int RunStageCommand(const StageOptions& o, PipelineStage last, bool report) {
  const RunConfig cfg = ResolveConfig(o);
  const Scene scene = LoadScene(cfg);
  const EditSpec spec = LoadEdit(cfg, scene);
  const auto den = MakeDenoiser(cfg.denoiser);
  const auto dec = MakeDecoder(cfg.decoder);
  PipelineConfig pc = MakePipelineConfig(cfg);
  pc.last_stage = last;
  if (last != PipelineStage::kAll) pc.baseline = false;
  const auto start = std::chrono::steady_clock::now();
  const EditedScene es = RunPipeline(scene, spec, *den, *dec, pc);
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  WriteRunArtifacts(o.out, cfg, scene, spec, es);
  std::fprintf(stderr, "pipeline finished in %.2f s\n", secs);
  if (last == PipelineStage::kDrag) {
    std::printf("drag: %d steps, clamped=%s\n", es.drag.steps, es.drag.clamped ? "yes" : "no");
  }
  if (last == PipelineStage::kAlign) {
    std::printf("align: loss %.6g -> %.6g in %d iterations\n", es.align.initial_loss,
                es.align.final_loss, es.align.iterations);
  }
  if (report) {
    const TreeMetrics m = MetricsFromTree(o.out);
    WriteReport(o.out, m);
    PrintReport(m);
  }
  return 0;
}

std::vector<double> ParseEtas(const std::string& text) {
  std::vector<double> etas;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--etas", "not a number: '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) {
      throw CLI::ValidationError("--etas", "not a number: '" + item + "'");
    }
    etas.push_back(v);
  }
  return etas;
}

void InspectPath(const fs::path& path) {
  if (fs::is_directory(path)) {
    std::vector<fs::path> entries;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file() &&
          (e.path().extension() == ".dstn" || e.path().extension() == ".json")) {
        entries.push_back(e.path());
      }
    }
    std::sort(entries.begin(), entries.end());
    for (const fs::path& p : entries) InspectPath(p);
    return;
  }
  if (path.extension() == ".dstn") {
    const TensorHeader h = ReadTensorHeader(path);
    std::string dims;
    for (std::size_t k = 0; k < h.dims.size(); ++k) {
      dims += (k ? " x " : "") + std::to_string(h.dims[k]);
    }
    std::printf("%s: float32 [%s]\n", path.string().c_str(), dims.empty() ? "scalar" : dims.c_str());
    return;
  }
  if (path.filename() == "scene.json") {
    const Scene s = ReadScene(path);
    std::printf("%s: scene '%s' kind=%s views=%d size=%dx%d primitives=%zu\n",
                path.string().c_str(), s.scene_id.c_str(), SceneKindName(s.kind).c_str(),
                s.size(), s.cameras.front().width, s.cameras.front().height,
                s.geometry.primitives.size());
    return;
  }
  if (path.filename() == "edit.json") {
    const EditSpec e = ReadEditSpec(path);
    std::printf("%s: edit ref_view=%d handles=%zu\n", path.string().c_str(), e.ref_view,
                e.handles.size());
    return;
  }
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  const nlohmann::json j = nlohmann::json::parse(in);
  std::string keys;
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) keys += (keys.empty() ? "" : ", ") + k;
    std::printf("%s: object {%s}\n", path.string().c_str(), keys.c_str());
  } else {
    std::printf("%s: %s with %zu entries\n", path.string().c_str(), j.type_name(), j.size());
  }
}

}  // namespace

int main(int argc, char** argv) {
  kernels::ConfigureThreadsFromEnv();
  CLI::App app{"Multi-view drag editing on synthetic scenes"};
  app.require_subcommand(1);

  std::string synth_kind = "two-box";
  int synth_views = kDefaultViewCount;
  std::uint64_t synth_seed = 0;
  int synth_width = 64;
  int synth_height = 64;
  double synth_arc = 30.0;
  int synth_ref = -1;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "generate a synthetic scene and its ground-truth drag");
  synth->add_option("--kind", synth_kind, "two-box | plane-billboards | textured-blobs");
  synth->add_option("--views", synth_views, "number of views");
  synth->add_option("--seed", synth_seed, "scene seed");
  synth->add_option("--width", synth_width, "image width");
  synth->add_option("--height", synth_height, "image height");
  synth->add_option("--arc", synth_arc, "half-angle of the camera arc in degrees");
  synth->add_option("--ref", synth_ref, "reference view of the written edit (default: middle)");
  synth->add_option("--out", synth_out, "output directory")->required();

  StageOptions edit_o, align_o, prop_o, run_o, sweep_o;
  auto* edit_ref = app.add_subcommand("edit-ref", "drag-edit the reference view");
  AddStageOptions(edit_ref, &edit_o);
  auto* align = app.add_subcommand("align", "drag the reference and align the auxiliary views");
  AddStageOptions(align, &align_o);
  auto* propagate = app.add_subcommand("propagate", "carry the edit into every view");
  AddStageOptions(propagate, &prop_o);
  auto* run = app.add_subcommand("run", "full pipeline with metrics and baseline");
  AddStageOptions(run, &run_o);

  std::string metrics_in;
  auto* metrics = app.add_subcommand("metrics", "recompute report.json from a run directory");
  metrics->add_option("--in", metrics_in, "run directory")->required()->check(CLI::ExistingDirectory);

  std::string etas_text;
  auto* sweep = app.add_subcommand("sweep", "propagation quality across inversion strengths");
  AddStageOptions(sweep, &sweep_o);
  sweep->add_option("--etas", etas_text, "comma-separated strengths in (0, 1)")->required();

  std::vector<std::string> inspect_paths;
  auto* inspect = app.add_subcommand("inspect", "print tensor headers and manifest summaries");
  inspect->add_option("paths", inspect_paths, "files or directories")->required()
      ->check(CLI::ExistingPath);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) {
      const Trajectory traj{synth_arc, Trajectory{}.radius, Trajectory{}.height};
      const Scene scene = GenerateSyntheticScene(ParseSceneKind(synth_kind), synth_views,
                                                 synth_seed, synth_width, synth_height, traj);
      WriteScene(scene, synth_out);
      const int ref = synth_ref >= 0 ? synth_ref : DefaultReference(scene);
      WriteEditSpec(AutoEditSpec(scene, ref), synth_out);
      std::printf("wrote %s (%d views)\n", (fs::path(synth_out) / "scene.json").string().c_str(),
                  scene.size());
    } else if (*edit_ref) {
      return RunStageCommand(edit_o, PipelineStage::kDrag, false);
    } else if (*align) {
      return RunStageCommand(align_o, PipelineStage::kAlign, false);
    } else if (*propagate) {
      return RunStageCommand(prop_o, PipelineStage::kPropagate, false);
    } else if (*run) {
      return RunStageCommand(run_o, PipelineStage::kAll, true);
    } else if (*metrics) {
      const TreeMetrics m = MetricsFromTree(metrics_in);
      WriteReport(metrics_in, m);
      PrintReport(m);
    } else if (*sweep) {
      const std::vector<double> etas = ParseEtas(etas_text);
      const RunConfig cfg = ResolveConfig(sweep_o);
      const Scene scene = LoadScene(cfg);
      const EditSpec spec = LoadEdit(cfg, scene);
      const auto den = MakeDenoiser(cfg.denoiser);
      const auto dec = MakeDecoder(cfg.decoder);
      const std::vector<SweepRow> rows =
          EtaSweep(scene, spec, etas, *den, *dec, MakePipelineConfig(cfg));
      WriteSweepCsv(fs::path(sweep_o.out) / "sweep.csv", rows);
      for (const SweepRow& r : rows) {
        std::printf("eta=%.3g t_r=%d latent_variance=%.6g psnr=%.4g runtime=%.2fs%s%s\n", r.eta,
                    r.t_r, r.report.latent_variance, r.report.preservation_psnr,
                    r.runtime_seconds, r.error.empty() ? "" : " error=", r.error.c_str());
      }
    } else if (*inspect) {
      for (const std::string& p : inspect_paths) InspectPath(p);
    }
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const NumericalFailure& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const StageError& e) {
    std::fprintf(stderr, "stage %s\n", e.what());
    return e.numerical() ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
