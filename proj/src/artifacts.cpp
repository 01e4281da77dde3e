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

#include "dragscene/artifacts.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dragscene/errors.hpp"
#include "dragscene/manifest.hpp"
#include "dragscene/png_io.hpp"
#include "dragscene/tensor_io.hpp"

namespace dragscene {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string ViewDir(int view_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03d", view_id);
  return buf;
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + " is not valid JSON: " + e.what());
  }
}

Tensor VectorTensor(std::span<const double> v, std::uint32_t cols) {
  Tensor t;
  if (cols == 0) {
    t.dims = {static_cast<std::uint32_t>(v.size())};
  } else {
    t.dims = {static_cast<std::uint32_t>(v.size() / cols), cols};
  }
  t.data.assign(v.begin(), v.end());
  return t;
}

Tensor PointmapTensor(const Pointmap& pm) {
  Tensor t;
  t.dims = {static_cast<std::uint32_t>(pm.height()), static_cast<std::uint32_t>(pm.width()), 4};
  t.data.reserve(pm.points.size() * 4);
  for (std::size_t i = 0; i < pm.points.size(); ++i) {
    for (int k = 0; k < 3; ++k) t.data.push_back(static_cast<float>(pm.points[i][k]));
    t.data.push_back(pm.valid[i] ? 1.0f : 0.0f);
  }
  return t;
}

std::string TraceCsv(std::span<const LossTerms> trace) {
  std::string out = "iter,rec,mask,total\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i) + "," + FormatDouble(trace[i].rec) + "," +
           FormatDouble(trace[i].mask) + "," + FormatDouble(trace[i].total) + "\n";
  }
  return out;
}

std::string ScalarTraceCsv(const std::string& column, std::span<const double> trace) {
  std::string out = "iter," + column + "\n";
  for (std::size_t i = 0; i < trace.size(); ++i) {
    out += std::to_string(i) + "," + FormatDouble(trace[i]) + "\n";
  }
  return out;
}

json PointsJson(std::span<const Vec2> pts) {
  json a = json::array();
  for (const Vec2& p : pts) a.push_back(json::array({p.x(), p.y()}));
  return a;
}

void WriteReference(const fs::path& dir, const DragResult& drag) {
  WriteTensor(dir / "edited_latent_te.dstn", FieldToTensor(drag.edited_latent_te.values));
  WriteTensor(dir / "reference_latent_tr.dstn", FieldToTensor(drag.reference_latent_tr.values));
  WriteTensor(dir / "edited_image.dstn", FieldToTensor(drag.edited_image));
  WriteImagePng(dir / "edited_image.png", drag.edited_image);
  const json j = {{"steps", drag.steps},
                  {"clamped", drag.clamped},
                  {"tracked_handles", PointsJson(drag.tracked_handles)},
                  {"edited_timestep", drag.edited_latent_te.timestep},
                  {"reinverted_timestep", drag.reference_latent_tr.timestep}};
  WriteFileBytes(dir / "drag.json", DumpJson(j));
  WriteFileBytes(dir / "loss.csv", ScalarTraceCsv("motion", drag.loss_trace));
}

void WriteAligned(const fs::path& dir, const EditedScene& es) {
  const AlignmentState& st = es.align.state;
  json views = json::array();
  for (int k = 0; k < st.size(); ++k) {
    json v = CameraToJson(st.poses[k]);
    v["scale"] = st.scales[k];
    views.push_back(v);
    WriteTensor(dir / ("fused_view_" + ViewDir(st.poses[k].view_id) + ".dstn"),
                PointmapTensor(st.fused[k]));
  }
  const json poses = {{"reference_view", es.reference_view},
                      {"normalizer", st.normalizer},
                      {"initial_loss", es.align.initial_loss},
                      {"final_loss", es.align.final_loss},
                      {"iterations", es.align.iterations},
                      {"views", views}};
  WriteFileBytes(dir / "poses.json", DumpJson(poses));
  WriteFileBytes(dir / "cameras.json", DumpJson(CamerasToJson(es.cameras)));
  WriteFileBytes(dir / "loss.csv", ScalarTraceCsv("loss", es.align.loss_trace));
}

void WriteCloud(const fs::path& dir, const EditedScene& es) {
  const AttributedPointCloud& c = es.cloud;
  WriteTensor(dir / "positions.dstn", PointsToTensor(c.positions));
  WriteTensor(dir / "latents.dstn", VectorTensor(c.latents, static_cast<std::uint32_t>(c.channels)));
  WriteTensor(dir / "mask_weights.dstn", VectorTensor(c.mask_weights, 0));
  std::vector<double> pix;
  for (const auto& p : c.source_pixel) {
    pix.push_back(p[0]);
    pix.push_back(p[1]);
  }
  WriteTensor(dir / "source_pixel.dstn", VectorTensor(pix, 2));
  const json j = {{"size", c.size()},
                  {"channels", c.channels},
                  {"timestep", c.timestep},
                  {"frame", c.frame},
                  {"edit_support_empty", es.edit_support_empty}};
  WriteFileBytes(dir / "cloud.json", DumpJson(j));
}

void WriteViews(const fs::path& dir, const Scene& scene, const EditedScene& es) {
  std::size_t next = 0;
  for (int k = 0; k < scene.size(); ++k) {
    const fs::path vd = dir / ViewDir(scene.cameras[k].view_id);
    WriteTensor(vd / "clean_latent.dstn", FieldToTensor(es.clean_latents[k]));
    WriteTensor(vd / "edited_image.dstn", FieldToTensor(es.edited_images[k]));
    WriteImagePng(vd / "edited_image.png", es.edited_images[k]);
    WriteTensor(vd / "round_trip_image.dstn", FieldToTensor(es.round_trip_images[k]));
    WriteTensor(vd / "mask.dstn", MaskToTensor(es.view_masks[k]));
    WriteMaskPng(vd / "mask.png", es.view_masks[k]);
    if (k == es.reference_index) {
      WriteFileBytes(vd / "loss.csv", ScalarTraceCsv("motion", es.drag.loss_trace));
      continue;
    }
    const ViewEditResult& v = es.views[next++];
    WriteTensor(vd / "inverted_latent.dstn", FieldToTensor(v.inverted_latent.values));
    WriteTensor(vd / "optimized_latent.dstn", FieldToTensor(v.optimized_latent.values));
    WriteFileBytes(vd / "loss.csv", TraceCsv(v.loss_trace));
  }
}

AttributedPointCloud ReadCloud(const fs::path& dir) {
  const json meta = ReadJsonFile(dir / "cloud.json");
  AttributedPointCloud c;
  c.channels = meta.at("channels").get<int>();
  c.timestep = meta.at("timestep").get<int>();
  c.frame = meta.at("frame").get<int>();
  const auto n = meta.at("size").get<std::size_t>();
  const Tensor pos = ReadTensor(dir / "positions.dstn");
  const Tensor lat = ReadTensor(dir / "latents.dstn");
  const Tensor w = ReadTensor(dir / "mask_weights.dstn");
  const Tensor pix = ReadTensor(dir / "source_pixel.dstn");
  if (pos.data.size() != 3 * n || lat.data.size() != n * static_cast<std::size_t>(c.channels) ||
      w.data.size() != n || pix.data.size() != 2 * n) {
    throw FormatError(dir.string() + ": cloud tensors disagree with cloud.json");
  }
  for (std::size_t i = 0; i < n; ++i) {
    c.positions.emplace_back(pos.data[3 * i], pos.data[3 * i + 1], pos.data[3 * i + 2]);
    c.source_pixel.push_back({static_cast<int>(pix.data[2 * i]), static_cast<int>(pix.data[2 * i + 1])});
  }
  c.latents.assign(lat.data.begin(), lat.data.end());
  c.mask_weights.assign(w.data.begin(), w.data.end());
  return c;
}

Image ReadImage(const fs::path& path) { return TensorToField(ReadTensor(path)); }

}  // namespace

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WriteRunArtifacts(const fs::path& dir, const RunConfig& cfg, const Scene& scene,
                       const EditSpec& spec, const EditedScene& es) {
  fs::create_directories(dir);
  WriteFileBytes(dir / "config.json", DumpJson(ToJson(cfg)));
  WriteScene(scene, dir);
  WriteEditSpec(spec, dir);
  WriteReference(dir / "reference", es.drag);
  if (es.last_stage == PipelineStage::kDrag) return;
  WriteAligned(dir / "aligned", es);
  if (es.last_stage == PipelineStage::kAlign) return;
  WriteCloud(dir / "cloud", es);
  WriteViews(dir / "views", scene, es);
  if (es.baseline) {
    for (int k = 0; k < scene.size(); ++k) {
      const fs::path vd = dir / "baseline" / "views" / ViewDir(scene.cameras[k].view_id);
      WriteTensor(vd / "clean_latent.dstn", FieldToTensor(es.baseline->clean_latents[k]));
      WriteTensor(vd / "edited_image.dstn", FieldToTensor(es.baseline->edited_images[k]));
      WriteImagePng(vd / "edited_image.png", es.baseline->edited_images[k]);
    }
  }
}

TreeMetrics MetricsFromTree(const fs::path& dir) {
  const RunConfig cfg = ParseRunConfig(ReadJsonFile(dir / "config.json"));
  const json edit = ReadJsonFile(dir / "edit.json");
  const int ref_view = edit.at("ref_view").get<int>();
  if (!fs::exists(dir / "cloud" / "cloud.json")) {
    throw FormatError(dir.string() + " holds no propagated views");
  }
  const std::vector<CameraView> cameras =
      CamerasFromJson(ReadJsonFile(dir / "aligned" / "cameras.json"));
  const AttributedPointCloud cloud = ReadCloud(dir / "cloud");

  std::vector<Field> latents;
  std::vector<Image> images;
  std::vector<Image> round_trips;
  std::vector<MaskGrid> masks;
  int ref_index = -1;
  for (std::size_t k = 0; k < cameras.size(); ++k) {
    const fs::path vd = dir / "views" / ViewDir(cameras[k].view_id);
    if (cameras[k].view_id == ref_view) ref_index = static_cast<int>(k);
    latents.push_back(ReadImage(vd / "clean_latent.dstn"));
    images.push_back(ReadImage(vd / "edited_image.dstn"));
    round_trips.push_back(ReadImage(vd / "round_trip_image.dstn"));
    masks.push_back(TensorToMask(ReadTensor(vd / "mask.dstn")));
  }
  if (ref_index < 0) throw FormatError(dir.string() + ": reference view has no cameras entry");
  const int stride = images.front().width() / latents.front().width();

  ConsistencyInputs in;
  in.cloud = &cloud;
  in.cameras = cameras;
  in.clean_latents = latents;
  in.edited_images = images;
  in.round_trip_images = round_trips;
  in.view_masks = masks;
  in.reference_index = ref_index;
  in.latent_stride = stride;
  in.threshold = cfg.mvopt.mask_threshold;
  TreeMetrics out;
  out.pipeline = ComputeConsistency(in);

  if (fs::exists(dir / "baseline")) {
    std::vector<Field> b_latents;
    std::vector<Image> b_images;
    for (const CameraView& cam : cameras) {
      const fs::path vd = dir / "baseline" / "views" / ViewDir(cam.view_id);
      b_latents.push_back(ReadImage(vd / "clean_latent.dstn"));
      b_images.push_back(ReadImage(vd / "edited_image.dstn"));
    }
    in.clean_latents = b_latents;
    in.edited_images = b_images;
    out.baseline = ComputeConsistency(in);
  }
  return out;
}

json ReportToJson(const ConsistencyReport& report) {
  json per_view = json::array();
  for (const ViewMetrics& v : report.per_view) {
    per_view.push_back({{"view_id", v.view_id},
                        {"agreement_l1", v.agreement_l1},
                        {"psnr", v.psnr},
                        {"masked_pixels", v.masked_pixels}});
  }
  return {{"latent_variance", report.latent_variance},
          {"image_agreement", report.image_agreement},
          {"preservation_psnr", report.preservation_psnr},
          {"measured_points", report.measured_points},
          {"per_view", per_view}};
}

json TreeMetricsToJson(const TreeMetrics& metrics) {
  json j = {{"pipeline", ReportToJson(metrics.pipeline)}};
  if (metrics.baseline) {
    j["baseline"] = ReportToJson(*metrics.baseline);
    j["pipeline_variance_below_baseline"] =
        metrics.pipeline.latent_variance < metrics.baseline->latent_variance;
  }
  return j;
}

void WriteReport(const fs::path& dir, const TreeMetrics& metrics) {
  WriteFileBytes(dir / "report.json", DumpJson(TreeMetricsToJson(metrics)));
}

void WriteSweepCsv(const fs::path& path, std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "eta,t_r,latent_variance,image_agreement,preservation_psnr,measured_points,"
         "runtime_seconds,error\n";
  for (const SweepRow& r : rows) {
    std::string err = r.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ' ';
    }
    out << FormatDouble(r.eta) << ',' << r.t_r << ',' << FormatDouble(r.report.latent_variance)
        << ',' << FormatDouble(r.report.image_agreement) << ','
        << FormatDouble(r.report.preservation_psnr) << ',' << r.report.measured_points << ','
        << FormatDouble(r.runtime_seconds) << ',' << err << '\n';
  }
  WriteFileBytes(path, out.str());
}

}  // namespace dragscene
