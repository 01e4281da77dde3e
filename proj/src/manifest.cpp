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

#include "dragscene/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "dragscene/config.hpp"
#include "dragscene/errors.hpp"
#include "dragscene/png_io.hpp"
#include "dragscene/tensor_io.hpp"

namespace dragscene {

namespace {

using nlohmann::json;

json Vec3Json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Vec3 Vec3From(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json PointsJson(const std::vector<Vec2>& pts) {
  json a = json::array();
  for (const Vec2& p : pts) a.push_back(json::array({p.x(), p.y()}));
  return a;
}

std::vector<Vec2> PointsFrom(const json& j) {
  if (!j.is_array()) throw FormatError("expected an array of points");
  std::vector<Vec2> out;
  for (const json& p : j) {
    if (!p.is_array() || p.size() != 2) throw FormatError("points must be [column, row]");
    out.emplace_back(p[0].get<double>(), p[1].get<double>());
  }
  return out;
}

const char* PrimitiveTypeName(Primitive::Type t) {
  switch (t) {
    case Primitive::Type::kBox: return "box";
    case Primitive::Type::kSphere: return "sphere";
    case Primitive::Type::kQuad: return "quad";
  }
  return "box";
}

Primitive::Type ParsePrimitiveType(const std::string& s) {
  if (s == "box") return Primitive::Type::kBox;
  if (s == "sphere") return Primitive::Type::kSphere;
  if (s == "quad") return Primitive::Type::kQuad;
  throw FormatError("unknown primitive type '" + s + "'");
}

json ReadJson(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::string ImageName(int view_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "images/view_%03d.dstn", view_id);
  return buf;
}

}  // namespace

json CameraToJson(const CameraView& cam) {
  json pose = json::array();
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) pose.push_back(cam.pose(r, c));
  }
  return {{"view_id", cam.view_id},
          {"pose", pose},
          {"intrinsics",
           {{"fx", cam.intrinsics.fx},
            {"fy", cam.intrinsics.fy},
            {"cx", cam.intrinsics.cx},
            {"cy", cam.intrinsics.cy}}},
          {"width", cam.width},
          {"height", cam.height}};
}

CameraView CameraFromJson(const json& j) {
  CameraView cam;
  cam.view_id = j.at("view_id").get<int>();
  const json& pose = j.at("pose");
  if (!pose.is_array() || pose.size() != 16) throw FormatError("camera pose needs 16 values");
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) cam.pose(r, c) = pose[4 * r + c].get<double>();
  }
  const json& k = j.at("intrinsics");
  cam.intrinsics = {k.at("fx").get<double>(), k.at("fy").get<double>(),
                    k.at("cx").get<double>(), k.at("cy").get<double>()};
  cam.width = j.at("width").get<int>();
  cam.height = j.at("height").get<int>();
  try {
    cam.Validate();
  } catch (const InvalidInput& e) {
    throw FormatError(std::string("camera ") + std::to_string(cam.view_id) + ": " + e.what());
  }
  return cam;
}

json CamerasToJson(const std::vector<CameraView>& cams) {
  json a = json::array();
  for (const CameraView& c : cams) a.push_back(CameraToJson(c));
  return a;
}

std::vector<CameraView> CamerasFromJson(const json& j) {
  std::vector<CameraView> out;
  for (const json& c : j) out.push_back(CameraFromJson(c));
  return out;
}

json SceneToJson(const Scene& scene) {
  json prims = json::array();
  for (const Primitive& p : scene.geometry.primitives) {
    prims.push_back({{"type", PrimitiveTypeName(p.type)},
                     {"center", Vec3Json(p.center)},
                     {"half_extent", Vec3Json(p.half_extent)},
                     {"axis_u", Vec3Json(p.axis_u)},
                     {"axis_v", Vec3Json(p.axis_v)},
                     {"color", Vec3Json(p.color)},
                     {"phase", Vec3Json(p.phase)},
                     {"frequency", p.frequency}});
  }
  json views = json::array();
  for (const CameraView& cam : scene.cameras) {
    json v = CameraToJson(cam);
    v["image"] = ImageName(cam.view_id);
    views.push_back(v);
  }
  return {{"scene_id", scene.scene_id},
          {"kind", SceneKindName(scene.kind)},
          {"seed", scene.seed},
          {"trajectory",
           {{"arc_degrees", scene.trajectory.arc_degrees},
            {"radius", scene.trajectory.radius},
            {"height", scene.trajectory.height}}},
          {"background", Vec3Json(scene.geometry.background)},
          {"primitives", prims},
          {"edit",
           {{"primitive", scene.edit.primitive},
            {"displacement", Vec3Json(scene.edit.displacement)}}},
          {"views", views}};
}

void WriteScene(const Scene& scene, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteFileBytes(dir / "scene.json", DumpJson(SceneToJson(scene)));
  for (int k = 0; k < scene.size(); ++k) {
    WriteTensor(dir / ImageName(scene.cameras[k].view_id), FieldToTensor(scene.images[k]));
  }
}

Scene ReadScene(const std::filesystem::path& manifest) {
  const json j = ReadJson(manifest);
  Scene scene;
  try {
    scene.scene_id = j.at("scene_id").get<std::string>();
    scene.kind = ParseSceneKind(j.at("kind").get<std::string>());
    scene.seed = j.at("seed").get<std::uint64_t>();
    const json& tr = j.at("trajectory");
    scene.trajectory = {tr.at("arc_degrees").get<double>(), tr.at("radius").get<double>(),
                        tr.at("height").get<double>()};
    scene.geometry.background = Vec3From(j.at("background"));
    for (const json& p : j.at("primitives")) {
      Primitive prim;
      prim.type = ParsePrimitiveType(p.at("type").get<std::string>());
      prim.center = Vec3From(p.at("center"));
      prim.half_extent = Vec3From(p.at("half_extent"));
      prim.axis_u = Vec3From(p.at("axis_u"));
      prim.axis_v = Vec3From(p.at("axis_v"));
      prim.color = Vec3From(p.at("color"));
      prim.phase = Vec3From(p.at("phase"));
      prim.frequency = p.at("frequency").get<double>();
      scene.geometry.primitives.push_back(prim);
    }
    scene.edit.primitive = j.at("edit").at("primitive").get<int>();
    scene.edit.displacement = Vec3From(j.at("edit").at("displacement"));
    for (const json& v : j.at("views")) scene.cameras.push_back(CameraFromJson(v));
  } catch (const json::exception& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(manifest.string() + ": " + e.what());
  }
  if (scene.cameras.empty()) throw FormatError(manifest.string() + ": no views");
  const int n_prims = static_cast<int>(scene.geometry.primitives.size());
  if (scene.edit.primitive < 0 || scene.edit.primitive >= n_prims) {
    throw FormatError(manifest.string() + ": edit primitive out of range");
  }
  for (const CameraView& cam : scene.cameras) {
    scene.images.push_back(RenderView(scene.geometry, cam).image);
  }
  return scene;
}

void WriteEditSpec(const EditSpec& spec, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  WriteMaskPng(dir / "edit_mask.png", spec.mask);
  const json j = {{"ref_view", spec.ref_view},
                  {"mask", "edit_mask.png"},
                  {"handles", PointsJson(spec.handles)},
                  {"targets", PointsJson(spec.targets)}};
  WriteFileBytes(dir / "edit.json", DumpJson(j));
}

EditSpec ReadEditSpec(const std::filesystem::path& path) {
  const json j = ReadJson(path);
  EditSpec spec;
  std::filesystem::path mask_path;
  try {
    spec.ref_view = j.at("ref_view").get<int>();
    mask_path = j.at("mask").get<std::string>();
    spec.handles = PointsFrom(j.at("handles"));
    spec.targets = PointsFrom(j.at("targets"));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (mask_path.is_relative()) mask_path = path.parent_path() / mask_path;
  spec.mask = ReadMaskPng(mask_path);
  spec.Validate(spec.mask.height(), spec.mask.width());
  return spec;
}

}  // namespace dragscene
