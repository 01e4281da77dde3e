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
#include <vector>

#include "json.hpp"

#include "dragscene/drag_edit.hpp"
#include "dragscene/geometry.hpp"
#include "dragscene/scene.hpp"

namespace dragscene {

nlohmann::json CameraToJson(const CameraView& cam);
CameraView CameraFromJson(const nlohmann::json& j);
nlohmann::json CamerasToJson(const std::vector<CameraView>& cams);
std::vector<CameraView> CamerasFromJson(const nlohmann::json& j);

nlohmann::json SceneToJson(const Scene& scene);

// Writes `dir/scene.json` and one float32 image tensor per view under
// `dir/images/`.
void WriteScene(const Scene& scene, const std::filesystem::path& dir);

// Restores geometry, cameras and edit from the manifest and re-renders the
// views, so a loaded scene matches the generated one exactly. Throws
// FormatError on malformed manifests.
Scene ReadScene(const std::filesystem::path& manifest);

// Writes `dir/edit.json` and the mask as `dir/edit_mask.png`.
void WriteEditSpec(const EditSpec& spec, const std::filesystem::path& dir);

// The mask path is resolved relative to the JSON file.
EditSpec ReadEditSpec(const std::filesystem::path& path);

}  // namespace dragscene
