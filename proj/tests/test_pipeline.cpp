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
#include <cmath>

#include "doctest.h"

#include "dragscene/config.hpp"
#include "dragscene/errors.hpp"
#include "dragscene/metrics.hpp"
#include "dragscene/pipeline.hpp"
#include "test_util.hpp"

using namespace dragscene;
using namespace dragscene::testing;

namespace {

Image Gray(int h, int w, double v) { return Image(h, w, 3, v); }

struct Harness {
  Scene scene = GenerateSyntheticScene(SceneKind::kTwoBox, 6, 1, 32, 32);
  ScalarLinearDenoiser den{0.1};
  LinearDecoder dec{3, 2, 0};
  PipelineConfig cfg;
  EditSpec spec = AutoEditSpec(scene, 3);
};

}  // namespace

TEST_CASE("reconstruction statistics") {
  const CameraView cam = MakeCamera(0, Mat4::Identity(), 1, 1, 1.0);
  Pointmap one(kWorldFrame, 1, 1);
  one.points[0] = Vec3(0, 0, 2);
  one.valid[0] = 1;
  Pointmap none(kWorldFrame, 1, 1);

  const std::vector<Image> single = {Gray(1, 1, 0.25)};
  const std::vector<CameraView> one_cam = {cam};
  const std::vector<Pointmap> one_pm = {one};
  const ColoredCloud a = ReconstructScene(single, one_cam, one_pm);
  REQUIRE(a.positions.size() == 1);
  CHECK(a.colors[0] == Vec3(0.25, 0.25, 0.25));
  CHECK(a.variance[0] == 0.0);
  CHECK(a.observations[0] == 1);

  // Two views disagreeing by +-0.2 around 0.5.
  const std::vector<Image> pair = {Gray(1, 1, 0.7), Gray(1, 1, 0.3)};
  const std::vector<CameraView> two_cams = {cam, cam};
  const std::vector<Pointmap> pms = {one, none};
  const ColoredCloud b = ReconstructScene(pair, two_cams, pms);
  REQUIRE(b.positions.size() == 1);
  CHECK(b.observations[0] == 2);
  CHECK(b.colors[0].x() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(b.variance[0] == doctest::Approx(0.04).epsilon(1e-12));

  const std::vector<Image> same = {Gray(1, 1, 0.6), Gray(1, 1, 0.6)};
  CHECK(ReconstructScene(same, two_cams, pms).variance[0] == 0.0);
  CHECK_THROWS_AS(ReconstructScene(single, two_cams, pms), ContractError);
}

TEST_CASE("metric hand cases") {
  const Image a = Gray(2, 2, 0.5);
  Image b = a;
  const MaskGrid all(2, 2, 1.0);
  CHECK(Psnr(a, a, all) == kPsnrCap);
  for (int ch = 0; ch < 3; ++ch) b(0, 0, ch) = 0.7;
  // MSE = 0.04 / 4 = 0.01 -> 20 dB.
  CHECK(Psnr(a, b, all) == doctest::Approx(20.0).epsilon(1e-12));
  CHECK(PsnrFromMse(0.0) == kPsnrCap);
  std::size_t count = 0;
  CHECK(MaskedMeanL1(a, b, all, &count) == doctest::Approx(0.05).epsilon(1e-12));
  CHECK(count == 4);
  MaskGrid corner(2, 2, 0.0);
  corner(0, 0) = 1.0;
  CHECK(MaskedMeanL1(a, b, corner) == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(MaskedMeanL1(a, b, MaskGrid(2, 2, 0.0), &count) == 0.0);
  CHECK(count == 0);

  // Two views of one point whose latents read 1 and 3: population variance 1.
  AttributedPointCloud cloud;
  cloud.positions = {Vec3(0, 0, 2)};
  cloud.latents = {0.0};
  cloud.mask_weights = {1.0};
  cloud.source_pixel = {std::array<int, 2>{0, 0}};
  cloud.channels = 1;
  const std::vector<CameraView> cams = {MakeCamera(0, Mat4::Identity(), 1, 1, 1.0),
                                        MakeCamera(1, MakePose(Mat3::Identity(), Vec3(0, 0, 1)), 1, 1, 1.0)};
  std::vector<Field> latents = {Field(1, 1, 1, 1.0), Field(1, 1, 1, 3.0)};
  int measured = 0;
  CHECK(MaskedLatentVariance(cloud, cams, latents, 1, 0.5, &measured) == doctest::Approx(1.0));
  CHECK(measured == 1);
  latents[1] = latents[0];
  CHECK(MaskedLatentVariance(cloud, cams, latents, 1) == 0.0);
  cloud.mask_weights = {0.2};
  CHECK(MaskedLatentVariance(cloud, cams, latents, 1, 0.5, &measured) == 0.0);
  CHECK(measured == 0);
}

TEST_CASE("automatic edit spec follows the ground-truth edit") {
  const Scene scene = GenerateSyntheticScene(SceneKind::kTwoBox, 5, 2, 32, 32);
  const EditSpec spec = AutoEditSpec(scene, 2);
  CHECK(spec.ref_view == 2);
  REQUIRE(spec.handles.size() == 1);
  CHECK_NOTHROW(spec.Validate(32, 32));
  // The box moves along +x, which the middle camera sees as a move to the right.
  CHECK(spec.targets[0].x() > spec.handles[0].x());
  const MaskGrid region = EditRegion(scene, scene.cameras[2]);
  for (std::size_t i = 0; i < region.size(); ++i) {
    if (region[i] >= 0.5) CHECK(spec.mask[i] == 1.0);
  }
}

TEST_CASE("pipeline stages and outputs") {
  Harness h;
  h.cfg.last_stage = PipelineStage::kDrag;
  const EditedScene drag_only = RunPipeline(h.scene, h.spec, h.den, h.dec, h.cfg);
  CHECK(drag_only.views.empty());
  CHECK(drag_only.drag.steps > 0);

  h.cfg.last_stage = PipelineStage::kAll;
  h.cfg.baseline = true;
  const EditedScene es = RunPipeline(h.scene, h.spec, h.den, h.dec, h.cfg);
  CHECK(es.reference_index == 3);
  CHECK(es.views.size() == 5);
  CHECK(es.edited_images.size() == 6);
  CHECK(es.aligned_views.front() == 3);
  CHECK(es.report.measured_points > 0);
  CHECK(std::isfinite(es.report.latent_variance));
  REQUIRE(es.baseline_report.has_value());
  CHECK(es.report.latent_variance < es.baseline_report->latent_variance);
  // The reference output is the dragged image itself.
  CHECK(es.edited_images[3].data() == es.drag.edited_image.data());

  // Outside the dilated mask every propagated view stays near its round trip.
  for (std::size_t k = 0; k < es.edited_images.size(); ++k) {
    if (static_cast<int>(k) == es.reference_index) continue;
    const MaskGrid keep = DilateMask(es.view_masks[k], 1);
    double worst = 0.0;
    for (int r = 0; r < 32; ++r) {
      for (int c = 0; c < 32; ++c) {
        if (keep(r, c) >= 0.5) continue;
        for (int ch = 0; ch < 3; ++ch) {
          worst = std::max(worst, std::abs(es.edited_images[k](r, c, ch) - es.round_trip_images[k](r, c, ch)));
        }
      }
    }
    CHECK(worst < 0.05);
  }

  const EditedScene again = RunPipeline(h.scene, h.spec, h.den, h.dec, h.cfg);
  for (std::size_t k = 0; k < es.edited_images.size(); ++k) {
    CHECK(again.edited_images[k].data() == es.edited_images[k].data());
  }
}

TEST_CASE("a no-op drag leaves every view at its round trip") {
  Harness h;
  h.spec.targets = h.spec.handles;
  const EditedScene es = RunPipeline(h.scene, h.spec, h.den, h.dec, h.cfg);
  for (std::size_t k = 0; k < es.edited_images.size(); ++k) {
    double worst = 0.0;
    for (std::size_t i = 0; i < es.edited_images[k].size(); ++i) {
      worst = std::max(worst, std::abs(es.edited_images[k][i] - es.round_trip_images[k][i]));
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("stage errors carry the stage name") {
  Harness h;
  EditSpec bad = h.spec;
  bad.ref_view = 42;
  try {
    RunPipeline(h.scene, bad, h.den, h.dec, h.cfg);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "setup");
  }
  bad = h.spec;
  bad.targets[0] = Vec2(100, 0);
  CHECK_THROWS_AS(RunPipeline(h.scene, bad, h.den, h.dec, h.cfg), StageError);
}

TEST_CASE("inversion strength sweep") {
  Harness h;
  const std::vector<double> none;
  CHECK(EtaSweep(h.scene, h.spec, none, h.den, h.dec, h.cfg).empty());
  const std::vector<double> one = {0.4};
  const std::vector<SweepRow> rows = EtaSweep(h.scene, h.spec, one, h.den, h.dec, h.cfg);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].t_r == 20);
  CHECK(rows[0].error.empty());
  CHECK(std::isfinite(rows[0].report.latent_variance));
  const std::vector<double> several = {0.2, 0.6, 0.9};
  const std::vector<SweepRow> more = EtaSweep(h.scene, h.spec, several, h.den, h.dec, h.cfg);
  CHECK(more.size() == 3);
  CHECK(more[0].t_r == 10);
  CHECK(more[1].t_r == 30);
  CHECK(more[2].t_r == 45);
  const std::vector<double> invalid = {1.0};
  CHECK_THROWS_AS(EtaSweep(h.scene, h.spec, invalid, h.den, h.dec, h.cfg), ContractError);
}

namespace {

double UnmaskedDeviation(const char* denoiser) {
  const Scene scene = GenerateSyntheticScene(SceneKind::kTwoBox, kDefaultViewCount, 0);
  const EditSpec spec = AutoEditSpec(scene, 10);
  DenoiserConfig dc;
  dc.kind = denoiser;
  const auto den = MakeDenoiser(dc);
  const LinearDecoder dec(3, 2, 0);
  PipelineConfig cfg;
  const EditedScene es = RunPipeline(scene, spec, *den, dec, cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k < es.edited_images.size(); ++k) {
    if (static_cast<int>(k) == es.reference_index) continue;
    const MaskGrid keep = DilateMask(es.view_masks[k], 1);
    const Image& a = es.edited_images[k];
    for (int r = 0; r < a.height(); ++r) {
      for (int c = 0; c < a.width(); ++c) {
        if (keep(r, c) >= 0.5) continue;
        for (int ch = 0; ch < 3; ++ch) {
          worst = std::max(worst, std::abs(a(r, c, ch) - es.round_trip_images[k](r, c, ch)));
        }
      }
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("unmasked preservation with the pointwise denoisers") {
  CHECK(UnmaskedDeviation("linear") < 0.05);
  CHECK(UnmaskedDeviation("zero") < 0.05);
}

// Fixed-step L1 subgradient descent through the blur leaves jitter of order
// sigma * lambda outside the mask, above the 0.05 bound at the defaults.
TEST_CASE("unmasked preservation with the smoothing denoiser" * doctest::may_fail()) {
  const double worst = UnmaskedDeviation("smoothing");
  MESSAGE("smoothing denoiser: L-inf outside the dilated mask " << worst);
  CHECK(worst < 0.05);
}
