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

#include "dragscene/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <limits>

#include "dragscene/errors.hpp"

namespace dragscene {

namespace {

template <typename Fn>
auto RunStage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const NumericalFailure& e) {
    throw StageError(stage, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(stage, e.what(), false);
  }
}

Vec2 ProjectWorld(const CameraView& cam, const Vec3& world, bool* in_front) {
  const Vec3 p = cam.rotation() * world + cam.translation();
  *in_front = p.z() > kZNear;
  return ProjectPoint(p, cam.intrinsics);
}

Vec2 ClampPixel(const Vec2& p, int height, int width) {
  return {std::clamp(p.x(), 0.0, width - 1.0), std::clamp(p.y(), 0.0, height - 1.0)};
}

// Per-view propagation against one cloud, fanned out over views.
std::vector<ViewEditResult> PropagateViews(const Scene& scene,
                                           std::span<const CameraView> cameras,
                                           int ref_index, const AttributedPointCloud& cloud,
                                           const Denoiser& den, const Decoder& decoder,
                                           const Schedule& sched, const MVOptConfig& cfg) {
  std::vector<int> indices;
  for (int k = 0; k < scene.size(); ++k) {
    if (k != ref_index) indices.push_back(k);
  }
  std::vector<ViewEditResult> out(indices.size());
  std::vector<std::exception_ptr> errors(indices.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t j = 0; j < static_cast<std::int64_t>(indices.size()); ++j) {
    const int k = indices[static_cast<std::size_t>(j)];
    try {
      out[static_cast<std::size_t>(j)] =
          EditView(scene.images[k], cloud, cameras[k], den, decoder, sched, cfg);
    } catch (...) {
      errors[static_cast<std::size_t>(j)] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

struct Assembled {
  std::vector<Field> clean_latents;
  std::vector<Image> edited_images;
  std::vector<Image> round_trip_images;
  std::vector<MaskGrid> view_masks;
};

Assembled Assemble(const Scene& scene, int ref_index, const DragResult& drag,
                   const MaskGrid& ref_mask, std::span<const ViewEditResult> views,
                   const Denoiser& den, const Decoder& decoder, const Schedule& sched) {
  Assembled a;
  std::size_t next = 0;
  for (int k = 0; k < scene.size(); ++k) {
    if (k == ref_index) {
      a.clean_latents.push_back(DdimDenoise(drag.edited_latent_te, den, sched, 0).values);
      a.edited_images.push_back(drag.edited_image);
      const LatentGrid inv = DdimInvert(decoder.Encode(scene.images[k]), den, sched, sched.t_r);
      a.round_trip_images.push_back(decoder.Decode(DdimDenoise(inv, den, sched, 0)));
      a.view_masks.push_back(ref_mask);
    } else {
      const ViewEditResult& v = views[next++];
      a.clean_latents.push_back(v.clean_latent.values);
      a.edited_images.push_back(v.edited_image);
      a.round_trip_images.push_back(v.round_trip_image);
      a.view_masks.push_back(UpsampleMask(v.maps.mask_map, decoder.stride()));
    }
  }
  return a;
}

ConsistencyReport Measure(const EditedScene& es, std::span<const Field> latents,
                          std::span<const Image> images, int stride, double threshold) {
  ConsistencyInputs in;
  in.cloud = &es.cloud;
  in.cameras = es.cameras;
  in.clean_latents = latents;
  in.edited_images = images;
  in.round_trip_images = es.round_trip_images;
  in.view_masks = es.view_masks;
  in.reference_index = es.reference_index;
  in.latent_stride = stride;
  in.threshold = threshold;
  return ComputeConsistency(in);
}

AttributedPointCloud BuildCloud(const AlignResult& align, const DragResult& drag,
                                const EditSpec& spec, bool* empty_support) {
  // A drag that took no optimization step leaves nothing to propagate.
  *empty_support = drag.steps == 0;
  MaskGrid mask = spec.mask;
  if (*empty_support) std::fill(mask.data().begin(), mask.data().end(), 0.0);
  return BuildAttributedCloud(align.state, drag.reference_latent_tr, mask);
}

struct Prelude {
  int ref_index = 0;
  DragResult drag;
  AlignResult align;
  std::vector<int> aligned_views;
  std::vector<CameraView> cameras;
};

Prelude DragAndAlign(const Scene& scene, const EditSpec& spec, const Denoiser& den,
                     const Decoder& decoder, const PipelineConfig& cfg, bool align = true) {
  Prelude p;
  p.ref_index = RunStage("setup", [&] { return scene.IndexOf(spec.ref_view); });
  RunStage("setup", [&] {
    spec.Validate(scene.images[p.ref_index].height(), scene.images[p.ref_index].width());
    cfg.mvopt.Validate();
    return 0;
  });
  p.drag = RunStage("drag", [&] {
    return DragEdit(scene.images[p.ref_index], spec, den, decoder, cfg.schedule, cfg.drag);
  });
  if (!align) return p;
  p.align = RunStage("align", [&] {
    std::vector<int> ids;
    for (const CameraView& c : scene.cameras) ids.push_back(c.view_id);
    const std::vector<int> aux = SelectAuxViews(ids, spec.ref_view, cfg.align.aux_views);
    std::vector<CameraView> views{scene.cameras[p.ref_index]};
    p.aligned_views.push_back(spec.ref_view);
    for (int id : aux) {
      views.push_back(scene.cameras[scene.IndexOf(id)]);
      p.aligned_views.push_back(id);
    }
    const SyntheticProvider provider(scene, spec.ref_view, cfg.align.noise_sigma,
                                     cfg.align.seed);
    AlignResult r = GlobalAlign(views, provider, spec.mask, cfg.align);
    if (r.final_loss > r.initial_loss) {
      throw OptimizationFailure("alignment increased its loss", r.iterations);
    }
    return r;
  });
  p.cameras = ReferenceFrameCameras(scene, spec.ref_view);
  for (const CameraView& aligned : p.align.state.poses) {
    p.cameras[static_cast<std::size_t>(scene.IndexOf(aligned.view_id))].pose = aligned.pose;
  }
  return p;
}

}  // namespace

EditSpec AutoEditSpec(const Scene& scene, int ref_view) {
  const CameraView& cam = scene.cameras[static_cast<std::size_t>(scene.IndexOf(ref_view))];
  EditSpec spec;
  spec.ref_view = ref_view;
  spec.mask = DilateMask(EditRegion(scene, cam), 1);
  const Primitive& prim = scene.geometry.primitives.at(static_cast<std::size_t>(scene.edit.primitive));
  bool front_h = false;
  bool front_t = false;
  const Vec2 h = ProjectWorld(cam, prim.center, &front_h);
  const Vec2 t = ProjectWorld(cam, prim.center + scene.edit.displacement, &front_t);
  if (!front_h || !front_t) throw ContractError("edited primitive is behind the reference camera");
  spec.handles.push_back(ClampPixel(h, cam.height, cam.width));
  spec.targets.push_back(ClampPixel(t, cam.height, cam.width));
  return spec;
}

ColoredCloud ReconstructScene(std::span<const Image> images, std::span<const CameraView> cameras,
                              std::span<const Pointmap> points) {
  if (images.empty() || images.size() != cameras.size() || points.size() != cameras.size()) {
    throw ContractError("reconstruction needs one image and pointmap per camera");
  }
  ColoredCloud cloud;
  for (const Pointmap& pm : points) {
    for (std::size_t i = 0; i < pm.points.size(); ++i) {
      if (pm.valid[i]) cloud.positions.push_back(pm.points[i]);
    }
  }
  const std::size_t n = cloud.positions.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<Vec3> sum(n, Vec3::Zero());
  std::vector<Vec3> sum_sq(n, Vec3::Zero());
  cloud.observations.assign(n, 0);
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    const CameraView& cam = cameras[v];
    const Image& img = images[v];
    if (img.height() != cam.height || img.width() != cam.width || img.channels() != 3) {
      throw ContractError("edited image does not match its camera");
    }
    std::vector<int> pixel(n, -1);
    std::vector<double> depth(n, 0.0);
    Grid<double> nearest(cam.height, cam.width, kInf);
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 p = cam.rotation() * cloud.positions[i] + cam.translation();
      int col = 0;
      int row = 0;
      if (!NearestPixel(p, cam.intrinsics, cam.width, cam.height, &col, &row)) continue;
      pixel[i] = row * cam.width + col;
      depth[i] = p.z();
      nearest[pixel[i]] = std::min(nearest[pixel[i]], p.z());
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (pixel[i] < 0 || depth[i] > nearest[pixel[i]] * 1.01) continue;
      const int row = pixel[i] / cam.width;
      const int col = pixel[i] % cam.width;
      const Vec3 c(img(row, col, 0), img(row, col, 1), img(row, col, 2));
      sum[i] += c;
      sum_sq[i] += c.cwiseProduct(c);
      ++cloud.observations[i];
    }
  }
  cloud.colors.assign(n, Vec3::Zero());
  cloud.variance.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int k = cloud.observations[i];
    if (k == 0) continue;
    const Vec3 mean = sum[i] / k;
    const Vec3 var = (sum_sq[i] / k - mean.cwiseProduct(mean)).cwiseMax(0.0);
    cloud.colors[i] = mean;
    cloud.variance[i] = var.mean();
  }
  return cloud;
}

ColoredCloud ReconstructScene(std::span<const Image> edited_views,
                              const AlignmentState& aligned) {
  if (aligned.size() == 0) throw ContractError("alignment is empty");
  return ReconstructScene(edited_views, aligned.poses, aligned.fused);
}

std::vector<CameraView> ReferenceFrameCameras(const Scene& scene, int ref_view) {
  const Mat4 ref_inv = RigidInverse(scene.cameras[static_cast<std::size_t>(scene.IndexOf(ref_view))].pose);
  std::vector<CameraView> out = scene.cameras;
  for (CameraView& cam : out) {
    cam.pose = cam.view_id == ref_view ? Mat4(Mat4::Identity()) : Mat4(cam.pose * ref_inv);
  }
  return out;
}

BaselineResult RunBaseline(const Scene& scene, const EditSpec& spec, const Denoiser& den,
                           const Decoder& decoder, const PipelineConfig& cfg) {
  const int ref_index = scene.IndexOf(spec.ref_view);
  const CameraView& ref_cam = scene.cameras[ref_index];
  const RenderedView ref_render = RenderView(scene.geometry, ref_cam);
  Pointmap ref_points(ref_cam.view_id, ref_cam.height, ref_cam.width);
  for (std::size_t i = 0; i < ref_points.points.size(); ++i) {
    if (!ref_render.points.valid[i]) continue;
    ref_points.points[i] = ref_cam.rotation() * ref_render.points.points[i] + ref_cam.translation();
    ref_points.valid[i] = 1;
  }
  std::vector<Vec3> handle_world;
  for (const Vec2& h : spec.handles) {
    const int col = std::clamp(static_cast<int>(std::lround(h.x())), 0, ref_cam.width - 1);
    const int row = std::clamp(static_cast<int>(std::lround(h.y())), 0, ref_cam.height - 1);
    if (!ref_render.points.valid(row, col)) {
      throw ContractError("baseline handle does not hit the scene");
    }
    handle_world.push_back(ref_render.points.points(row, col));
  }

  const std::size_t views = static_cast<std::size_t>(scene.size());
  BaselineResult out;
  out.drags.resize(views);
  out.clean_latents.resize(views);
  out.edited_images.resize(views);
  std::vector<std::exception_ptr> errors(views);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t kk = 0; kk < static_cast<std::int64_t>(views); ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    try {
      const CameraView& cam = scene.cameras[k];
      EditSpec local;
      local.ref_view = cam.view_id;
      if (static_cast<int>(k) == ref_index) {
        local = spec;
      } else {
        local.mask = WarpMask(spec.mask, ref_points, ref_cam, cam);
        for (const Vec3& x : handle_world) {
          bool front_h = false;
          bool front_t = false;
          const Vec2 h = ProjectWorld(cam, x, &front_h);
          const Vec2 t = ProjectWorld(cam, x + scene.edit.displacement, &front_t);
          if (!front_h || !front_t) continue;
          local.handles.push_back(ClampPixel(h, cam.height, cam.width));
          local.targets.push_back(ClampPixel(t, cam.height, cam.width));
        }
      }
      const bool empty_mask = std::none_of(local.mask.data().begin(), local.mask.data().end(),
                                           [](double v) { return v > 0.0; });
      if (local.handles.empty() || empty_mask) {
        local.mask = MaskGrid(cam.height, cam.width, 1.0);
        local.handles = {Vec2(0.0, 0.0)};
        local.targets = local.handles;
      }
      out.drags[k] = DragEdit(scene.images[k], local, den, decoder, cfg.schedule, cfg.drag);
      out.clean_latents[k] = DdimDenoise(out.drags[k].edited_latent_te, den, cfg.schedule, 0).values;
      out.edited_images[k] = out.drags[k].edited_image;
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

EditedScene RunPipeline(const Scene& scene, const EditSpec& spec, const Denoiser& den,
                        const Decoder& decoder, const PipelineConfig& cfg) {
  Prelude pre = DragAndAlign(scene, spec, den, decoder, cfg,
                             cfg.last_stage != PipelineStage::kDrag);
  EditedScene es;
  es.last_stage = cfg.last_stage;
  es.reference_view = spec.ref_view;
  es.reference_index = pre.ref_index;
  es.schedule = cfg.schedule;
  es.drag = std::move(pre.drag);
  if (cfg.last_stage == PipelineStage::kDrag) return es;
  es.align = std::move(pre.align);
  es.aligned_views = std::move(pre.aligned_views);
  es.cameras = std::move(pre.cameras);
  if (cfg.last_stage == PipelineStage::kAlign) return es;
  es.cloud = RunStage("cloud", [&] {
    return BuildCloud(es.align, es.drag, spec, &es.edit_support_empty);
  });
  es.views = RunStage("propagate", [&] {
    return PropagateViews(scene, es.cameras, es.reference_index, es.cloud, den, decoder,
                          cfg.schedule, cfg.mvopt);
  });
  Assembled a = RunStage("propagate", [&] {
    return Assemble(scene, es.reference_index, es.drag, spec.mask, es.views, den, decoder,
                    cfg.schedule);
  });
  es.clean_latents = std::move(a.clean_latents);
  es.edited_images = std::move(a.edited_images);
  es.round_trip_images = std::move(a.round_trip_images);
  es.view_masks = std::move(a.view_masks);
  if (cfg.last_stage == PipelineStage::kPropagate) return es;
  es.reconstruction = RunStage("reconstruct", [&] {
    std::vector<Image> aligned_images;
    for (int id : es.aligned_views) aligned_images.push_back(es.edited_images[scene.IndexOf(id)]);
    return ReconstructScene(aligned_images, es.align.state);
  });
  es.report = RunStage("metrics", [&] {
    return Measure(es, es.clean_latents, es.edited_images, decoder.stride(),
                   cfg.mvopt.mask_threshold);
  });
  if (cfg.baseline) {
    es.baseline = RunStage("baseline", [&] { return RunBaseline(scene, spec, den, decoder, cfg); });
    es.baseline_report = RunStage("baseline", [&] {
      return Measure(es, es.baseline->clean_latents, es.baseline->edited_images,
                     decoder.stride(), cfg.mvopt.mask_threshold);
    });
  }
  return es;
}

std::vector<SweepRow> EtaSweep(const Scene& scene, const EditSpec& spec,
                               std::span<const double> etas, const Denoiser& den,
                               const Decoder& decoder, const PipelineConfig& cfg) {
  for (double eta : etas) {
    if (!(eta > 0.0 && eta < 1.0)) throw ContractError("sweep strengths must lie in (0, 1)");
  }
  std::vector<SweepRow> rows;
  if (etas.empty()) return rows;
  const Prelude pre = DragAndAlign(scene, spec, den, decoder, cfg);
  for (double eta : etas) {
    SweepRow row;
    row.eta = eta;
    const int t_total = cfg.schedule.t_total;
    row.t_r = std::clamp(StepForStrength(eta, t_total), 1, t_total);
    const auto start = std::chrono::steady_clock::now();
    try {
      Schedule sched = cfg.schedule;
      sched.t_r = row.t_r;
      DragResult drag = pre.drag;
      drag.reference_latent_tr = ReinvertEdited(drag.edited_image, den, decoder, sched);
      EditedScene es;
      es.reference_view = spec.ref_view;
      es.reference_index = pre.ref_index;
      es.cameras = pre.cameras;
      es.cloud = BuildCloud(pre.align, drag, spec, &es.edit_support_empty);
      es.views = PropagateViews(scene, es.cameras, pre.ref_index, es.cloud, den, decoder, sched,
                                cfg.mvopt);
      Assembled a = Assemble(scene, pre.ref_index, drag, spec.mask, es.views, den, decoder, sched);
      es.round_trip_images = std::move(a.round_trip_images);
      es.view_masks = std::move(a.view_masks);
      row.report = Measure(es, a.clean_latents, a.edited_images, decoder.stride(),
                           cfg.mvopt.mask_threshold);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    row.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace dragscene
