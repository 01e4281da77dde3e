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

#include "dragscene/mv_optimizer.hpp"

#include <cmath>

#include "dragscene/errors.hpp"
#include "dragscene/kernels.hpp"

namespace dragscene {

namespace {

void CheckShapes(const LatentGrid& z, const RenderedMaps& maps) {
  if (!z.values.SameShape(maps.latent_map.values) || maps.mask_map.height() != z.height() ||
      maps.mask_map.width() != z.width()) {
    throw ContractError("latent and rendered maps differ in shape");
  }
}

}  // namespace

void MVOptConfig::Validate() const {
  if (!(lambda >= 0.0) || !(sigma > 0.0) || m_iters < 0 || !(mask_threshold >= 0.0) ||
      !(mask_threshold <= 1.0)) {
    throw ConfigError("invalid multi-view optimizer configuration");
  }
}

double RecLoss(const LatentGrid& z_cur, const RenderedMaps& maps, Field* grad) {
  CheckShapes(z_cur, maps);
  std::vector<double> weight(maps.mask_map.size());
  for (std::size_t p = 0; p < weight.size(); ++p) {
    weight[p] = maps.coverage[p] ? maps.mask_map[p] : 0.0;
  }
  std::vector<double> g(grad != nullptr ? z_cur.values.size() : 0);
  const double loss = kernels::parallel::MaskedL1(
      z_cur.values.data(), maps.latent_map.values.data(), weight, z_cur.channels(), g);
  if (grad != nullptr) {
    for (std::size_t i = 0; i < g.size(); ++i) (*grad)[i] += g[i];
  }
  return loss;
}

double MaskLoss(const LatentGrid& z_cur, const Field& init_prediction, const RenderedMaps& maps,
                const Denoiser& den, const Schedule& sched, Field* grad) {
  CheckShapes(z_cur, maps);
  const LatentGrid pred = DenoiseOneStep(z_cur, den, sched);
  std::vector<double> weight(maps.mask_map.size());
  for (std::size_t p = 0; p < weight.size(); ++p) weight[p] = 1.0 - maps.mask_map[p];
  std::vector<double> g(grad != nullptr ? z_cur.values.size() : 0);
  const double loss = kernels::parallel::MaskedL1(pred.values.data(), init_prediction.data(),
                                                  weight, z_cur.channels(), g);
  if (grad != nullptr) {
    Field cot(z_cur.height(), z_cur.width(), z_cur.channels());
    cot.data() = std::move(g);
    const Field back = DenoiseOneStepVjp(z_cur, den, sched, cot);
    for (std::size_t i = 0; i < back.size(); ++i) (*grad)[i] += back[i];
  }
  return loss;
}

LossTerms TotalLoss(const LatentGrid& z_cur, const LatentGrid& z_init,
                    const Field& init_prediction, const RenderedMaps& maps,
                    const Denoiser& den, const Schedule& sched, const MVOptConfig& cfg,
                    Field* grad) {
  LossTerms terms;
  if (cfg.literal_rec) {
    terms.rec = RecLoss(z_init, maps);
  } else {
    terms.rec = RecLoss(z_cur, maps, grad);
  }
  if (grad != nullptr && cfg.lambda != 0.0) {
    Field mask_grad(z_cur.height(), z_cur.width(), z_cur.channels(), 0.0);
    terms.mask = MaskLoss(z_cur, init_prediction, maps, den, sched, &mask_grad);
    for (std::size_t i = 0; i < mask_grad.size(); ++i) (*grad)[i] += cfg.lambda * mask_grad[i];
  } else {
    terms.mask = MaskLoss(z_cur, init_prediction, maps, den, sched);
  }
  terms.total = terms.rec + cfg.lambda * terms.mask;
  return terms;
}

ViewOptimization OptimizeViewLatent(const LatentGrid& z_init, const RenderedMaps& maps,
                                    const Denoiser& den, const Schedule& sched,
                                    const MVOptConfig& cfg) {
  cfg.Validate();
  CheckShapes(z_init, maps);
  if (maps.latent_map.timestep != z_init.timestep) {
    throw ContractError("rendered latent map and view latent are at different steps");
  }
  ViewOptimization out{z_init, {}, DenoiseOneStep(z_init, den, sched).values};
  for (int k = 0; k < cfg.m_iters; ++k) {
    Field grad(z_init.height(), z_init.width(), z_init.channels(), 0.0);
    const LossTerms terms =
        TotalLoss(out.latent, z_init, out.init_prediction, maps, den, sched, cfg, &grad);
    if (!std::isfinite(terms.total)) {
      throw NumericalFailure("latent optimization loss is not finite", k);
    }
    out.trace.push_back(terms);
    for (std::size_t i = 0; i < grad.size(); ++i) out.latent.values[i] -= cfg.sigma * grad[i];
  }
  return out;
}

ViewEditResult EditView(const Image& image, const AttributedPointCloud& cloud,
                        const CameraView& cam, const Denoiser& den, const Decoder& decoder,
                        const Schedule& sched, const MVOptConfig& cfg) {
  if (image.height() != cam.height || image.width() != cam.width) {
    throw ContractError("image does not match its camera");
  }
  ViewEditResult result;
  result.view_id = cam.view_id;
  result.inverted_latent = DdimInvert(decoder.Encode(image), den, sched, sched.t_r);
  result.round_trip_image = decoder.Decode(DdimDenoise(result.inverted_latent, den, sched, 0));
  result.maps = RenderLatentMap(cloud, cam, decoder.stride());
  result.zero_coverage = result.maps.CoveredCount() == 0;
  if (result.zero_coverage) {
    result.optimized_latent = result.inverted_latent;
    result.clean_latent = DdimDenoise(result.inverted_latent, den, sched, 0);
    result.edited_image = result.round_trip_image;
    return result;
  }
  ViewOptimization opt = OptimizeViewLatent(result.inverted_latent, result.maps, den, sched, cfg);
  result.optimized_latent = std::move(opt.latent);
  result.loss_trace = std::move(opt.trace);
  result.clean_latent = DdimDenoise(result.optimized_latent, den, sched, 0);
  result.edited_image = decoder.Decode(result.clean_latent);
  return result;
}

}  // namespace dragscene
