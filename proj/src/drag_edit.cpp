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

#include "dragscene/drag_edit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dragscene/errors.hpp"
#include "dragscene/kernels.hpp"
#include "dragscene/latent_field.hpp"

namespace dragscene {

namespace {

bool Inside(const Vec2& p, int height, int width) {
  return p.x() >= 0.0 && p.y() >= 0.0 && p.x() <= width - 1 && p.y() <= height - 1;
}

Vec2 Clamp(const Vec2& p, int height, int width, bool* clamped) {
  const Vec2 q(std::clamp(p.x(), 0.0, static_cast<double>(width - 1)),
               std::clamp(p.y(), 0.0, static_cast<double>(height - 1)));
  if (clamped != nullptr && q != p) *clamped = true;
  return q;
}

double L1Distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
  return d;
}

bool AllReached(const std::vector<Vec2>& handles, const std::vector<Vec2>& targets) {
  for (std::size_t j = 0; j < handles.size(); ++j) {
    if ((handles[j] - targets[j]).norm() > 1.0) return false;
  }
  return true;
}

}  // namespace

void EditSpec::Validate(int height, int width) const {
  if (handles.empty() || handles.size() != targets.size()) {
    throw InvalidInput("edit spec needs the same non-zero number of handles and targets");
  }
  for (std::size_t j = 0; j < handles.size(); ++j) {
    if (!Inside(handles[j], height, width) || !Inside(targets[j], height, width)) {
      throw InvalidInput("drag point " + std::to_string(j) + " lies outside the image");
    }
  }
  if (mask.height() != height || mask.width() != width) {
    throw InvalidInput("edit mask must match the reference image size");
  }
  if (std::none_of(mask.data().begin(), mask.data().end(), [](double v) { return v > 0.0; })) {
    throw InvalidInput("edit mask is empty");
  }
}

bool EditSpec::IsNoOp() const {
  for (std::size_t j = 0; j < handles.size(); ++j) {
    if (handles[j] != targets[j]) return false;
  }
  return true;
}

double MotionSupervisionLoss(const Field& features, const std::vector<Vec2>& handles,
                             const std::vector<Vec2>& targets, Field* feature_grad,
                             bool* clamped) {
  const int channels = features.channels();
  std::vector<double> here(static_cast<std::size_t>(channels));
  std::vector<double> ahead(static_cast<std::size_t>(channels));
  std::vector<double> sign(static_cast<std::size_t>(channels));
  double loss = 0.0;
  for (std::size_t j = 0; j < handles.size(); ++j) {
    const Vec2 diff = targets[j] - handles[j];
    const double dist = diff.norm();
    const Vec2 step = dist > 0.0 ? Vec2(diff / dist) : Vec2(Vec2::Zero());
    const Vec2 next = Clamp(handles[j] + step, features.height(), features.width(), clamped);
    SampleBilinear(features, handles[j].x(), handles[j].y(), here);
    SampleBilinear(features, next.x(), next.y(), ahead);
    for (int ch = 0; ch < channels; ++ch) {
      const double d = ahead[ch] - here[ch];
      loss += std::abs(d);
      sign[ch] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    if (feature_grad != nullptr) ScatterBilinear(feature_grad, next.x(), next.y(), sign);
  }
  return loss;
}

Vec2 TrackPoint(const Field& features, const Vec2& handle, std::span<const double> reference,
                int radius) {
  std::vector<double> sample(static_cast<std::size_t>(features.channels()));
  Vec2 best = handle;
  double best_dist = std::numeric_limits<double>::infinity();
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const Vec2 q = handle + Vec2(dx, dy);
      if (!Inside(q, features.height(), features.width())) continue;
      SampleBilinear(features, q.x(), q.y(), sample);
      const double d = L1Distance(sample, reference);
      if (d < best_dist) {
        best_dist = d;
        best = q;
      }
    }
  }
  return best;
}

DragResult DragEdit(const Image& image, const EditSpec& spec, const Denoiser& den,
                    const Decoder& decoder, const Schedule& sched, const DragConfig& cfg) {
  spec.Validate(image.height(), image.width());
  if (cfg.m < 0 || cfg.r_track < 0 || !(cfg.lr >= 0.0) || !(cfg.beta >= 0.0)) {
    throw ConfigError("invalid drag configuration");
  }
  const LatentGrid clean = decoder.Encode(image);
  const int stride = clean.stride;
  const LatentGrid z_init = DdimInvert(clean, den, sched, sched.t_e);
  LatentGrid z = z_init;
  const int t = sched.t_e;
  const int channels = z.channels();

  DragResult result;
  std::vector<Vec2> handles;
  std::vector<Vec2> targets;
  for (std::size_t j = 0; j < spec.handles.size(); ++j) {
    handles.push_back(Clamp(spec.handles[j] / stride, z.height(), z.width(), &result.clamped));
    targets.push_back(Clamp(spec.targets[j] / stride, z.height(), z.width(), &result.clamped));
  }
  const MaskGrid mask = DownsampleMask(spec.mask, stride);
  std::vector<double> keep(mask.size());
  for (std::size_t p = 0; p < mask.size(); ++p) keep[p] = cfg.beta * (1.0 - mask[p]);

  const Field initial_features = den.FeatureMap(z_init.values, t);
  std::vector<std::vector<double>> handle_features;
  for (const Vec2& h : handles) {
    std::vector<double> f(static_cast<std::size_t>(channels));
    SampleBilinear(initial_features, h.x(), h.y(), f);
    handle_features.push_back(std::move(f));
  }

  for (int k = 0; k < cfg.m; ++k) {
    if (AllReached(handles, targets)) break;
    const Field features = den.FeatureMap(z.values, t);
    Field feature_grad(features.height(), features.width(), channels, 0.0);
    double loss = MotionSupervisionLoss(features, handles, targets, &feature_grad,
                                        &result.clamped);
    std::vector<double> keep_grad(z.values.size(), 0.0);
    loss += kernels::parallel::MaskedL1(z.values.data(), z_init.values.data(), keep, channels,
                                        keep_grad);
    if (!std::isfinite(loss)) throw NumericalFailure("drag loss is not finite", k);
    result.loss_trace.push_back(loss);
    Field grad = den.FeatureVjp(z.values, t, feature_grad);
    for (std::size_t i = 0; i < grad.size(); ++i) {
      z.values[i] -= cfg.lr * (grad[i] + keep_grad[i]);
    }
    if (!z.values.AllFinite()) throw NumericalFailure("drag latent is not finite", k);
    const Field tracked = den.FeatureMap(z.values, t);
    for (std::size_t j = 0; j < handles.size(); ++j) {
      handles[j] = TrackPoint(tracked, handles[j], handle_features[j], cfg.r_track);
    }
    ++result.steps;
  }

  result.edited_latent_te = z;
  const LatentGrid z0 = DdimDenoise(z, den, sched, 0);
  result.edited_image = decoder.Decode(z0);
  result.reference_latent_tr = ReinvertEdited(result.edited_image, den, decoder, sched);
  for (const Vec2& h : handles) result.tracked_handles.push_back(h * stride);
  return result;
}

LatentGrid ReinvertEdited(const Image& edited_image, const Denoiser& den,
                          const Decoder& decoder, const Schedule& sched) {
  return DdimInvert(decoder.Encode(edited_image), den, sched, sched.t_r);
}

}  // namespace dragscene
