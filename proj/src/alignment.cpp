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

#include "dragscene/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <Eigen/Dense>

#include "dragscene/errors.hpp"
#include "dragscene/geometric_median.hpp"
#include "dragscene/kernels.hpp"

namespace dragscene {

namespace {

using Jacobian = Eigen::Matrix<double, 3, 7>;

std::string PairName(int src, int tgt) {
  return "(" + std::to_string(src) + ", " + std::to_string(tgt) + ")";
}

// World-frame predictions of view m through every frame n of the state.
struct ViewTerms {
  std::vector<Grid<Vec3>> world;       // W^{n,m}
  std::vector<Grid<Vec3>> scaled;      // Y^{n,m} = Xbar^{n,m} / z_n
  std::vector<const PairwisePrediction*> preds;
};

std::vector<ViewTerms> BuildTerms(const AlignmentState& state, const PredictionSet& preds) {
  const int views = state.size();
  std::vector<ViewTerms> terms(static_cast<std::size_t>(views));
  for (int m = 0; m < views; ++m) {
    ViewTerms& vt = terms[m];
    const int src = state.poses[m].view_id;
    for (int n = 0; n < views; ++n) {
      const CameraView& cam = state.poses[n];
      const PairwisePrediction& p = preds.Get(src, cam.view_id);
      if (p.pointmap.height() != state.fused[m].height() ||
          p.pointmap.width() != state.fused[m].width()) {
        throw ContractError("prediction " + PairName(src, cam.view_id) +
                            " does not match the fused pointmap shape");
      }
      const Mat3 rt = cam.rotation().transpose();
      const Vec3 t = cam.translation();
      const double inv_scale = 1.0 / state.scales[n];
      Grid<Vec3> world(p.pointmap.height(), p.pointmap.width(), Vec3::Zero());
      Grid<Vec3> scaled(p.pointmap.height(), p.pointmap.width(), Vec3::Zero());
      for (std::size_t i = 0; i < world.size(); ++i) {
        if (!p.pointmap.valid[i]) continue;
        scaled[i] = p.pointmap.points[i] * inv_scale;
        world[i] = rt * (scaled[i] - t);
      }
      vt.world.push_back(std::move(world));
      vt.scaled.push_back(std::move(scaled));
      vt.preds.push_back(&p);
    }
  }
  return terms;
}

void CheckInputs(const AlignmentState& state, std::span<const MaskGrid> masks) {
  if (state.size() < 1) throw ContractError("alignment state has no views");
  if (masks.size() != static_cast<std::size_t>(state.size())) {
    throw ContractError("need one warped mask per aligned view");
  }
  if (state.fused.size() != state.poses.size() || state.scales.size() != state.poses.size()) {
    throw ContractError("alignment state arrays disagree in length");
  }
  for (int m = 0; m < state.size(); ++m) {
    if (masks[m].height() != state.fused[m].height() ||
        masks[m].width() != state.fused[m].width()) {
      throw ContractError("warped mask " + std::to_string(m) + " has the wrong shape");
    }
    if (!(state.scales[m] > 0.0)) throw ContractError("scales must be positive");
  }
}

kernels::RegressionViewInput MakeInput(const AlignmentState& state, const ViewTerms& vt,
                                       const MaskGrid& mask, int m, double epsilon) {
  kernels::RegressionViewInput in;
  in.fused = state.fused[m].points.data();
  in.fused_valid = state.fused[m].valid.data();
  in.mask = mask.data();
  for (std::size_t n = 0; n < vt.world.size(); ++n) {
    in.world_pred.push_back(vt.world[n].data());
    in.pred_valid.push_back(vt.preds[n]->pointmap.valid.data());
    in.confidence.push_back(vt.preds[n]->confidence.data());
  }
  in.width = state.fused[m].width();
  in.reference_index = 0;
  in.inv_normalizer = 1.0 / state.normalizer;
  in.epsilon = epsilon;
  return in;
}

double LossFromTerms(const AlignmentState& state, const std::vector<ViewTerms>& terms,
                     std::span<const MaskGrid> masks, double epsilon) {
  double loss = 0.0;
  for (int m = 0; m < state.size(); ++m) {
    loss += kernels::parallel::RegressionView(MakeInput(state, terms[m], masks[m], m, epsilon),
                                              {});
  }
  return loss;
}

Jacobian WorldJacobian(const Mat3& rt, const Vec3& y) {
  Jacobian j;
  j.block<3, 3>(0, 0) = rt * Skew(y);
  j.block<3, 3>(0, 3) = -rt;
  j.col(6) = -rt * y;
  return j;
}

// Term weight of frame n at a pixel with mask value `mask`.
double TermWeight(int n, int frames, double mask, double confidence) {
  double w = (1.0 - mask) / frames;
  if (n == 0) w += mask;
  return w * confidence;
}

struct ReducedSystem {
  Eigen::MatrixXd h;
  Eigen::VectorXd b;
};

// Quadratic model of the reweighted problem with the fused points eliminated.
// Unknowns are the increments of views 1..N-1.
ReducedSystem BuildReducedSystem(const AlignmentState& state,
                                 const std::vector<ViewTerms>& terms,
                                 std::span<const MaskGrid> masks, double epsilon) {
  const int views = state.size();
  const int dim = 7 * (views - 1);
  std::vector<std::pair<int, int>> rows;
  for (int m = 0; m < views; ++m) {
    for (int r = 0; r < state.fused[m].height(); ++r) rows.emplace_back(m, r);
  }
  std::vector<Eigen::MatrixXd> part_h(rows.size());
  std::vector<Eigen::VectorXd> part_b(rows.size());
  const double inv_norm = 1.0 / state.normalizer;
  std::vector<Mat3> rts(static_cast<std::size_t>(views));
  for (int n = 0; n < views; ++n) rts[n] = state.poses[n].rotation().transpose();

#pragma omp parallel for schedule(dynamic)
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(rows.size()); ++k) {
    const auto [m, r] = rows[static_cast<std::size_t>(k)];
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(dim);
    const Pointmap& fused = state.fused[m];
    const ViewTerms& vt = terms[m];
    std::vector<double> w(static_cast<std::size_t>(views));
    std::vector<Vec3> c(static_cast<std::size_t>(views));
    std::vector<Jacobian> jac(static_cast<std::size_t>(views));
    for (int col = 0; col < fused.width(); ++col) {
      const std::size_t i = fused.points.Index(r, col);
      if (!fused.valid[i]) continue;
      double sum_w = 0.0;
      Vec3 mean_c = Vec3::Zero();
      for (int n = 0; n < views; ++n) {
        w[n] = 0.0;
        if (!vt.preds[n]->pointmap.valid[i]) continue;
        const double a = TermWeight(n, views, masks[m][i], vt.preds[n]->confidence[i]);
        if (a == 0.0) continue;
        c[n] = fused.points[i] - vt.world[n][i];
        const double d = std::sqrt((c[n] * inv_norm).squaredNorm() + epsilon * epsilon);
        w[n] = a / d;
        sum_w += w[n];
        mean_c += w[n] * c[n];
        if (n > 0) jac[n] = WorldJacobian(rts[n], vt.scaled[n][i]);
      }
      if (sum_w == 0.0) continue;
      mean_c /= sum_w;
      for (int n = 1; n < views; ++n) {
        if (w[n] == 0.0) continue;
        const int bn = 7 * (n - 1);
        b.segment<7>(bn) += w[n] * jac[n].transpose() * (c[n] - mean_c);
        h.block<7, 7>(bn, bn) += w[n] * jac[n].transpose() * jac[n];
        for (int q = 1; q < views; ++q) {
          if (w[q] == 0.0) continue;
          h.block<7, 7>(bn, 7 * (q - 1)) -=
              (w[n] * w[q] / sum_w) * jac[n].transpose() * jac[q];
        }
      }
    }
    part_h[static_cast<std::size_t>(k)] = std::move(h);
    part_b[static_cast<std::size_t>(k)] = std::move(b);
  }
  ReducedSystem sys{Eigen::MatrixXd::Zero(dim, dim), Eigen::VectorXd::Zero(dim)};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sys.h += part_h[k];
    sys.b += part_b[k];
  }
  return sys;
}

// Reweighted mean of the world predictions: the fused-point update of the
// same reweighted problem at fixed poses.
void ReweightFused(AlignmentState* state, const std::vector<ViewTerms>& new_terms,
                   const std::vector<ViewTerms>& old_terms, std::span<const MaskGrid> masks,
                   double epsilon) {
  const int views = state->size();
  const double inv_norm = 1.0 / state->normalizer;
  for (int m = 0; m < views; ++m) {
    Pointmap& fused = state->fused[m];
    const auto pixels = static_cast<std::int64_t>(fused.points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < pixels; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      if (!fused.valid[i]) continue;
      double sum_w = 0.0;
      Vec3 acc = Vec3::Zero();
      for (int n = 0; n < views; ++n) {
        const PairwisePrediction& p = *old_terms[m].preds[n];
        if (!p.pointmap.valid[i]) continue;
        const double a = TermWeight(n, views, masks[m][i], p.confidence[i]);
        if (a == 0.0) continue;
        const Vec3 c = fused.points[i] - old_terms[m].world[n][i];
        const double w = a / std::sqrt((c * inv_norm).squaredNorm() + epsilon * epsilon);
        sum_w += w;
        acc += w * new_terms[m].world[n][i];
      }
      if (sum_w > 0.0) fused.points[i] = acc / sum_w;
    }
  }
}

// Exact weighted geometric median of the world predictions per pixel.
void MedianFused(AlignmentState* state, const std::vector<ViewTerms>& terms,
                 std::span<const MaskGrid> masks) {
  const int views = state->size();
  for (int m = 0; m < views; ++m) {
    Pointmap& fused = state->fused[m];
    const auto pixels = static_cast<std::int64_t>(fused.points.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < pixels; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      if (!fused.valid[i]) continue;
      std::vector<Vec3> pts;
      std::vector<double> weights;
      for (int n = 0; n < views; ++n) {
        const PairwisePrediction& p = *terms[m].preds[n];
        if (!p.pointmap.valid[i]) continue;
        pts.push_back(terms[m].world[n][i]);
        weights.push_back(TermWeight(n, views, masks[m][i], p.confidence[i]));
      }
      fused.points[i] = WeightedGeometricMedian(pts, weights, fused.points[i]);
    }
  }
}

void CheckFiniteLoss(double loss, int iter) {
  if (!std::isfinite(loss)) {
    throw OptimizationFailure("alignment loss is not finite", iter);
  }
}

AlignResult OptimizeIrls(AlignmentState state, const PredictionSet& preds,
                         std::span<const MaskGrid> masks, const AlignConfig& config) {
  AlignResult result;
  const double eps = kRegressionEpsilon;
  std::vector<ViewTerms> terms = BuildTerms(state, preds);
  double loss = LossFromTerms(state, terms, masks, eps);
  CheckFiniteLoss(loss, 0);
  result.initial_loss = loss;
  const int views = state.size();
  double damping = 1e-6;
  int it = 0;
  for (; it < config.iters && loss > 0.0; ++it) {
    bool accepted = false;
    if (views > 1 && !config.freeze_poses) {
      const ReducedSystem sys = BuildReducedSystem(state, terms, masks, eps);
      const Eigen::VectorXd diag = sys.h.diagonal().cwiseAbs();
      const double floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
      for (int attempt = 0; attempt < 12 && !accepted; ++attempt) {
        Eigen::MatrixXd damped = sys.h;
        for (Eigen::Index k = 0; k < damped.rows(); ++k) {
          damped(k, k) += damping * diag[k] + floor;
        }
        const Eigen::VectorXd delta = damped.ldlt().solve(sys.b);
        if (!delta.allFinite()) {
          damping *= 10.0;
          continue;
        }
        AlignmentState trial = state;
        for (int n = 1; n < views; ++n) {
          trial = ApplyPoseDelta(trial, n, delta.segment<7>(7 * (n - 1)));
        }
        std::vector<ViewTerms> trial_terms = BuildTerms(trial, preds);
        ReweightFused(&trial, trial_terms, terms, masks, eps);
        const double trial_loss = LossFromTerms(trial, trial_terms, masks, eps);
        CheckFiniteLoss(trial_loss, it + 1);
        if (trial_loss < loss) {
          state = std::move(trial);
          terms = std::move(trial_terms);
          loss = trial_loss;
          accepted = true;
          damping = std::max(damping / 3.0, 1e-9);
        } else {
          damping *= 10.0;
        }
      }
    }
    // Fused-only step at fixed poses.
    {
      AlignmentState trial = state;
      MedianFused(&trial, terms, masks);
      const double trial_loss = LossFromTerms(trial, terms, masks, eps);
      CheckFiniteLoss(trial_loss, it + 1);
      if (trial_loss < loss) {
        state = std::move(trial);
        loss = trial_loss;
        accepted = true;
      }
    }
    result.loss_trace.push_back(loss);
    if (!accepted) {
      ++it;
      break;
    }
  }
  result.iterations = it;
  result.final_loss = loss;
  result.state = std::move(state);
  return result;
}

AlignResult OptimizeGradient(AlignmentState state, const PredictionSet& preds,
                             std::span<const MaskGrid> masks, const AlignConfig& config) {
  AlignResult result;
  RegressionGradient grad = RegressionLossGradient(state, preds, masks);
  CheckFiniteLoss(grad.loss, 0);
  result.initial_loss = grad.loss;
  AlignmentState best = state;
  double best_loss = grad.loss;
  for (int it = 0; it < config.iters; ++it) {
    for (int m = 0; m < state.size(); ++m) {
      Pointmap& fused = state.fused[m];
      for (std::size_t i = 0; i < fused.points.size(); ++i) {
        if (fused.valid[i]) fused.points[i] -= config.lr * grad.fused[m][i];
      }
    }
    if (!config.freeze_poses) {
      for (int n = 1; n < state.size(); ++n) {
        state = ApplyPoseDelta(state, n, -config.lr * grad.pose[n]);
      }
    }
    grad = RegressionLossGradient(state, preds, masks);
    CheckFiniteLoss(grad.loss, it + 1);
    result.loss_trace.push_back(grad.loss);
    if (grad.loss <= best_loss) {
      best_loss = grad.loss;
      best = state;
    }
  }
  result.iterations = config.iters;
  result.final_loss = best_loss;
  result.state = std::move(best);
  return result;
}

}  // namespace

void PairwisePrediction::Validate() const {
  if (pointmap.frame != tgt_view) {
    throw ContractError("prediction " + PairName(src_view, tgt_view) +
                        " is not expressed in the target frame");
  }
  if (confidence.height() != pointmap.height() || confidence.width() != pointmap.width()) {
    throw ContractError("confidence shape differs from the pointmap");
  }
  for (double c : confidence.data()) {
    if (!std::isfinite(c) || c < 0.0) {
      throw InvalidInput("confidence must be finite and non-negative");
    }
  }
}

void PredictionSet::Add(PairwisePrediction prediction) {
  prediction.Validate();
  const std::pair<int, int> key{prediction.src_view, prediction.tgt_view};
  pairs_.insert_or_assign(key, std::move(prediction));
}

bool PredictionSet::Contains(int src_view, int tgt_view) const {
  return pairs_.count({src_view, tgt_view}) > 0;
}

const PairwisePrediction& PredictionSet::Get(int src_view, int tgt_view) const {
  const auto it = pairs_.find({src_view, tgt_view});
  if (it == pairs_.end()) {
    throw ContractError("missing pair prediction " + PairName(src_view, tgt_view));
  }
  return it->second;
}

PredictionSet CollectPredictions(const PointmapProvider& provider,
                                 std::span<const int> view_ids) {
  PredictionSet set;
  for (int src : view_ids) {
    for (int tgt : view_ids) set.Add(provider.Predict(src, tgt));
  }
  return set;
}

int AlignmentState::IndexOf(int view_id) const {
  for (int k = 0; k < size(); ++k) {
    if (poses[k].view_id == view_id) return k;
  }
  throw ContractError("view " + std::to_string(view_id) + " is not aligned");
}

AlignmentState ApplyPoseDelta(const AlignmentState& state, int index,
                              const PoseDelta& delta) {
  AlignmentState out = state;
  CameraView& cam = out.poses[index];
  cam.pose = ComposeIncrement(cam.pose, delta.head<3>(), delta.segment<3>(3));
  out.scales[index] *= std::exp(delta[6]);
  return out;
}

double RegressionLoss(const AlignmentState& state, const PredictionSet& preds,
                      std::span<const MaskGrid> warped_masks, double epsilon) {
  CheckInputs(state, warped_masks);
  return LossFromTerms(state, BuildTerms(state, preds), warped_masks, epsilon);
}

RegressionGradient RegressionLossGradient(const AlignmentState& state,
                                          const PredictionSet& preds,
                                          std::span<const MaskGrid> warped_masks,
                                          double epsilon) {
  CheckInputs(state, warped_masks);
  const std::vector<ViewTerms> terms = BuildTerms(state, preds);
  const int views = state.size();
  RegressionGradient out;
  out.pose.assign(static_cast<std::size_t>(views), PoseDelta::Zero());
  for (int m = 0; m < views; ++m) {
    const Pointmap& fused = state.fused[m];
    const std::size_t pixels = fused.points.size();
    std::vector<Vec3> term_grad(pixels * static_cast<std::size_t>(views), Vec3::Zero());
    out.loss += kernels::parallel::RegressionView(
        MakeInput(state, terms[m], warped_masks[m], m, epsilon), term_grad);
    Grid<Vec3> g(fused.height(), fused.width(), Vec3::Zero());
    for (int n = 0; n < views; ++n) {
      const Mat3 rot = state.poses[n].rotation();
      PoseDelta acc = PoseDelta::Zero();
      for (std::size_t i = 0; i < pixels; ++i) {
        const Vec3& tg = term_grad[static_cast<std::size_t>(n) * pixels + i];
        g[i] += tg;
        if (tg.isZero(0.0)) continue;
        const Vec3 rg = rot * tg;
        const Vec3& y = terms[m].scaled[n][i];
        acc.head<3>() += y.cross(rg);
        acc.segment<3>(3) += rg;
        acc[6] += y.dot(rg);
      }
      out.pose[n] += acc;
    }
    out.fused.push_back(std::move(g));
  }
  return out;
}

AlignmentState InitialState(std::span<const CameraView> views, const PredictionSet& preds) {
  if (views.empty()) throw ContractError("alignment needs at least one view");
  AlignmentState state;
  const Mat4 ref_inv = RigidInverse(views[0].pose);
  const int ref_id = views[0].view_id;
  for (std::size_t k = 0; k < views.size(); ++k) {
    CameraView cam = views[k];
    cam.Validate();
    cam.pose = k == 0 ? Mat4::Identity() : Mat4(views[k].pose * ref_inv);
    state.poses.push_back(cam);
    state.scales.push_back(1.0);
  }
  const double norm = preds.Get(ref_id, ref_id).pointmap.MeanNorm();
  state.normalizer = norm > 0.0 ? norm : 1.0;
  for (const CameraView& cam : state.poses) {
    const Pointmap& self = preds.Get(cam.view_id, cam.view_id).pointmap;
    Pointmap fused(ref_id, self.height(), self.width());
    const Mat3 rt = cam.rotation().transpose();
    const Vec3 t = cam.translation();
    for (std::size_t i = 0; i < fused.points.size(); ++i) {
      if (!self.valid[i]) continue;
      fused.points[i] = rt * (self.points[i] - t);
      fused.valid[i] = 1;
    }
    state.fused.push_back(std::move(fused));
  }
  return state;
}

std::vector<MaskGrid> WarpEditMask(const AlignmentState& state, const PredictionSet& preds,
                                   const MaskGrid& edit_mask) {
  const int ref_id = state.reference_view();
  const Pointmap& ref_points = preds.Get(ref_id, ref_id).pointmap;
  if (edit_mask.height() != ref_points.height() || edit_mask.width() != ref_points.width()) {
    throw ContractError("edit mask shape differs from the reference pointmap");
  }
  std::vector<MaskGrid> out;
  out.push_back(edit_mask);
  for (int m = 1; m < state.size(); ++m) {
    out.push_back(WarpMask(edit_mask, ref_points, state.poses[0], state.poses[m]));
  }
  return out;
}

AlignResult Optimize(AlignmentState state, const PredictionSet& preds,
                     std::span<const MaskGrid> warped_masks, const AlignConfig& config) {
  CheckInputs(state, warped_masks);
  if (config.iters < 0) throw ContractError("iters must be >= 0");
  if (config.method == AlignMethod::kGradient) {
    return OptimizeGradient(std::move(state), preds, warped_masks, config);
  }
  return OptimizeIrls(std::move(state), preds, warped_masks, config);
}

AlignResult GlobalAlign(std::span<const CameraView> views, const PointmapProvider& provider,
                        const MaskGrid& edit_mask, const AlignConfig& config) {
  if (views.size() < 2) throw ContractError("alignment needs the reference and >= 1 view");
  std::vector<int> ids;
  for (const CameraView& v : views) ids.push_back(v.view_id);
  const PredictionSet preds = CollectPredictions(provider, ids);
  AlignmentState state = InitialState(views, preds);
  const std::vector<MaskGrid> masks = WarpEditMask(state, preds, edit_mask);
  return Optimize(std::move(state), preds, masks, config);
}

std::vector<int> SelectAuxViews(std::span<const int> all_ids, int reference_view,
                                int count) {
  if (count < 1) throw ContractError("alignment needs at least one auxiliary view");
  std::vector<int> others;
  for (int id : all_ids) {
    if (id != reference_view) others.push_back(id);
  }
  if (static_cast<int>(others.size()) <= count) return others;
  std::vector<int> picked;
  const auto total = static_cast<double>(others.size());
  for (int k = 0; k < count; ++k) {
    const auto idx = static_cast<std::size_t>(std::floor((k + 0.5) * total / count));
    picked.push_back(others[idx]);
  }
  return picked;
}

}  // namespace dragscene
