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

#include "dragscene/diffusion.hpp"

#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "dragscene/kernels.hpp"

namespace dragscene {

namespace {

void CheckFinite(const Field& z, int step) {
  if (!z.AllFinite()) throw NumericalFailure("non-finite latent in DDIM", step);
}

Field Scaled(const Field& f, double a) {
  Field out = f;
  for (double& v : out.data()) v *= a;
  return out;
}

}  // namespace

double Schedule::AlphaBarAt(int t) const {
  if (t < 0 || t > t_total) {
    throw ContractError("timestep " + std::to_string(t) + " outside [0, " +
                        std::to_string(t_total) + "]");
  }
  return t == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(t - 1)];
}

int StepForStrength(double eta, int t_total) {
  return static_cast<int>(std::lround(eta * t_total));
}

Schedule MakeSchedule(int t_total, double beta_min, double beta_max, double eta_e,
                      double eta_r) {
  if (t_total < 1) throw ContractError("t_total must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0)) {
    throw ContractError("beta range must satisfy 0 < beta_min <= beta_max < 1");
  }
  Schedule s;
  s.t_total = t_total;
  s.alpha_bar.resize(static_cast<std::size_t>(t_total));
  double prod = 1.0;
  for (int u = 0; u < t_total; ++u) {
    const double frac = t_total == 1 ? 0.0 : static_cast<double>(u) / (t_total - 1);
    const double beta = beta_min + (beta_max - beta_min) * frac;
    prod *= 1.0 - beta;
    s.alpha_bar[static_cast<std::size_t>(u)] = prod;
  }
  s.t_e = std::clamp(StepForStrength(eta_e, t_total), 1, t_total);
  s.t_r = std::clamp(StepForStrength(eta_r, t_total), 1, t_total);
  return s;
}

Field ZeroDenoiser::Predict(const Field& z, int) const {
  return Field(z.height(), z.width(), z.channels(), 0.0);
}
Field ZeroDenoiser::NoiseVjp(const Field& z, int, const Field&) const {
  return Field(z.height(), z.width(), z.channels(), 0.0);
}
Field ZeroDenoiser::FeatureMap(const Field& z, int) const { return z; }
Field ZeroDenoiser::FeatureVjp(const Field&, int, const Field& cotangent) const {
  return cotangent;
}

Field ScalarLinearDenoiser::Predict(const Field& z, int) const { return Scaled(z, a_); }
Field ScalarLinearDenoiser::NoiseVjp(const Field&, int, const Field& cotangent) const {
  return Scaled(cotangent, a_);
}
Field ScalarLinearDenoiser::FeatureMap(const Field& z, int) const { return z; }
Field ScalarLinearDenoiser::FeatureVjp(const Field&, int, const Field& cotangent) const {
  return cotangent;
}

Field SmoothingDenoiser::Predict(const Field& z, int) const {
  Field out = kernels::parallel::BoxBlur(z);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = z[i] - out[i];
  return out;
}
Field SmoothingDenoiser::NoiseVjp(const Field&, int, const Field& cotangent) const {
  Field out = kernels::parallel::BoxBlurAdjoint(cotangent);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cotangent[i] - out[i];
  return out;
}
Field SmoothingDenoiser::FeatureMap(const Field& z, int) const {
  return kernels::parallel::BoxBlur(z);
}
Field SmoothingDenoiser::FeatureVjp(const Field&, int, const Field& cotangent) const {
  return kernels::parallel::BoxBlurAdjoint(cotangent);
}

Image IdentityDecoder::Decode(const LatentGrid& z) const {
  if (z.channels() != 3 || z.stride != 1) {
    throw ConfigError("identity decoder needs 3 channels at stride 1");
  }
  return z.values;
}

LatentGrid IdentityDecoder::Encode(const Image& image) const {
  if (image.channels() != 3) throw ContractError("images must have 3 channels");
  return {image, 0, 1};
}

LinearDecoder::LinearDecoder(int latent_channels, int stride, std::uint64_t seed)
    : channels_(latent_channels), stride_(stride) {
  if (latent_channels < 1 || stride < 1) {
    throw ConfigError("linear decoder needs >= 1 channel and stride >= 1");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  mix_ = Eigen::MatrixXd::Zero(3, latent_channels);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < latent_channels; ++c) {
      mix_(r, c) = (r == c ? 1.0 : 0.0) + 0.25 * normal(rng);
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(mix_);
  if (latent_channels <= 3 && qr.rank() == latent_channels) {
    pinv_ = (mix_.transpose() * mix_).ldlt().solve(mix_.transpose());
  }
}

Image LinearDecoder::Decode(const LatentGrid& z) const {
  if (z.channels() != channels_) throw ContractError("latent channel mismatch");
  const int s = stride_;
  Image out(z.height() * s, z.width() * s, 3);
  for (int r = 0; r < z.height(); ++r) {
    for (int c = 0; c < z.width(); ++c) {
      const Eigen::Map<const Eigen::VectorXd> lat(z.values.pixel(r, c).data(), channels_);
      const Eigen::Vector3d rgb = mix_ * lat;
      for (int dr = 0; dr < s; ++dr) {
        for (int dc = 0; dc < s; ++dc) {
          for (int k = 0; k < 3; ++k) out(r * s + dr, c * s + dc, k) = rgb[k];
        }
      }
    }
  }
  return out;
}

LatentGrid LinearDecoder::Encode(const Image& image) const {
  if (pinv_.size() == 0) {
    throw ConfigError("linear decoder with " + std::to_string(channels_) +
                      " channels is not invertible");
  }
  const int s = stride_;
  if (image.channels() != 3 || image.height() % s != 0 || image.width() % s != 0) {
    throw ContractError("image shape not decodable at stride " + std::to_string(s));
  }
  LatentGrid z{Field(image.height() / s, image.width() / s, channels_), 0, s};
  const double inv_block = 1.0 / (s * s);
  for (int r = 0; r < z.height(); ++r) {
    for (int c = 0; c < z.width(); ++c) {
      Eigen::Vector3d mean = Eigen::Vector3d::Zero();
      for (int dr = 0; dr < s; ++dr) {
        for (int dc = 0; dc < s; ++dc) {
          for (int k = 0; k < 3; ++k) mean[k] += image(r * s + dr, c * s + dc, k);
        }
      }
      mean *= inv_block;
      const Eigen::VectorXd lat = pinv_ * mean;
      for (int k = 0; k < channels_; ++k) z.values(r, c, k) = lat[k];
    }
  }
  return z;
}

Field DdimTransition(const Field& z, const Field& eps, double ab_from, double ab_to) {
  const double s_from = std::sqrt(ab_from);
  const double q_from = std::sqrt(1.0 - ab_from);
  const double s_to = std::sqrt(ab_to);
  const double q_to = std::sqrt(1.0 - ab_to);
  Field out(z.height(), z.width(), z.channels());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double x0 = (z[i] - q_from * eps[i]) / s_from;
    out[i] = s_to * x0 + q_to * eps[i];
  }
  return out;
}

LatentGrid DdimInvert(const LatentGrid& z0, const Denoiser& den, const Schedule& sched,
                      int t_target, const InversionOptions& options) {
  if (z0.timestep != 0) throw ContractError("ddim_invert expects a clean latent");
  if (t_target < 0 || t_target > sched.t_total) {
    throw ContractError("inversion target outside the schedule");
  }
  LatentGrid z = z0;
  for (int t = 0; t < t_target; ++t) {
    const double ab = sched.AlphaBarAt(t);
    const double ab_next = sched.AlphaBarAt(t + 1);
    Field next = DdimTransition(z.values, den.NoisePredict(z.values, t), ab, ab_next);
    CheckFinite(next, t + 1);
    if (options.fixed_point) {
      for (int k = 0; k < options.max_fixed_point_iters; ++k) {
        Field refined =
            DdimTransition(z.values, den.NoisePredict(next, t + 1), ab, ab_next);
        CheckFinite(refined, t + 1);
        double change = 0.0;
        double scale = 1.0;
        for (std::size_t i = 0; i < refined.size(); ++i) {
          change = std::max(change, std::abs(refined[i] - next[i]));
          scale = std::max(scale, std::abs(refined[i]));
        }
        next = std::move(refined);
        if (change <= options.tolerance * scale) break;
      }
    }
    z.values = std::move(next);
    z.timestep = t + 1;
  }
  return z;
}

LatentGrid DdimDenoise(const LatentGrid& z, const Denoiser& den, const Schedule& sched,
                       int t_to) {
  if (t_to < 0 || t_to > z.timestep) {
    throw ContractError("ddim_denoise target must lie in [0, current step]");
  }
  LatentGrid out = z;
  for (int t = z.timestep; t > t_to; --t) {
    out.values = DdimTransition(out.values, den.NoisePredict(out.values, t),
                                sched.AlphaBarAt(t), sched.AlphaBarAt(t - 1));
    CheckFinite(out.values, t - 1);
    out.timestep = t - 1;
  }
  return out;
}

LatentGrid DenoiseOneStep(const LatentGrid& z, const Denoiser& den,
                          const Schedule& sched) {
  if (z.timestep < 1) throw ContractError("denoise_one_step needs timestep >= 1");
  return DdimDenoise(z, den, sched, z.timestep - 1);
}

Field DenoiseOneStepVjp(const LatentGrid& z, const Denoiser& den, const Schedule& sched,
                        const Field& cotangent) {
  if (z.timestep < 1) throw ContractError("denoise_one_step needs timestep >= 1");
  const int t = z.timestep;
  const double ab = sched.AlphaBarAt(t);
  const double ab_prev = sched.AlphaBarAt(t - 1);
  // z' = (s'/s) z + (q' - s' q / s) eps(z)
  const double direct = std::sqrt(ab_prev) / std::sqrt(ab);
  const double via_eps =
      std::sqrt(1.0 - ab_prev) - std::sqrt(ab_prev) * std::sqrt(1.0 - ab) / std::sqrt(ab);
  Field out = den.NoiseVjp(z.values, t, cotangent);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = direct * cotangent[i] + via_eps * out[i];
  }
  return out;
}

}  // namespace dragscene
