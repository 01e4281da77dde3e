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

#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dragscene/grid.hpp"

namespace dragscene {

// h x w x c latent tagged with its diffusion step. `stride` is the ratio of
// image resolution to latent resolution.
struct LatentGrid {
  Field values;
  int timestep = 0;
  int stride = 1;

  int height() const { return values.height(); }
  int width() const { return values.width(); }
  int channels() const { return values.channels(); }
};

// Linear-beta schedule. Step t in [0, t_total] has cumulative signal
// AlphaBarAt(t): 1 for the clean step 0 and alpha_bar[t - 1] afterwards.
struct Schedule {
  int t_total = 0;
  std::vector<double> alpha_bar;  // t_total entries, prod_{u<=k} (1 - beta_u)
  int t_e = 0;
  int t_r = 0;

  double AlphaBarAt(int t) const;
};

inline constexpr int kDefaultTotalSteps = 50;
inline constexpr double kDefaultEditStrength = 0.7;      // t_e = 35 of 50
inline constexpr double kDefaultInversionStrength = 0.4; // t_r = 20 of 50

// round(eta * t_total)
int StepForStrength(double eta, int t_total);

Schedule MakeSchedule(int t_total, double beta_min, double beta_max,
                      double eta_e = kDefaultEditStrength,
                      double eta_r = kDefaultInversionStrength);

// Noise predictor contract. Implementations must be deterministic and keep
// the input shape. The Vjp methods return J^T * cotangent with J the Jacobian
// with respect to z.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  Field NoisePredict(const Field& z, int t) const {
    calls_.fetch_add(1, std::memory_order_relaxed);
    return Predict(z, t);
  }
  virtual Field NoiseVjp(const Field& z, int t, const Field& cotangent) const = 0;
  virtual Field FeatureMap(const Field& z, int t) const = 0;
  virtual Field FeatureVjp(const Field& z, int t, const Field& cotangent) const = 0;
  virtual std::string name() const = 0;

  std::int64_t calls() const { return calls_.load(); }

 protected:
  virtual Field Predict(const Field& z, int t) const = 0;

 private:
  mutable std::atomic<std::int64_t> calls_{0};
};

// eps = 0, features = z.
class ZeroDenoiser final : public Denoiser {
 public:
  Field NoiseVjp(const Field& z, int t, const Field& cotangent) const override;
  Field FeatureMap(const Field& z, int t) const override;
  Field FeatureVjp(const Field& z, int t, const Field& cotangent) const override;
  std::string name() const override { return "zero"; }

 protected:
  Field Predict(const Field& z, int t) const override;
};

// eps = a * z, features = z.
class ScalarLinearDenoiser final : public Denoiser {
 public:
  explicit ScalarLinearDenoiser(double a = 0.1) : a_(a) {}
  double a() const { return a_; }
  Field NoiseVjp(const Field& z, int t, const Field& cotangent) const override;
  Field FeatureMap(const Field& z, int t) const override;
  Field FeatureVjp(const Field& z, int t, const Field& cotangent) const override;
  std::string name() const override { return "linear"; }

 protected:
  Field Predict(const Field& z, int t) const override;

 private:
  double a_;
};

// eps = z - blur(z) with a 3x3 box blur; features = blur(z).
class SmoothingDenoiser final : public Denoiser {
 public:
  Field NoiseVjp(const Field& z, int t, const Field& cotangent) const override;
  Field FeatureMap(const Field& z, int t) const override;
  Field FeatureVjp(const Field& z, int t, const Field& cotangent) const override;
  std::string name() const override { return "smoothing"; }

 protected:
  Field Predict(const Field& z, int t) const override;
};

// Latent <-> image map. Encode is the least-squares inverse of Decode and
// throws ConfigError when Decode is not injective.
class Decoder {
 public:
  virtual ~Decoder() = default;
  virtual Image Decode(const LatentGrid& z) const = 0;
  virtual LatentGrid Encode(const Image& image) const = 0;
  virtual int latent_channels() const = 0;
  virtual int stride() const = 0;
};

class IdentityDecoder final : public Decoder {
 public:
  Image Decode(const LatentGrid& z) const override;
  LatentGrid Encode(const Image& image) const override;
  int latent_channels() const override { return 3; }
  int stride() const override { return 1; }
};

// Nearest upsampling by `stride` followed by a seeded 3 x c channel mix.
class LinearDecoder final : public Decoder {
 public:
  LinearDecoder(int latent_channels, int stride, std::uint64_t seed);
  Image Decode(const LatentGrid& z) const override;
  LatentGrid Encode(const Image& image) const override;
  int latent_channels() const override { return channels_; }
  int stride() const override { return stride_; }
  const Eigen::MatrixXd& mix() const { return mix_; }

 private:
  int channels_;
  int stride_;
  Eigen::MatrixXd mix_;     // 3 x c
  Eigen::MatrixXd pinv_;    // c x 3, empty when not injective
};

struct InversionOptions {
  // Refine every inversion step to the fixed point of the matching
  // denoising step, which makes invert -> denoise exact up to `tolerance`.
  bool fixed_point = true;
  int max_fixed_point_iters = 200;
  double tolerance = 1e-14;
};

// One deterministic DDIM transition from cumulative signal `ab_from` to
// `ab_to` using the noise estimate `eps`.
Field DdimTransition(const Field& z, const Field& eps, double ab_from, double ab_to);

LatentGrid DdimInvert(const LatentGrid& z0, const Denoiser& den,
                      const Schedule& sched, int t_target,
                      const InversionOptions& options = {});
LatentGrid DdimDenoise(const LatentGrid& z, const Denoiser& den,
                       const Schedule& sched, int t_to);
LatentGrid DenoiseOneStep(const LatentGrid& z, const Denoiser& den,
                          const Schedule& sched);
// Vector-Jacobian product of DenoiseOneStep at z.
Field DenoiseOneStepVjp(const LatentGrid& z, const Denoiser& den,
                        const Schedule& sched, const Field& cotangent);

}  // namespace dragscene
