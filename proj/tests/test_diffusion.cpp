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

#include <cmath>
#include <random>

#include "doctest.h"

#include "dragscene/diffusion.hpp"
#include "test_util.hpp"

using namespace dragscene;
using dragscene::testing::RandomField;

namespace {

const Schedule kSched = MakeSchedule(50, 1e-4, 0.02);

LatentGrid Clean(const Field& f) { return {f, 0, 1}; }

}  // namespace

TEST_CASE("schedule construction") {
  const Schedule one = MakeSchedule(1, 0.1, 0.1);
  REQUIRE(one.alpha_bar.size() == 1);
  CHECK(one.alpha_bar[0] == doctest::Approx(0.9).epsilon(1e-15));
  for (std::size_t t = 1; t < kSched.alpha_bar.size(); ++t) {
    CHECK(kSched.alpha_bar[t] < kSched.alpha_bar[t - 1]);
    CHECK(kSched.alpha_bar[t] > 0.0);
  }
  // Product of 1 - beta for 50 linearly spaced betas, scripted separately.
  CHECK(kSched.alpha_bar[49] == doctest::Approx(0.60295159732971504).epsilon(1e-14));
  CHECK(kSched.alpha_bar[19] == doctest::Approx(0.92369289384028641).epsilon(1e-14));
  CHECK(kSched.AlphaBarAt(0) == 1.0);
  CHECK(kSched.AlphaBarAt(20) == kSched.alpha_bar[19]);
  CHECK_THROWS_AS(kSched.AlphaBarAt(51), ContractError);
  CHECK_THROWS_AS(MakeSchedule(0, 1e-4, 0.02), ContractError);
  CHECK_THROWS_AS(MakeSchedule(10, 0.02, 1e-4), ContractError);
  CHECK_THROWS_AS(MakeSchedule(10, 0.0, 0.02), ContractError);
  CHECK_THROWS_AS(MakeSchedule(10, 1e-4, 1.0), ContractError);
}

TEST_CASE("strength to step mapping") {
  CHECK(kSched.t_total == 50);
  CHECK(kSched.t_e == 35);
  CHECK(kSched.t_r == 20);
  CHECK(StepForStrength(0.4, 50) == 20);
  CHECK(StepForStrength(0.7, 50) == 35);
  CHECK(StepForStrength(0.01, 50) == 1);
  const Schedule tiny = MakeSchedule(50, 1e-4, 0.02, 0.001, 0.001);
  CHECK(tiny.t_e == 1);
  CHECK(tiny.t_r == 1);
}

TEST_CASE("zero denoiser inversion is a closed-form scaling") {
  std::mt19937_64 rng(21);
  const ZeroDenoiser den;
  const Field z0 = RandomField(rng, 4, 5, 3);
  for (int t : {0, 10, 20, 35}) {
    const LatentGrid zt = DdimInvert(Clean(z0), den, kSched, t);
    CHECK(zt.timestep == t);
    const double scale = std::sqrt(kSched.AlphaBarAt(t));
    for (std::size_t i = 0; i < z0.size(); ++i) {
      CHECK(std::abs(zt.values[i] - z0[i] * scale) < 1e-14);
    }
  }
  const LatentGrid same = DdimInvert(Clean(z0), den, kSched, 0);
  CHECK(same.values == z0);
}

TEST_CASE("linear denoiser inversion follows the scalar recursion") {
  const ScalarLinearDenoiser den(0.1);
  const Field one(1, 1, 1, 1.0);
  // Scalar recursion z' = (s'/s) z / (1 - a (q' - s' q / s)), scripted separately.
  CHECK(DdimInvert(Clean(one), den, kSched, 10).values[0] ==
        doctest::Approx(1.0042764261385759).epsilon(1e-12));
  CHECK(DdimInvert(Clean(one), den, kSched, 20).values[0] ==
        doctest::Approx(0.9887277237586779).epsilon(1e-12));
  CHECK(DdimInvert(Clean(one), den, kSched, 35).values[0] ==
        doctest::Approx(0.93001637925686098).epsilon(1e-12));
}

TEST_CASE("invert then denoise is a round trip") {
  std::mt19937_64 rng(22);
  const ZeroDenoiser zero;
  const ScalarLinearDenoiser linear(0.1);
  const SmoothingDenoiser smooth;
  const Field z0 = RandomField(rng, 8, 8, 4);
  for (const Denoiser* den : {static_cast<const Denoiser*>(&zero),
                              static_cast<const Denoiser*>(&linear),
                              static_cast<const Denoiser*>(&smooth)}) {
    for (int t : {10, 20, 35}) {
      const LatentGrid back = DdimDenoise(DdimInvert(Clean(z0), *den, kSched, t), *den, kSched, 0);
      CHECK(back.timestep == 0);
      CHECK(back.values.MaxAbsDiff(z0) < 1e-5);
    }
  }
}

TEST_CASE("denoise edge cases") {
  std::mt19937_64 rng(23);
  const ScalarLinearDenoiser den;
  const LatentGrid z{RandomField(rng, 3, 3, 2), 12, 1};
  CHECK(DdimDenoise(z, den, kSched, 12).values == z.values);
  CHECK_THROWS_AS(DdimDenoise(z, den, kSched, 13), ContractError);
  CHECK_THROWS_AS(DdimInvert(z, den, kSched, 20), ContractError);
  CHECK_THROWS_AS(DdimInvert(Clean(z.values), den, kSched, 51), ContractError);
  LatentGrid clean = Clean(z.values);
  CHECK_THROWS_AS(DenoiseOneStep(clean, den, kSched), ContractError);
}

TEST_CASE("non-finite latents raise a numerical failure with the step") {
  const ScalarLinearDenoiser den;
  Field bad(2, 2, 1, 1.0);
  bad[3] = NAN;
  try {
    DdimInvert(Clean(bad), den, kSched, 5);
    FAIL("expected a numerical failure");
  } catch (const NumericalFailure& e) {
    CHECK(e.step() == 1);
  }
}

TEST_CASE("one-step denoise") {
  std::mt19937_64 rng(24);
  const ZeroDenoiser zero;
  const LatentGrid z{RandomField(rng, 3, 4, 2), 20, 1};
  const LatentGrid one = DenoiseOneStep(z, zero, kSched);
  CHECK(one.timestep == 19);
  for (std::size_t i = 0; i < z.values.size(); ++i) {
    // sqrt(alpha_bar(19) / alpha_bar(20)), scripted separately.
    CHECK(std::abs(one.values[i] - 1.0039312241340066 * z.values[i]) < 1e-14);
  }
  const SmoothingDenoiser smooth;
  CHECK(DenoiseOneStep(z, smooth, kSched).values == DdimDenoise(z, smooth, kSched, 19).values);

  // k single steps compose to the multi-step denoise.
  LatentGrid stepped = z;
  for (int k = 0; k < 20; ++k) stepped = DenoiseOneStep(stepped, smooth, kSched);
  CHECK(stepped.values.MaxAbsDiff(DdimDenoise(z, smooth, kSched, 0).values) < 1e-9);
}

TEST_CASE("one-step Jacobian matches central differences") {
  std::mt19937_64 rng(25);
  const ScalarLinearDenoiser linear(0.1);
  const SmoothingDenoiser smooth;
  for (const Denoiser* den : {static_cast<const Denoiser*>(&linear),
                              static_cast<const Denoiser*>(&smooth)}) {
    const LatentGrid z{RandomField(rng, 4, 4, 2), 20, 1};
    const Field cot = RandomField(rng, 4, 4, 2);
    const Field vjp = DenoiseOneStepVjp(z, *den, kSched, cot);
    const double h = 1e-6;
    for (std::size_t i = 0; i < z.values.size(); ++i) {
      LatentGrid zp = z;
      LatentGrid zm = z;
      zp.values[i] += h;
      zm.values[i] -= h;
      const Field fp = DenoiseOneStep(zp, *den, kSched).values;
      const Field fm = DenoiseOneStep(zm, *den, kSched).values;
      double fd = 0.0;
      for (std::size_t j = 0; j < fp.size(); ++j) fd += cot[j] * (fp[j] - fm[j]) / (2 * h);
      CHECK(std::abs(fd - vjp[i]) <= 1e-6 * std::max(1.0, std::abs(vjp[i])));
    }
  }
}

TEST_CASE("denoiser contracts") {
  std::mt19937_64 rng(26);
  const Field z = RandomField(rng, 5, 6, 3);
  const ScalarLinearDenoiser lin(0.25);
  const Field eps = lin.NoisePredict(z, 3);
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(eps[i] == 0.25 * z[i]);
  const SmoothingDenoiser smooth;
  const Field e2 = smooth.NoisePredict(z, 3);
  CHECK(e2.SameShape(z));
  CHECK(smooth.NoisePredict(z, 3) == e2);
  const Field f = smooth.FeatureMap(z, 3);
  // interior pixel: mean of its 3x3 neighbourhood
  double mean = 0.0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) mean += z(2 + dr, 3 + dc, 1);
  }
  CHECK(f(2, 3, 1) == doctest::Approx(mean / 9.0).epsilon(1e-14));
  CHECK(std::abs(e2(2, 3, 1) - (z(2, 3, 1) - f(2, 3, 1))) < 1e-14);
  const std::int64_t before = smooth.calls();
  smooth.NoisePredict(z, 1);
  CHECK(smooth.calls() == before + 1);
}

TEST_CASE("decoders") {
  std::mt19937_64 rng(27);
  const IdentityDecoder id;
  const Image img = RandomField(rng, 4, 4, 3);
  CHECK(id.Decode(id.Encode(img)) == img);
  CHECK_THROWS_AS(id.Decode({RandomField(rng, 2, 2, 4), 0, 1}), ConfigError);

  const LinearDecoder dec(3, 2, 9);
  const LatentGrid z{RandomField(rng, 3, 5, 3), 0, 2};
  const Image out = dec.Decode(z);
  CHECK(out.height() == 6);
  CHECK(out.width() == 10);
  CHECK(out(1, 1, 2) == out(0, 0, 2));
  CHECK(dec.Encode(out).values.MaxAbsDiff(z.values) < 1e-12);
  CHECK(LinearDecoder(3, 2, 9).mix() == dec.mix());
  CHECK_THROWS_AS(LinearDecoder(4, 1, 0).Encode(img), ConfigError);
  CHECK_THROWS_AS(dec.Encode(RandomField(rng, 5, 4, 3)), ContractError);
  CHECK_THROWS_AS(LinearDecoder(0, 1, 0), ConfigError);
}

TEST_CASE("reinversion of a zero image is zero under the zero denoiser") {
  const ZeroDenoiser den;
  const IdentityDecoder dec;
  const Image zero(4, 4, 3, 0.0);
  const LatentGrid z = DdimInvert(dec.Encode(zero), den, kSched, kSched.t_r);
  CHECK(z.timestep == 20);
  for (double v : z.values.data()) CHECK(v == 0.0);
}
