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

// Serial reference kernels against their OpenMP versions.

#include <random>
#include <vector>

#include <benchmark/benchmark.h>

#include "dragscene/kernels.hpp"

using namespace dragscene;
namespace ks = dragscene::kernels;

namespace {

std::vector<ks::SplatSample> MakeSamples(std::size_t n, std::size_t pixels) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::int32_t> pix(-1, static_cast<std::int32_t>(pixels) - 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<ks::SplatSample> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = {pix(rng), 1.0 + u(rng), 0.5 * u(rng), static_cast<std::int64_t>(i)};
  }
  return s;
}

Field MakeField(int h, int w, int c) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  Field f(h, w, c);
  for (double& v : f.data()) v = n(rng);
  return f;
}

struct RegressionData {
  std::vector<Vec3> fused;
  std::vector<std::uint8_t> valid;
  std::vector<double> mask;
  std::vector<std::vector<Vec3>> preds;
  std::vector<std::vector<std::uint8_t>> pred_valid;
  std::vector<std::vector<double>> conf;
  std::vector<Vec3> grad;
  ks::RegressionViewInput input;

  RegressionData(int side, int views) {
    const std::size_t n = static_cast<std::size_t>(side) * side;
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      fused.emplace_back(g(rng), g(rng), 3.0 + g(rng));
      valid.push_back(1);
      mask.push_back(i % 3 == 0 ? 1.0 : 0.0);
    }
    for (int v = 0; v < views; ++v) {
      std::vector<Vec3> p;
      for (const Vec3& x : fused) p.push_back(x + 0.1 * Vec3(g(rng), g(rng), g(rng)));
      preds.push_back(std::move(p));
      pred_valid.emplace_back(n, 1);
      conf.emplace_back(n, 1.0);
    }
    input.fused = fused;
    input.fused_valid = valid;
    input.mask = mask;
    for (int v = 0; v < views; ++v) {
      input.world_pred.emplace_back(preds[v]);
      input.pred_valid.emplace_back(pred_valid[v]);
      input.confidence.emplace_back(conf[v]);
    }
    input.width = side;
    grad.resize(n * views);
  }
};

template <bool kParallel>
void BM_ZBufferSplat(benchmark::State& state) {
  const std::size_t pixels = static_cast<std::size_t>(state.range(0)) * state.range(0);
  const auto samples = MakeSamples(4 * pixels, pixels);
  for (auto _ : state) {
    auto w = kParallel ? ks::parallel::ZBufferSplat(samples, pixels, 1e-4)
                       : ks::serial::ZBufferSplat(samples, pixels, 1e-4);
    benchmark::DoNotOptimize(w.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(samples.size()));
}

template <bool kParallel>
void BM_BoxBlur(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Field f = MakeField(side, side, 4);
  for (auto _ : state) {
    Field out = kParallel ? ks::parallel::BoxBlur(f) : ks::serial::BoxBlur(f);
    benchmark::DoNotOptimize(out.data().data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(f.size()));
}

template <bool kParallel>
void BM_MaskedL1(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0));
  const Field a = MakeField(side, side, 4);
  const Field b = MakeField(side, side, 4);
  std::vector<double> weight(static_cast<std::size_t>(side) * side, 0.5);
  std::vector<double> grad(a.size());
  for (auto _ : state) {
    const double loss = kParallel
                            ? ks::parallel::MaskedL1(a.data(), b.data(), weight, 4, grad)
                            : ks::serial::MaskedL1(a.data(), b.data(), weight, 4, grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(a.size()));
}

template <bool kParallel>
void BM_RegressionView(benchmark::State& state) {
  RegressionData d(static_cast<int>(state.range(0)), 5);
  for (auto _ : state) {
    const double loss = kParallel ? ks::parallel::RegressionView(d.input, d.grad)
                                  : ks::serial::RegressionView(d.input, d.grad);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(d.fused.size()) * 5);
}

}  // namespace

BENCHMARK(BM_ZBufferSplat<false>)->Name("ZBufferSplat/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_ZBufferSplat<true>)->Name("ZBufferSplat/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_BoxBlur<false>)->Name("BoxBlur/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_BoxBlur<true>)->Name("BoxBlur/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_MaskedL1<false>)->Name("MaskedL1/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_MaskedL1<true>)->Name("MaskedL1/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_RegressionView<false>)->Name("RegressionView/serial")->Arg(64)->Arg(128);
BENCHMARK(BM_RegressionView<true>)->Name("RegressionView/parallel")->Arg(64)->Arg(128);

int main(int argc, char** argv) {
  ks::ConfigureThreadsFromEnv();
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
