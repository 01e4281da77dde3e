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

#include <span>

#include "dragscene/grid.hpp"

namespace dragscene {

// Weighted geometric median argmin_x sum_k w_k |x - p_k| by the modified
// Weiszfeld iteration (Vardi-Zhang / Beck-Sabach step at anchor points).
// Points with zero weight are ignored. `start` seeds the iteration.
Vec3 WeightedGeometricMedian(std::span<const Vec3> points,
                             std::span<const double> weights, const Vec3& start,
                             int max_iters = 100, double tol = 1e-13);

}  // namespace dragscene
