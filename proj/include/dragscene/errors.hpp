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

#include <stdexcept>
#include <string>

namespace dragscene {

// Base of every error raised by the library. The CLI maps NumericalFailure
// (and subclasses) to exit code 2 and everything else to 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke a documented precondition (frame mismatch, missing pair, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

// Malformed numeric input: non-finite values, non-rigid poses, bad intrinsics.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

class NumericalFailure : public Error {
 public:
  NumericalFailure(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

// Loss became non-finite inside an optimization loop.
class OptimizationFailure : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class EmptySceneError : public Error {
 public:
  using Error::Error;
};

// Wraps a stage failure inside the pipeline with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& what, bool numerical)
      : Error(stage + ": " + what), stage_(stage), numerical_(numerical) {}
  const std::string& stage() const { return stage_; }
  bool numerical() const { return numerical_; }

 private:
  std::string stage_;
  bool numerical_;
};

}  // namespace dragscene
