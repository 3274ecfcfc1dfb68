// Copyright 2026 The fmplug-lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "fmplug/tensor.hpp"

namespace fmplug::num::detail {

// Gradient buffer of an operand, or null when the operand is untracked.
using GradSlot = std::vector<double>*;
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<const GradSlot> grad_in)>;

inline constexpr std::size_t kConstant = static_cast<std::size_t>(-1);

struct Node {
  std::size_t size = 0;
  std::vector<std::size_t> inputs;  // node index, or kConstant
  BackwardFn backward;              // empty for leaves
};

class Tape {
 public:
  std::uint64_t generation = 1;
  std::vector<Node> nodes;
};

using Values = std::shared_ptr<const std::vector<double>>;

struct TensorAccess {
  static const Values& values(const Tensor& t) { return t.values_; }
  static bool live(const Tensor& t) {
    return t.tape_ && t.tape_->generation == t.generation_;
  }
  static Tape* tape(const Tensor& t) { return t.tape_.get(); }
  static std::size_t node(const Tensor& t) { return t.node_; }
  static Tensor make(Shape shape, Values values);
  static Tensor attach(Tensor t, std::shared_ptr<Tape> tape, std::size_t node);
  static const std::shared_ptr<Tape>& tape_ptr(const Tensor& t) { return t.tape_; }
};

// Builds the output tensor and, if any input is attached to a live tape,
// appends a node whose backward function receives the output gradient.
Tensor record(std::span<const Tensor* const> inputs, Shape shape, std::vector<double> values,
              BackwardFn backward);
inline Tensor record(std::initializer_list<const Tensor*> inputs, Shape shape,
                     std::vector<double> values, BackwardFn backward) {
  return record(std::span<const Tensor* const>(inputs.begin(), inputs.size()), std::move(shape),
                std::move(values), std::move(backward));
}

}  // namespace fmplug::num::detail
