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

#include "fmplug/tensor.hpp"

#include <sstream>
#include <utility>

#include "fmplug/errors.hpp"
#include "tape.hpp"

namespace fmplug::num {

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto e : shape) n *= e;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor() : shape_{1}, values_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  for (auto e : shape_) {
    if (e == 0) throw ShapeError("tensor extents must be positive, got " + to_string(shape_));
  }
  if (numel(shape_) != values.size()) {
    throw ShapeError("shape " + to_string(shape_) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::vector(std::vector<double> values) {
  const auto n = values.size();
  return Tensor({n}, std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return (*values_)[0];
}

bool Tensor::requires_grad() const noexcept { return detail::TensorAccess::live(*this); }

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.values_ = values_;
  return t;
}

namespace detail {

Tensor TensorAccess::make(Shape shape, Values values) {
  Tensor t;
  t.shape_ = std::move(shape);
  t.values_ = std::move(values);
  return t;
}

Tensor TensorAccess::attach(Tensor t, std::shared_ptr<Tape> tape, std::size_t node) {
  t.generation_ = tape->generation;
  t.tape_ = std::move(tape);
  t.node_ = node;
  return t;
}

Tensor record(std::span<const Tensor* const> inputs, Shape shape, std::vector<double> values,
              BackwardFn backward) {
  if (numel(shape) != values.size()) {
    throw ShapeError("internal: op produced " + std::to_string(values.size()) +
                     " values for shape " + to_string(shape));
  }
  auto out = TensorAccess::make(std::move(shape),
                                std::make_shared<const std::vector<double>>(std::move(values)));
  const std::shared_ptr<Tape>* tape = nullptr;
  for (const Tensor* in : inputs) {
    if (!TensorAccess::live(*in)) continue;
    if (tape && tape->get() != TensorAccess::tape(*in)) {
      throw std::invalid_argument("operands are attached to different graphs");
    }
    tape = &TensorAccess::tape_ptr(*in);
  }
  if (!tape) return out;

  Node node;
  node.size = out.size();
  node.inputs.reserve(inputs.size());
  for (const Tensor* in : inputs) {
    node.inputs.push_back(TensorAccess::live(*in) ? TensorAccess::node(*in) : kConstant);
  }
  node.backward = std::move(backward);
  auto& nodes = (*tape)->nodes;
  nodes.push_back(std::move(node));
  return TensorAccess::attach(std::move(out), *tape, nodes.size() - 1);
}

}  // namespace detail

Graph::Graph() : tape_(std::make_shared<detail::Tape>()) {}

Tensor Graph::variable(const Tensor& value) {
  detail::Node node;
  node.size = value.size();
  tape_->nodes.push_back(std::move(node));
  return detail::TensorAccess::attach(value.detach(), tape_, tape_->nodes.size() - 1);
}

std::size_t Graph::node_count() const noexcept { return tape_->nodes.size(); }

std::vector<Tensor> Graph::backward(const Tensor& loss, std::initializer_list<Tensor> wrt) {
  return backward(loss, std::span<const Tensor>(wrt.begin(), wrt.size()));
}

std::vector<Tensor> Graph::backward(const Tensor& loss, std::span<const Tensor> wrt) {
  using detail::TensorAccess;
  if (loss.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + to_string(loss.shape()));
  }
  auto& nodes = tape_->nodes;
  std::vector<std::vector<double>> grads(nodes.size());
  const bool reachable = TensorAccess::live(loss) && TensorAccess::tape(loss) == tape_.get();
  if (reachable) {
    const std::size_t root = TensorAccess::node(loss);
    grads[root].assign(1, 1.0);
    std::vector<detail::GradSlot> slots;
    for (std::size_t i = root + 1; i-- > 0;) {
      auto& node = nodes[i];
      if (grads[i].empty() || !node.backward) continue;
      slots.clear();
      for (auto in : node.inputs) {
        if (in == detail::kConstant) {
          slots.push_back(nullptr);
          continue;
        }
        if (grads[in].empty()) grads[in].assign(nodes[in].size, 0.0);
        slots.push_back(&grads[in]);
      }
      node.backward(grads[i], slots);
    }
  }

  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    const bool mine = TensorAccess::live(w) && TensorAccess::tape(w) == tape_.get();
    if (mine && !grads[TensorAccess::node(w)].empty()) {
      out.emplace_back(w.shape(), grads[TensorAccess::node(w)]);
    } else {
      out.push_back(Tensor::zeros(w.shape()));
    }
  }

  nodes.clear();
  ++tape_->generation;
  return out;
}

}  // namespace fmplug::num
