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

// Dense float64 tensors with tape-based reverse-mode differentiation.
//
// A Tensor is an immutable value. Creating one from a Graph (via
// Graph::variable) attaches it to that graph's tape; every operation with at
// least one attached operand records a node, and Graph::backward walks the
// tape in reverse creation order. Operations on unattached tensors record
// nothing.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fmplug::num {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

namespace detail {
class Tape;
struct TensorAccess;
}  // namespace detail

class Tensor {
 public:
  // Scalar zero.
  Tensor();
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t size() const noexcept { return values_->size(); }
  std::span<const double> values() const noexcept { return *values_; }
  std::vector<double> to_vector() const { return *values_; }
  double operator[](std::size_t i) const { return (*values_)[i]; }
  // Value of a single-element tensor.
  double item() const;

  // True while attached to a graph that has not yet been consumed.
  bool requires_grad() const noexcept;
  // Same values, no graph attachment.
  Tensor detach() const;

 private:
  friend struct detail::TensorAccess;

  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  std::shared_ptr<detail::Tape> tape_;
  std::uint64_t generation_ = 0;
  std::size_t node_ = 0;
};

/// Dynamic tape. Build one per forward pass; backward() consumes it, after
/// which every tensor it produced behaves as a detached constant and the
/// graph can record a fresh pass.
class Graph {
 public:
  Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) noexcept = default;
  Graph& operator=(Graph&&) noexcept = default;

  // Leaf node whose gradient backward() can report.
  Tensor variable(const Tensor& value);

  // d loss / d wrt[i] for each i. Tensors unreachable from the loss (or not
  // on this graph) get zeros. Throws ShapeError for a non-scalar loss.
  std::vector<Tensor> backward(const Tensor& loss, std::span<const Tensor> wrt);
  std::vector<Tensor> backward(const Tensor& loss, std::initializer_list<Tensor> wrt);

  std::size_t node_count() const noexcept;

 private:
  std::shared_ptr<detail::Tape> tape_;
};

// Elementwise arithmetic. Shapes must match, or one side must hold a single
// element, which is broadcast.
Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator*(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor operator+(const Tensor& a, double c);
Tensor operator+(double c, const Tensor& a);
Tensor operator-(const Tensor& a, double c);
Tensor operator-(double c, const Tensor& a);
Tensor operator*(const Tensor& a, double c);
Tensor operator*(double c, const Tensor& a);

// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Shape-preserving 2D cross-correlation of an [h,w] image with an odd
// [kh,kw] kernel under reflect padding (edge pixel not repeated). The kernel
// half-widths must be smaller than the image extents.
Tensor conv2d(const Tensor& image, const Tensor& kernel);

// Non-overlapping factor x factor block average of an [h,w] image.
Tensor avg_pool2d(const Tensor& image, std::size_t factor);

Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor reciprocal(const Tensor& x);
// max(x, lo); zero gradient where clamped.
Tensor clamp_min(const Tensor& x, double lo);
Tensor sin(const Tensor& x);
Tensor cos(const Tensor& x);
Tensor square(const Tensor& x);
Tensor sqrt(const Tensor& x);

// Reductions to a single-element tensor of shape {1}.
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor l2_norm(const Tensor& x);

Tensor concat(std::span<const Tensor> parts, std::size_t axis);
Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis);
// Half-open range [begin, end) along `axis`.
Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end);
Tensor reshape(const Tensor& x, Shape shape);
// Broadcast a single-element tensor to `shape`.
Tensor broadcast_to(const Tensor& x, Shape shape);

bool all_finite(const Tensor& x);

}  // namespace fmplug::num
