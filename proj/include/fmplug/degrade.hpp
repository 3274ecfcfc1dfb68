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

#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "fmplug/tensor.hpp"

namespace fmplug::degrade {

using num::Tensor;

struct GaussianBlur {
  std::size_t kernel_size = 9;
  double sigma = 1.5;
};

struct Downsample {
  std::size_t factor = 4;  // block average
};

struct Mask {
  std::vector<std::uint8_t> keep;  // row-major, one entry per pixel
};

struct Identity {};

using OperatorKind = std::variant<GaussianBlur, Downsample, Mask, Identity>;

// Normalized separable Gaussian, [size, size]. Throws for even size or
// non-positive sigma.
Tensor gaussian_kernel(std::size_t size, double sigma);

/// Linear degradation A acting on [height, width] images, plus additive
/// Gaussian noise of standard deviation noise_sigma.
class ForwardOperator {
 public:
  ForwardOperator(OperatorKind kind, std::size_t height, std::size_t width, double noise_sigma);

  const OperatorKind& kind() const noexcept { return kind_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  double noise_sigma() const noexcept { return noise_sigma_; }
  num::Shape measurement_shape() const;
  std::string name() const;

  // Noiseless A(x). `x` is any tensor with height * width entries (an image
  // or a flattened [1, d] state); the result has measurement_shape().
  // Differentiable with respect to x.
  Tensor apply(const Tensor& x) const;

  // A(x) + noise_sigma * g with g ~ N(0, I) drawn from `seed`.
  Tensor observe(const Tensor& x, std::uint64_t seed) const;

  // Measurement mapped back to object space, flattened to [1, d]:
  // nearest-neighbour upsampling for Downsample, identity otherwise
  // (masked pixels keep their measured value, which is zero).
  Tensor lift(const Tensor& y) const;

 private:
  OperatorKind kind_;
  std::size_t height_, width_;
  double noise_sigma_;
  Tensor kernel_;  // blur only
  Tensor mask_;    // mask only
};

}  // namespace fmplug::degrade
