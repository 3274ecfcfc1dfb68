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

#include "fmplug/degrade.hpp"

#include <cmath>
#include <stdexcept>

#include "fmplug/errors.hpp"
#include "fmplug/random.hpp"

namespace fmplug::degrade {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

Tensor gaussian_kernel(std::size_t size, double sigma) {
  if (size == 0 || size % 2 == 0) {
    throw std::invalid_argument("gaussian_kernel: size must be odd, got " + std::to_string(size));
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_kernel: sigma must be positive");
  const auto r = static_cast<double>(size / 2);
  std::vector<double> g(size);
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = static_cast<double>(i) - r;
    g[i] = std::exp(-x * x / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (auto& v : g) v /= total;
  std::vector<double> k(size * size);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) k[i * size + j] = g[i] * g[j];
  return Tensor({size, size}, std::move(k));
}

ForwardOperator::ForwardOperator(OperatorKind kind, std::size_t height, std::size_t width,
                                 double noise_sigma)
    : kind_(std::move(kind)), height_(height), width_(width), noise_sigma_(noise_sigma) {
  if (height_ == 0 || width_ == 0) throw std::invalid_argument("image extents must be positive");
  if (!(noise_sigma_ >= 0.0)) throw std::invalid_argument("noise sigma must be >= 0");
  std::visit(Overloaded{
                 [&](const GaussianBlur& b) {
                   kernel_ = gaussian_kernel(b.kernel_size, b.sigma);
                   if (b.kernel_size / 2 >= height_ || b.kernel_size / 2 >= width_) {
                     throw std::invalid_argument("blur kernel too large for the image");
                   }
                 },
                 [&](const Downsample& d) {
                   if (d.factor == 0 || height_ % d.factor != 0 || width_ % d.factor != 0) {
                     throw std::invalid_argument("downsample factor " + std::to_string(d.factor) +
                                                 " must divide the image extents");
                   }
                 },
                 [&](const Mask& m) {
                   if (m.keep.size() != height_ * width_) {
                     throw ShapeError("mask size does not match the image");
                   }
                   std::vector<double> v(m.keep.begin(), m.keep.end());
                   for (auto& e : v) e = e != 0.0 ? 1.0 : 0.0;
                   mask_ = Tensor({height_, width_}, std::move(v));
                 },
                 [](const Identity&) {},
             },
             kind_);
}

num::Shape ForwardOperator::measurement_shape() const {
  if (const auto* d = std::get_if<Downsample>(&kind_)) {
    return {height_ / d->factor, width_ / d->factor};
  }
  return {height_, width_};
}

std::string ForwardOperator::name() const {
  return std::visit(Overloaded{
                        [](const GaussianBlur&) { return std::string("gaussian_blur"); },
                        [](const Downsample&) { return std::string("downsample"); },
                        [](const Mask&) { return std::string("mask"); },
                        [](const Identity&) { return std::string("identity"); },
                    },
                    kind_);
}

Tensor ForwardOperator::apply(const Tensor& x) const {
  if (x.size() != height_ * width_) {
    throw ShapeError("operator expects " + std::to_string(height_) + "x" + std::to_string(width_) +
                     " image, got shape " + num::to_string(x.shape()));
  }
  const Tensor image = x.shape() == num::Shape{height_, width_} ? x : num::reshape(x, {height_, width_});
  return std::visit(Overloaded{
                        [&](const GaussianBlur&) { return num::conv2d(image, kernel_); },
                        [&](const Downsample& d) { return num::avg_pool2d(image, d.factor); },
                        [&](const Mask&) { return image * mask_; },
                        [&](const Identity&) { return image; },
                    },
                    kind_);
}

Tensor ForwardOperator::observe(const Tensor& x, std::uint64_t seed) const {
  const Tensor clean = apply(x).detach();
  if (noise_sigma_ == 0.0) return clean;
  Rng rng(seed);
  std::vector<double> y = clean.to_vector();
  for (auto& v : y) v += noise_sigma_ * rng.normal();
  return Tensor(clean.shape(), std::move(y));
}

Tensor ForwardOperator::lift(const Tensor& y) const {
  const auto mshape = measurement_shape();
  if (y.size() != num::numel(mshape)) {
    throw ShapeError("lift: measurement shape " + num::to_string(y.shape()) + ", expected " +
                     num::to_string(mshape));
  }
  const std::size_t d = height_ * width_;
  if (const auto* ds = std::get_if<Downsample>(&kind_)) {
    const std::size_t f = ds->factor, mw = mshape[1];
    std::vector<double> out(d);
    const auto v = y.values();
    for (std::size_t i = 0; i < height_; ++i)
      for (std::size_t j = 0; j < width_; ++j) out[i * width_ + j] = v[(i / f) * mw + j / f];
    return Tensor({1, d}, std::move(out));
  }
  return Tensor({1, d}, y.to_vector());
}

}  // namespace fmplug::degrade
