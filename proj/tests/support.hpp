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

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "fmplug/flow.hpp"
#include "fmplug/random.hpp"
#include "fmplug/tensor.hpp"

namespace fmplug::testing {

using num::Tensor;

// |a - n| / max(|a|, |n|, floor).
inline double rel_error(double analytic, double numeric, double floor = 1e-8) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Largest elementwise relative error between the analytic gradient of the
// scalar `f` at `x` and central differences with step `h`.
inline double fd_max_error(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                           double h = 1e-5, double floor = 1e-8) {
  num::Graph g;
  const Tensor xv = g.variable(x);
  const Tensor analytic = g.backward(f(xv), {xv})[0];
  double worst = 0.0;
  auto values = x.to_vector();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + h;
    const double up = f(Tensor(x.shape(), values)).item();
    values[i] = orig - h;
    const double down = f(Tensor(x.shape(), values)).item();
    values[i] = orig;
    worst = std::max(worst, rel_error(analytic[i], (up - down) / (2.0 * h), floor));
  }
  return worst;
}

inline Tensor uniform_tensor(num::Shape shape, std::uint64_t seed, double lo = -2.0,
                             double hi = 2.0) {
  Rng rng(seed);
  std::vector<double> v(num::numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return Tensor(std::move(shape), std::move(v));
}

inline Tensor normal_tensor(num::Shape shape, std::uint64_t seed) {
  Rng rng(seed);
  return Tensor(shape, rng.normals(num::numel(shape)));
}

// v(z, t) = z.
struct LinearField final : flow::VelocityModel {
  std::size_t d;
  explicit LinearField(std::size_t dim) : d(dim) {}
  std::size_t dim() const override { return d; }
  Tensor velocity(const Tensor& z, const Tensor&) const override { return z * 1.0; }
};

// v(z, t) = c.
struct ConstantField final : flow::VelocityModel {
  std::vector<double> c;
  explicit ConstantField(std::vector<double> value) : c(std::move(value)) {}
  std::size_t dim() const override { return c.size(); }
  Tensor velocity(const Tensor& z, const Tensor&) const override {
    const std::size_t batch = z.shape()[0];
    std::vector<double> out;
    for (std::size_t b = 0; b < batch; ++b) out.insert(out.end(), c.begin(), c.end());
    return z * 0.0 + Tensor(z.shape(), out);
  }
};

// Transports every seed to x0 along the linear path: v = (x0 - z) / (1 - t).
struct PointField final : flow::VelocityModel {
  std::vector<double> x0;
  explicit PointField(std::vector<double> target) : x0(std::move(target)) {}
  std::size_t dim() const override { return x0.size(); }
  Tensor velocity(const Tensor& z, const Tensor& t) const override {
    const std::size_t batch = z.shape()[0], d = x0.size();
    std::vector<double> target;
    for (std::size_t b = 0; b < batch; ++b) target.insert(target.end(), x0.begin(), x0.end());
    const Tensor tcol = t.size() == 1 ? num::broadcast_to(t, {batch, 1}) : t;
    const Tensor inv = num::reciprocal(1.0 - tcol);
    return (Tensor(z.shape(), target) - z) * num::matmul(inv, Tensor::full({1, d}, 1.0));
  }
};

inline flow::FlowModel wrap(std::shared_ptr<const flow::VelocityModel> v) {
  flow::FlowModel m;
  m.velocity = std::move(v);
  return m;
}

}  // namespace fmplug::testing
