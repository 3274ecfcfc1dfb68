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

#include <cmath>
#include <stdexcept>
#include <string>

#include "fmplug/ode.hpp"
#include "fmplug/random.hpp"
#include "fmplug/solve.hpp"

namespace fmplug::solve {

Tensor sphere_project(const Tensor& z) {
  double ss = 0.0;
  for (double v : z.values()) ss += v * v;
  if (!(ss > 0.0)) throw std::invalid_argument("sphere_project: zero vector has no direction");
  const double scale = std::sqrt(static_cast<double>(z.size())) / std::sqrt(ss);
  std::vector<double> out = z.to_vector();
  for (auto& v : out) v *= scale;
  return Tensor(z.shape(), std::move(out));
}

Tensor chi2_nll(const Tensor& z) {
  const auto d = static_cast<double>(z.size());
  if (z.size() <= 2) {
    throw std::invalid_argument("chi2_nll: needs d >= 3, got d = " + std::to_string(z.size()));
  }
  const Tensor s = num::sum(num::square(z));
  if (!(s.item() > 0.0)) throw std::invalid_argument("chi2_nll: zero vector");
  return num::log(s) * -(d / 2.0 - 1.0) + s * 0.5;
}

double scalar_variance(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return ss / static_cast<double>(values.size());
}

Tensor variance_calibrate(const Tensor& z_t, double target_var) {
  if (!(target_var > 0.0)) throw std::invalid_argument("variance_calibrate: target must be > 0");
  const double var = scalar_variance(z_t.values());
  if (!(var > 0.0)) throw std::invalid_argument("variance_calibrate: input has zero variance");
  return z_t * std::sqrt(target_var / var);
}

double VarianceTable::at(double t) const {
  if (times.empty()) throw std::logic_error("empty variance table");
  if (t <= times.front()) return variances.front();
  if (t >= times.back()) return variances.back();
  std::size_t k = 1;
  while (times[k] < t) ++k;
  const double w = (t - times[k - 1]) / (times[k] - times[k - 1]);
  return (1.0 - w) * variances[k - 1] + w * variances[k];
}

VarianceTable estimate_path_variance(const flow::VelocityModel& velocity, std::size_t n_cal,
                                     std::size_t steps, std::uint64_t seed) {
  if (n_cal < 2) throw std::invalid_argument("estimate_path_variance: n_cal must be >= 2");
  const std::size_t d = velocity.dim();
  Rng rng(seed);
  Tensor state({n_cal, d}, rng.normals(n_cal * d));
  const auto grid = ode::forward_grid(0.0, steps);
  const Tensor h = Tensor::scalar(grid.step);
  VarianceTable table;
  table.times = grid.times;
  table.variances.push_back(scalar_variance(state.values()));
  for (std::size_t i = 0; i < steps; ++i) {
    state = ode::euler_step(velocity, state, Tensor::scalar(grid.times[i]), h);
    table.variances.push_back(scalar_variance(state.values()));
  }
  return table;
}

Tensor dflow_init(const Tensor& lifted_y, double alpha, const flow::VelocityModel& velocity,
                  std::size_t steps, std::uint64_t seed) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("dflow_init: alpha must lie in [0, 1]");
  }
  const Tensor y0 = ode::invert(velocity, num::reshape(lifted_y, {1, lifted_y.size()}), steps);
  Rng rng(seed);
  const Tensor z({1, lifted_y.size()}, rng.normals(lifted_y.size()));
  return (y0 * std::sqrt(alpha) + z * std::sqrt(1.0 - alpha)).detach();
}

}  // namespace fmplug::solve
