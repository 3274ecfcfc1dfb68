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
#include <vector>

#include "fmplug/flow.hpp"

namespace fmplug::ode {

using num::Tensor;

enum class Direction { forward, backward };

struct IntegrationSpec {
  std::size_t steps = 3;
  double t_start = 0.0;
  Direction direction = Direction::forward;
};

// Forward Euler grid over [t_start, 1]: step = (1 - t_start) / steps and
// times[i] = t_start + i * step, computed exactly as generate() does.
struct EulerGrid {
  double step = 0.0;
  std::vector<double> times;  // steps + 1 entries
};
EulerGrid forward_grid(double t_start, std::size_t steps);

// z + h * v(z, t).
Tensor euler_step(const flow::VelocityModel& velocity, const Tensor& z, const Tensor& t,
                  const Tensor& h);

// Forward Euler from t_start to 1. `z` is [batch, d] or [d]; `t_start` is a
// single element and may be graph-attached, in which case the result is
// differentiable with respect to it.
Tensor generate(const flow::VelocityModel& velocity, const Tensor& z, const Tensor& t_start,
                std::size_t steps);
Tensor generate(const flow::VelocityModel& velocity, const Tensor& z, const IntegrationSpec& spec);

// Backward Euler sweep 1 -> 0 with step 1/steps: x <- x - h v(x, t_i),
// t_i = 1 - i h. Recovers the seed that generates `x`.
Tensor invert(const flow::VelocityModel& velocity, const Tensor& x, std::size_t steps);

}  // namespace fmplug::ode
