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

#include "fmplug/ode.hpp"

#include <stdexcept>
#include <string>

#include "fmplug/errors.hpp"

namespace fmplug::ode {
namespace {

void check_steps(std::size_t steps) {
  if (steps == 0) throw std::invalid_argument("integration needs at least one step");
}

// Lifts [d] to [1, d]; returns whether a reshape happened.
Tensor as_batch(const Tensor& z, std::size_t d, bool& flat) {
  flat = z.rank() == 1;
  const Tensor out = flat ? num::reshape(z, {1, z.size()}) : z;
  if (out.rank() != 2 || out.shape()[1] != d) {
    throw ShapeError("state " + num::to_string(z.shape()) + " does not match model dimension " +
                     std::to_string(d));
  }
  return out;
}

void check_finite(const Tensor& z, const char* what, std::size_t step) {
  if (!num::all_finite(z)) {
    throw NumericError(std::string(what) + ": non-finite state after step " +
                       std::to_string(step));
  }
}

}  // namespace

EulerGrid forward_grid(double t_start, std::size_t steps) {
  check_steps(steps);
  EulerGrid grid;
  grid.step = (1.0 - t_start) * (1.0 / static_cast<double>(steps));
  for (std::size_t i = 0; i <= steps; ++i) {
    grid.times.push_back(t_start + grid.step * static_cast<double>(i));
  }
  return grid;
}

Tensor euler_step(const flow::VelocityModel& velocity, const Tensor& z, const Tensor& t,
                  const Tensor& h) {
  return z + velocity.velocity(z, t) * h;
}

Tensor generate(const flow::VelocityModel& velocity, const Tensor& z, const Tensor& t_start,
                std::size_t steps) {
  check_steps(steps);
  const double t0 = t_start.item();
  if (!(t0 >= 0.0 && t0 <= 1.0)) {
    throw std::invalid_argument("generate: t_start = " + std::to_string(t0) + " outside [0, 1]");
  }
  bool flat = false;
  Tensor state = as_batch(z, velocity.dim(), flat);
  check_finite(state, "generate", 0);
  // Same arithmetic as forward_grid, kept on the graph so that t_start
  // receives a gradient through both the step size and the time inputs.
  const Tensor h = (1.0 - t_start) * (1.0 / static_cast<double>(steps));
  for (std::size_t i = 0; i < steps; ++i) {
    const Tensor t = t_start + h * static_cast<double>(i);
    state = euler_step(velocity, state, t, h);
    check_finite(state, "generate", i + 1);
  }
  return flat ? num::reshape(state, {state.size()}) : state;
}

Tensor generate(const flow::VelocityModel& velocity, const Tensor& z, const IntegrationSpec& spec) {
  if (spec.direction != Direction::forward) {
    throw std::invalid_argument("generate: integration spec must be forward");
  }
  return generate(velocity, z, Tensor::scalar(spec.t_start), spec.steps);
}

Tensor invert(const flow::VelocityModel& velocity, const Tensor& x, std::size_t steps) {
  check_steps(steps);
  bool flat = false;
  Tensor state = as_batch(x, velocity.dim(), flat);
  check_finite(state, "invert", 0);
  const double h = 1.0 / static_cast<double>(steps);
  const Tensor neg_h = Tensor::scalar(-h);
  for (std::size_t i = 0; i < steps; ++i) {
    const Tensor t = Tensor::scalar(1.0 - h * static_cast<double>(i));
    state = euler_step(velocity, state, t, neg_h);
    check_finite(state, "invert", i + 1);
  }
  return flat ? num::reshape(state, {state.size()}) : state;
}

}  // namespace fmplug::ode
