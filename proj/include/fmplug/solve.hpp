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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fmplug/degrade.hpp"
#include "fmplug/flow.hpp"

namespace fmplug::solve {

using num::Tensor;

enum class Method { interleave, plugin, dflow, fmplug_w, fmplug_w_r };

std::string_view to_string(Method method);
std::optional<Method> parse_method(std::string_view name);

// When the warm-start state is rescaled to the calibrated path variance.
enum class Calibration { off, per_step, init_only };

std::string_view to_string(Calibration calibration);
std::optional<Calibration> parse_calibration(std::string_view name);

struct SolverConfig {
  Method method = Method::fmplug_w;
  std::size_t iterations = 300;  // outer optimizer steps; 0 evaluates the initialization only
  std::size_t steps = 3;         // Euler steps per generation
  double lr = 1e-2;              // Adam step size; plain gradient step for interleave
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double dflow_alpha = 0.5;
  double dflow_lambda = 1e-3;
  std::size_t n_cal = 512;
  Calibration calibration = Calibration::per_step;
  std::uint64_t cal_seed = 0;
  double t_init = 0.5;             // initial warm-up time for the fmplug methods
  std::size_t guidance_steps = 1;  // interleave: gradient steps after each Euler step
  bool descent_check = true;       // interleave: halve the step until the residual does not grow
  std::uint64_t seed = 0;

  // Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Optimization variables of the warm-up solvers. t = sigmoid(tau) keeps the
/// learned time strictly inside (0, 1).
struct WarmState {
  std::vector<double> z;
  double tau = 0.0;
  double t() const;
};

struct SolveResult {
  Tensor estimate;                  // [height, width], best recorded iterate
  std::vector<double> loss_trace;   // one entry per recorded iterate
  std::vector<double> seed_norm_trace;
  std::vector<double> t_trace;      // fmplug methods only
  std::optional<double> learned_t;  // t of the best iterate, fmplug methods only
  // Interleave only: residual |y - A(z)|^2 before and after each guidance step.
  std::vector<std::array<double, 2>> guidance_trace;
  std::size_t best_iteration = 0;
  std::size_t nfe = 0;  // velocity evaluations
  double seconds = 0.0;

  double best_loss() const { return loss_trace.at(best_iteration); }
};

// sqrt(d) z / |z|. Throws std::invalid_argument for the zero vector.
Tensor sphere_project(const Tensor& z);

// Chi-square negative log-likelihood of |z|^2 with d = z.size():
// -(d/2 - 1) log |z|^2 + |z|^2 / 2. Differentiable. Throws for d <= 2 or
// z = 0.
Tensor chi2_nll(const Tensor& z);

// Population variance of all entries, treated as draws of one scalar.
double scalar_variance(std::span<const double> values);

// Rescales z_t so its scalar variance equals target_var. The scale is a
// constant with respect to any graph z_t is attached to.
Tensor variance_calibrate(const Tensor& z_t, double target_var);

/// Pooled scalar variance of generation states on the forward Euler grid
/// from t = 0, estimated from n_cal seeded trajectories.
struct VarianceTable {
  std::vector<double> times;
  std::vector<double> variances;
  // Linear interpolation, clamped to the grid ends.
  double at(double t) const;
};

VarianceTable estimate_path_variance(const flow::VelocityModel& velocity, std::size_t n_cal,
                                     std::size_t steps, std::uint64_t seed);

// sqrt(alpha) y0 + sqrt(1 - alpha) z with y0 = invert(lifted_y) and
// z ~ N(0, I) drawn from `seed`. Returns [1, d].
Tensor dflow_init(const Tensor& lifted_y, double alpha, const flow::VelocityModel& velocity,
                  std::size_t steps, std::uint64_t seed);

// Plug-in (random seed) or D-Flow (inverted-measurement seed plus
// lambda * chi2_nll) optimization of the generator input.
SolveResult solve_plugin(const Tensor& y, const degrade::ForwardOperator& op,
                         const flow::FlowModel& model, const SolverConfig& cfg);

// Warm-up: jointly learns z and t, starting generation at t from
// alpha_t lift(y) + beta_t z. `table` may be null, in which case it is
// estimated from cfg.n_cal and cfg.cal_seed.
SolveResult solve_fmplug_w(const Tensor& y, const degrade::ForwardOperator& op,
                           const flow::FlowModel& model, const SolverConfig& cfg,
                           const VarianceTable* table = nullptr);

// solve_fmplug_w with z projected onto the radius-sqrt(d) sphere at
// initialization and after every update.
SolveResult solve_fmplug_wr(const Tensor& y, const degrade::ForwardOperator& op,
                            const flow::FlowModel& model, const SolverConfig& cfg,
                            const VarianceTable* table = nullptr);

// Euler generation with data-fidelity gradient steps after each step.
SolveResult solve_interleaving(const Tensor& y, const degrade::ForwardOperator& op,
                               const flow::FlowModel& model, const SolverConfig& cfg);

// Dispatches on cfg.method.
SolveResult solve(const Tensor& y, const degrade::ForwardOperator& op, const flow::FlowModel& model,
                  const SolverConfig& cfg, const VarianceTable* table = nullptr);

}  // namespace fmplug::solve
