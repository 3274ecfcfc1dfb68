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

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fmplug/errors.hpp"
#include "fmplug/ode.hpp"
#include "fmplug/optim.hpp"
#include "fmplug/random.hpp"
#include "fmplug/solve.hpp"

namespace fmplug::solve {
namespace {

using Clock = std::chrono::steady_clock;

// sigmoid(30) is still strictly below 1 in double precision.
constexpr double kTauLimit = 30.0;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

double norm(std::span<const double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  return std::sqrt(ss);
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

num::AdamSettings adam_settings(const SolverConfig& cfg) {
  return {cfg.lr, cfg.beta1, cfg.beta2, cfg.epsilon};
}

Tensor data_loss(const degrade::ForwardOperator& op, const Tensor& x, const Tensor& y) {
  return num::sum(num::square(op.apply(x) - y));
}

void check_measurement(const Tensor& y, const degrade::ForwardOperator& op,
                       const flow::FlowModel& model) {
  if (y.size() != num::numel(op.measurement_shape())) {
    throw ShapeError("measurement shape " + num::to_string(y.shape()) + " does not match operator " +
                     num::to_string(op.measurement_shape()));
  }
  if (model.dim() != op.height() * op.width()) {
    throw ShapeError("model dimension " + std::to_string(model.dim()) +
                     " does not match operator image " + std::to_string(op.height()) + "x" +
                     std::to_string(op.width()));
  }
}

// Tracks the best-loss iterate.
struct Recorder {
  SolveResult result;
  double best = 0.0;

  void add(double loss, const Tensor& x, double seed_norm, std::optional<double> t,
           std::size_t iterate) {
    if (!std::isfinite(loss)) {
      throw NumericError("solver: non-finite loss at iterate " + std::to_string(iterate));
    }
    result.loss_trace.push_back(loss);
    result.seed_norm_trace.push_back(seed_norm);
    if (t) result.t_trace.push_back(*t);
    if (result.loss_trace.size() == 1 || loss < best) {
      best = loss;
      result.best_iteration = result.loss_trace.size() - 1;
      result.estimate = x.detach();
      result.learned_t = t;
    }
  }
};

Tensor as_image(const Tensor& x, const degrade::ForwardOperator& op) {
  return Tensor({op.height(), op.width()}, x.to_vector());
}

SolveResult solve_warm(const Tensor& y_in, const degrade::ForwardOperator& op,
                       const flow::FlowModel& model, const SolverConfig& cfg,
                       const VarianceTable* table, bool project) {
  cfg.validate();
  check_measurement(y_in, op, model);
  const auto start = Clock::now();
  const Tensor y = Tensor(op.measurement_shape(), y_in.to_vector());
  const std::size_t d = model.dim();
  const Tensor lifted = op.lift(y);

  VarianceTable own;
  if (cfg.calibration != Calibration::off && table == nullptr) {
    own = estimate_path_variance(*model.velocity, cfg.n_cal, cfg.steps, cfg.cal_seed);
    table = &own;
  }

  Rng rng(cfg.seed);
  WarmState state{rng.normals(d), std::log(cfg.t_init / (1.0 - cfg.t_init))};
  if (project) state.z = sphere_project(Tensor::vector(state.z)).to_vector();

  num::Adam adam(adam_settings(cfg), std::vector<std::size_t>{d, 1});
  std::vector<double> tau_block{state.tau};
  std::vector<double>* blocks[] = {&state.z, &tau_block};

  Recorder rec;
  std::optional<double> fixed_scale;
  num::Graph graph;
  const std::size_t evaluations = std::max<std::size_t>(cfg.iterations, 1);
  for (std::size_t e = 0; e < evaluations; ++e) {
    const Tensor z = graph.variable(Tensor({1, d}, state.z));
    const Tensor tau = graph.variable(Tensor::scalar(tau_block[0]));
    const Tensor t = num::sigmoid(tau);
    const double t_value = t.item();
    const Tensor z_t = model.path.alpha(t) * lifted + model.path.beta(t) * z;

    double scale = 1.0;
    if (cfg.calibration == Calibration::per_step ||
        (cfg.calibration == Calibration::init_only && !fixed_scale)) {
      const double var = scalar_variance(z_t.values());
      if (!(var > 0.0)) throw NumericError("warm-up state has zero variance");
      scale = std::sqrt(table->at(t_value) / var);
      if (cfg.calibration == Calibration::init_only) fixed_scale = scale;
    } else if (fixed_scale) {
      scale = *fixed_scale;
    }
    const Tensor x = ode::generate(*model.velocity, z_t * scale, t, cfg.steps);
    const Tensor loss = data_loss(op, x, y);
    rec.result.nfe += cfg.steps;
    rec.add(loss.item(), as_image(x, op), norm(state.z), t_value, e);
    if (cfg.iterations == 0) break;

    const auto grads = graph.backward(loss, {z, tau});
    std::span<const double> g[] = {grads[0].values(), grads[1].values()};
    adam.step(blocks, g);
    tau_block[0] = std::clamp(tau_block[0], -kTauLimit, kTauLimit);
    if (project) state.z = sphere_project(Tensor::vector(state.z)).to_vector();
  }
  state.tau = tau_block[0];
  rec.result.seconds = seconds_since(start);
  return std::move(rec.result);
}

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::interleave: return "interleave";
    case Method::plugin: return "plugin";
    case Method::dflow: return "dflow";
    case Method::fmplug_w: return "fmplug_w";
    case Method::fmplug_w_r: return "fmplug_w_r";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (auto m : {Method::interleave, Method::plugin, Method::dflow, Method::fmplug_w,
                 Method::fmplug_w_r}) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::string_view to_string(Calibration calibration) {
  switch (calibration) {
    case Calibration::off: return "off";
    case Calibration::per_step: return "per_step";
    case Calibration::init_only: return "init_only";
  }
  return "unknown";
}

std::optional<Calibration> parse_calibration(std::string_view name) {
  for (auto c : {Calibration::off, Calibration::per_step, Calibration::init_only}) {
    if (to_string(c) == name) return c;
  }
  return std::nullopt;
}

void SolverConfig::validate() const {
  if (steps == 0) throw std::invalid_argument("solver: steps (T) must be >= 1");
  if (method == Method::interleave) {
    if (!(lr >= 0.0)) throw std::invalid_argument("solver: interleave step size must be >= 0");
  } else if (!(lr > 0.0)) {
    throw std::invalid_argument("solver: lr must be > 0");
  }
  if (!(dflow_alpha >= 0.0 && dflow_alpha <= 1.0)) {
    throw std::invalid_argument("solver: dflow_alpha must lie in [0, 1]");
  }
  if (!(dflow_lambda >= 0.0)) throw std::invalid_argument("solver: dflow_lambda must be >= 0");
  if (n_cal < 2) throw std::invalid_argument("solver: n_cal must be >= 2");
  if (!(t_init > 0.0 && t_init < 1.0)) throw std::invalid_argument("solver: t_init must lie in (0, 1)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw std::invalid_argument("solver: invalid Adam moments");
  }
}

double WarmState::t() const { return sigmoid(tau); }

SolveResult solve_plugin(const Tensor& y_in, const degrade::ForwardOperator& op,
                         const flow::FlowModel& model, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.method != Method::plugin && cfg.method != Method::dflow) {
    throw std::invalid_argument("solve_plugin: method must be plugin or dflow");
  }
  check_measurement(y_in, op, model);
  const auto start = Clock::now();
  const Tensor y = Tensor(op.measurement_shape(), y_in.to_vector());
  const std::size_t d = model.dim();
  const bool dflow = cfg.method == Method::dflow;

  std::vector<double> z;
  if (dflow) {
    z = dflow_init(op.lift(y), cfg.dflow_alpha, *model.velocity, cfg.steps, cfg.seed).to_vector();
  } else {
    Rng rng(cfg.seed);
    z = rng.normals(d);
  }
  num::Adam adam(adam_settings(cfg), std::vector<std::size_t>{d});
  const Tensor t0 = Tensor::scalar(0.0);

  Recorder rec;
  num::Graph graph;
  const std::size_t evaluations = std::max<std::size_t>(cfg.iterations, 1);
  for (std::size_t e = 0; e < evaluations; ++e) {
    const Tensor zv = graph.variable(Tensor({1, d}, z));
    const Tensor x = ode::generate(*model.velocity, zv, t0, cfg.steps);
    Tensor loss = data_loss(op, x, y);
    if (dflow && cfg.dflow_lambda > 0.0) loss = loss + chi2_nll(zv) * cfg.dflow_lambda;
    rec.result.nfe += cfg.steps;
    rec.add(loss.item(), as_image(x, op), norm(z), std::nullopt, e);
    if (cfg.iterations == 0) break;
    const auto grads = graph.backward(loss, {zv});
    adam.step(z, grads[0].values());
  }
  rec.result.seconds = seconds_since(start);
  return std::move(rec.result);
}

SolveResult solve_fmplug_w(const Tensor& y, const degrade::ForwardOperator& op,
                           const flow::FlowModel& model, const SolverConfig& cfg,
                           const VarianceTable* table) {
  if (cfg.method != Method::fmplug_w) throw std::invalid_argument("solve_fmplug_w: method mismatch");
  return solve_warm(y, op, model, cfg, table, false);
}

SolveResult solve_fmplug_wr(const Tensor& y, const degrade::ForwardOperator& op,
                            const flow::FlowModel& model, const SolverConfig& cfg,
                            const VarianceTable* table) {
  if (cfg.method != Method::fmplug_w_r) {
    throw std::invalid_argument("solve_fmplug_wr: method mismatch");
  }
  return solve_warm(y, op, model, cfg, table, true);
}

SolveResult solve_interleaving(const Tensor& y_in, const degrade::ForwardOperator& op,
                               const flow::FlowModel& model, const SolverConfig& cfg) {
  cfg.validate();
  if (cfg.method != Method::interleave) {
    throw std::invalid_argument("solve_interleaving: method mismatch");
  }
  check_measurement(y_in, op, model);
  const auto start = Clock::now();
  const Tensor y = Tensor(op.measurement_shape(), y_in.to_vector());
  const std::size_t d = model.dim();
  Rng rng(cfg.seed);
  Tensor z({1, d}, rng.normals(d));
  const auto grid = ode::forward_grid(0.0, cfg.steps);
  const Tensor h = Tensor::scalar(grid.step);

  auto residual = [&](const Tensor& state) { return data_loss(op, state, y).item(); };

  SolveResult result;
  num::Graph graph;
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    z = ode::euler_step(*model.velocity, z, Tensor::scalar(grid.times[i]), h);
    ++result.nfe;
    if (!num::all_finite(z)) {
      throw NumericError("interleave: non-finite state after step " + std::to_string(i + 1));
    }
    for (std::size_t k = 0; cfg.lr > 0.0 && k < cfg.guidance_steps; ++k) {
      const Tensor zv = graph.variable(z);
      const Tensor f = data_loss(op, zv, y);
      const double current = f.item();
      const Tensor grad = graph.backward(f, {zv})[0];
      double eta = cfg.lr;
      Tensor candidate = z - grad * eta;
      if (cfg.descent_check) {
        constexpr int kMaxHalvings = 40;
        int halvings = 0;
        while (residual(candidate) > current && halvings < kMaxHalvings) {
          eta *= 0.5;
          candidate = z - grad * eta;
          ++halvings;
        }
        if (residual(candidate) > current) candidate = z;
      }
      z = candidate;
      result.guidance_trace.push_back({current, residual(z)});
    }
    result.loss_trace.push_back(residual(z));
    result.seed_norm_trace.push_back(norm(z.values()));
  }
  result.best_iteration = result.loss_trace.size() - 1;
  result.estimate = as_image(z, op);
  result.seconds = seconds_since(start);
  return result;
}

SolveResult solve(const Tensor& y, const degrade::ForwardOperator& op, const flow::FlowModel& model,
                  const SolverConfig& cfg, const VarianceTable* table) {
  switch (cfg.method) {
    case Method::interleave: return solve_interleaving(y, op, model, cfg);
    case Method::plugin:
    case Method::dflow: return solve_plugin(y, op, model, cfg);
    case Method::fmplug_w: return solve_fmplug_w(y, op, model, cfg, table);
    case Method::fmplug_w_r: return solve_fmplug_wr(y, op, model, cfg, table);
  }
  throw std::invalid_argument("unknown solver method");
}

}  // namespace fmplug::solve
