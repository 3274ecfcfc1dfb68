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

#include "fmplug/flow.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "fmplug/errors.hpp"
#include "fmplug/random.hpp"

namespace fmplug::flow {

using num::Shape;

std::string_view to_string(Output output) {
  return output == Output::data ? "data" : "velocity";
}

std::optional<Output> parse_output(std::string_view name) {
  if (name == "data") return Output::data;
  if (name == "velocity") return Output::velocity;
  return std::nullopt;
}

std::vector<std::size_t> MlpSpec::widths() const {
  std::vector<std::size_t> w;
  w.push_back(dim + time_features);
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(dim);
  return w;
}

std::size_t MlpSpec::parameter_count() const {
  const auto w = widths();
  std::size_t n = 0;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) n += w[l] * w[l + 1] + w[l + 1];
  return n;
}

Tensor time_embedding(const Tensor& t, std::size_t batch, std::size_t features) {
  if (features == 0) return {};
  if (features % 2 != 0) throw std::invalid_argument("time_features must be even");
  Tensor column;
  if (t.size() == 1) {
    column = num::broadcast_to(t, {batch, 1});
  } else if (t.shape() == Shape{batch, 1}) {
    column = t;
  } else {
    throw ShapeError("time input " + num::to_string(t.shape()) + " does not fit batch " +
                     std::to_string(batch));
  }
  const std::size_t half = features / 2;
  std::vector<double> freqs(half);
  for (std::size_t k = 0; k < half; ++k) freqs[k] = std::numbers::pi * std::ldexp(1.0, static_cast<int>(k));
  const Tensor phase = num::matmul(column, Tensor({1, half}, freqs));
  return num::concat({num::sin(phase), num::cos(phase)}, 1);
}

MlpVelocity::MlpVelocity(MlpSpec spec, std::vector<Tensor> parameters)
    : spec_(std::move(spec)), params_(std::move(parameters)) {
  if (spec_.dim == 0) throw std::invalid_argument("velocity dimension must be positive");
  const auto shapes = parameter_shapes();
  if (shapes.size() != params_.size()) {
    throw ShapeError("MLP expects " + std::to_string(shapes.size()) + " parameter tensors, got " +
                     std::to_string(params_.size()));
  }
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    if (params_[i].shape() != shapes[i]) {
      throw ShapeError("MLP parameter " + std::to_string(i) + " has shape " +
                       num::to_string(params_[i].shape()) + ", expected " +
                       num::to_string(shapes[i]));
    }
  }
}

std::vector<Shape> MlpVelocity::parameter_shapes() const {
  const auto w = spec_.widths();
  std::vector<Shape> shapes;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    shapes.push_back({w[l], w[l + 1]});
    shapes.push_back({1, w[l + 1]});
  }
  return shapes;
}

MlpVelocity MlpVelocity::initialize(const MlpSpec& spec, std::uint64_t seed) {
  Rng rng(seed);
  const auto w = spec.widths();
  std::vector<Tensor> params;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    const double scale = std::sqrt(2.0 / static_cast<double>(w[l] + w[l + 1]));
    auto weights = rng.normals(w[l] * w[l + 1]);
    for (auto& v : weights) v *= scale;
    params.emplace_back(Shape{w[l], w[l + 1]}, std::move(weights));
    params.push_back(Tensor::zeros({1, w[l + 1]}));
  }
  return MlpVelocity(spec, std::move(params));
}

MlpVelocity MlpVelocity::zeros(const MlpSpec& spec) {
  const auto w = spec.widths();
  std::vector<Tensor> params;
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    params.push_back(Tensor::zeros({w[l], w[l + 1]}));
    params.push_back(Tensor::zeros({1, w[l + 1]}));
  }
  return MlpVelocity(spec, std::move(params));
}

MlpVelocity MlpVelocity::with_parameters(std::vector<Tensor> parameters) const {
  return MlpVelocity(spec_, std::move(parameters));
}

Tensor MlpVelocity::velocity(const Tensor& z, const Tensor& t) const {
  if (z.rank() != 2 || z.shape()[1] != spec_.dim) {
    throw ShapeError("velocity input " + num::to_string(z.shape()) + " is not [batch, " +
                     std::to_string(spec_.dim) + "]");
  }
  const std::size_t batch = z.shape()[0];
  Tensor h = spec_.time_features ? num::concat({z, time_embedding(t, batch, spec_.time_features)}, 1)
                                 : z;
  const Tensor ones = Tensor::full({batch, 1}, 1.0);
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    h = num::matmul(h, params_[2 * l]) + num::matmul(ones, params_[2 * l + 1]);
    if (l + 1 < layers) h = num::tanh(h);
  }
  if (spec_.output == Output::velocity) return h;
  const Tensor gap = num::clamp_min(1.0 - (t.size() == 1 ? num::broadcast_to(t, {batch, 1}) : t),
                                    kDataGapFloor);
  return (h - z) * num::matmul(num::reciprocal(gap), Tensor::full({1, spec_.dim}, 1.0));
}

Tensor interpolate(const PathSchedule& path, const Tensor& x, const Tensor& z, double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw std::invalid_argument("interpolate: t = " + std::to_string(t) + " outside [0, 1]");
  }
  if (x.shape() != z.shape()) {
    throw ShapeError("interpolate: " + num::to_string(x.shape()) + " vs " +
                     num::to_string(z.shape()));
  }
  return x * path.alpha(t) + z * path.beta(t);
}

Tensor target_velocity(const Tensor& x, const Tensor& z) {
  if (x.shape() != z.shape()) {
    throw ShapeError("target_velocity: " + num::to_string(x.shape()) + " vs " +
                     num::to_string(z.shape()));
  }
  return x - z;
}

Tensor fm_loss(const VelocityModel& velocity, const Tensor& x, const Tensor& z, const Tensor& t,
               const PathSchedule& path) {
  if (x.rank() != 2 || x.shape()[0] == 0) throw std::invalid_argument("fm_loss: empty batch");
  if (x.shape() != z.shape()) {
    throw ShapeError("fm_loss: batch " + num::to_string(x.shape()) + " vs seeds " +
                     num::to_string(z.shape()));
  }
  const std::size_t batch = x.shape()[0], d = x.shape()[1];
  if (t.shape() != Shape{batch, 1}) {
    throw ShapeError("fm_loss: times must be [" + std::to_string(batch) + ", 1], got " +
                     num::to_string(t.shape()));
  }
  // Per-row times spread across the d columns.
  const Tensor rows = num::matmul(t, Tensor::full({1, d}, 1.0));
  const Tensor zt = path.alpha(rows) * x + path.beta(rows) * z;
  const Tensor residual = velocity.velocity(zt, t) - target_velocity(x, z);
  return num::sum(num::square(residual)) * (1.0 / static_cast<double>(batch));
}

namespace {

struct Batch {
  Tensor x, z, t;
};

Batch draw_batch(const Tensor& data, std::size_t batch, Rng& rng) {
  const std::size_t count = data.shape()[0], d = data.shape()[1];
  std::vector<double> x(batch * d), z(batch * d), t(batch);
  const auto src = data.values();
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = rng.index(count);
    std::copy_n(src.begin() + static_cast<std::ptrdiff_t>(row * d), d, x.begin() + b * d);
  }
  for (auto& v : z) v = rng.normal();
  for (auto& v : t) v = rng.uniform();
  return {Tensor({batch, d}, std::move(x)), Tensor({batch, d}, std::move(z)),
          Tensor({batch, 1}, std::move(t))};
}

void check_dataset(const Tensor& data) {
  if (data.rank() != 2 || data.shape()[0] == 0) {
    throw std::invalid_argument("training data must be a non-empty [count, d] tensor");
  }
}

bool plateau(const std::vector<double>& trace) {
  constexpr std::size_t kBlock = 100;
  const std::size_t start = trace.size() / 2;
  double previous = 0.0;
  bool have = false;
  for (std::size_t b = start; b + kBlock <= trace.size(); b += kBlock) {
    double s = 0.0;
    for (std::size_t i = b; i < b + kBlock; ++i) s += trace[i];
    const double m = s / kBlock;
    if (have && m > previous) return true;
    previous = m;
    have = true;
  }
  return false;
}

}  // namespace

FlowModel train_fm(const Tensor& data, const TrainSettings& settings) {
  check_dataset(data);
  if (settings.batch == 0) throw std::invalid_argument("batch size must be positive");
  MlpSpec spec{data.shape()[1], settings.hidden, settings.time_features, settings.output};
  const auto init = MlpVelocity::initialize(spec, settings.seed);

  std::vector<std::vector<double>> params;
  std::vector<std::size_t> sizes;
  for (const auto& p : init.parameters()) {
    params.push_back(p.to_vector());
    sizes.push_back(p.size());
  }
  const auto shapes = init.parameter_shapes();
  num::Adam adam(settings.adam, sizes);
  // Separate streams for initialization and minibatches.
  Rng rng(mix_seed(settings.seed, 0x5eed));

  TrainingMeta meta;
  meta.seed = settings.seed;
  meta.steps = settings.steps;
  meta.loss_trace.reserve(settings.steps);

  num::Graph graph;
  std::vector<Tensor> attached(params.size());
  std::vector<std::vector<double>*> slots;
  for (auto& p : params) slots.push_back(&p);
  if (settings.final_lr < 0.0 || settings.final_lr > settings.adam.lr) {
    throw std::invalid_argument("final_lr must lie in [0, lr]");
  }
  for (std::size_t step = 0; step < settings.steps; ++step) {
    if (settings.final_lr > 0.0 && settings.steps > 1) {
      const double frac = static_cast<double>(step) / static_cast<double>(settings.steps - 1);
      adam.set_lr(settings.final_lr + 0.5 * (settings.adam.lr - settings.final_lr) *
                                          (1.0 + std::cos(std::numbers::pi * frac)));
    }
    const auto batch = draw_batch(data, settings.batch, rng);
    for (std::size_t i = 0; i < params.size(); ++i) {
      attached[i] = graph.variable(Tensor(shapes[i], params[i]));
    }
    const auto model = init.with_parameters(attached);
    const Tensor loss = fm_loss(model, batch.x, batch.z, batch.t);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericError("fm training: non-finite loss at step " + std::to_string(step) +
                         " (learning rate too high?)");
    }
    meta.loss_trace.push_back(value);
    const auto grads = graph.backward(loss, attached);
    std::vector<std::span<const double>> gspans;
    for (const auto& g : grads) gspans.push_back(g.values());
    adam.step(slots, gspans);
    if (settings.on_step) settings.on_step(step, value);
  }
  meta.plateau_warning = plateau(meta.loss_trace);

  std::vector<Tensor> final_params;
  for (std::size_t i = 0; i < params.size(); ++i) final_params.emplace_back(shapes[i], params[i]);
  FlowModel model;
  model.velocity = std::make_shared<const MlpVelocity>(spec, std::move(final_params));
  model.meta = std::move(meta);
  return model;
}

double evaluate_fm_loss(const VelocityModel& velocity, const Tensor& data, std::size_t samples,
                        std::uint64_t seed) {
  check_dataset(data);
  Rng rng(seed);
  const auto batch = draw_batch(data, samples, rng);
  return fm_loss(velocity, batch.x, batch.z, batch.t).item();
}

}  // namespace fmplug::flow
