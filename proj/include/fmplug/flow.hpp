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

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "fmplug/optim.hpp"
#include "fmplug/tensor.hpp"

namespace fmplug::flow {

using num::Tensor;

enum class PathKind { linear };

/// Interpolation path z_t = alpha(t) x + beta(t) z between seed z (t = 0)
/// and data x (t = 1).
struct PathSchedule {
  PathKind kind = PathKind::linear;

  double alpha(double t) const { return t; }
  double beta(double t) const { return 1.0 - t; }
  Tensor alpha(const Tensor& t) const { return t * 1.0; }
  Tensor beta(const Tensor& t) const { return 1.0 - t; }
};

/// A velocity field v(z, t). `z` is [batch, d]; `t` is either [batch, 1] or
/// a single element shared by the whole batch. Returns [batch, d].
class VelocityModel {
 public:
  virtual ~VelocityModel() = default;
  virtual std::size_t dim() const = 0;
  virtual Tensor velocity(const Tensor& z, const Tensor& t) const = 0;
};

// What the network output means. `data` predicts x and converts it to a
// velocity as (x_hat - z_t) / max(1 - t, kDataGapFloor), which keeps the
// full-rank -z_t / (1 - t) part of the target out of the hidden bottleneck.
enum class Output { velocity, data };

std::string_view to_string(Output output);
std::optional<Output> parse_output(std::string_view name);

inline constexpr double kDataGapFloor = 0.05;

struct MlpSpec {
  std::size_t dim = 0;
  std::vector<std::size_t> hidden{128, 128};
  std::size_t time_features = 8;
  Output output = Output::data;

  // Layer widths including input (dim + time_features) and output (dim).
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;
};

// Sinusoidal time features [sin(w_k t), cos(w_k t)] with w_k = pi 2^k,
// k < features / 2. Returns [batch, features].
Tensor time_embedding(const Tensor& t, std::size_t batch, std::size_t features);

/// tanh MLP velocity field. Parameters are stored as W0, b0, W1, b1, ...
/// with W_l of shape [in, out] and b_l of shape [1, out].
class MlpVelocity final : public VelocityModel {
 public:
  MlpVelocity(MlpSpec spec, std::vector<Tensor> parameters);

  // Xavier-normal weights, zero biases.
  static MlpVelocity initialize(const MlpSpec& spec, std::uint64_t seed);
  static MlpVelocity zeros(const MlpSpec& spec);

  const MlpSpec& spec() const noexcept { return spec_; }
  std::span<const Tensor> parameters() const noexcept { return params_; }
  std::vector<num::Shape> parameter_shapes() const;
  // Same architecture, different (possibly graph-attached) parameters.
  MlpVelocity with_parameters(std::vector<Tensor> parameters) const;

  std::size_t dim() const override { return spec_.dim; }
  Tensor velocity(const Tensor& z, const Tensor& t) const override;

 private:
  MlpSpec spec_;
  std::vector<Tensor> params_;
};

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t steps = 0;
  std::vector<double> loss_trace;
  // Set when the 100-step block means of the final half of the loss trace
  // are not non-increasing.
  bool plateau_warning = false;
};

/// A trained prior: velocity field plus path schedule. Immutable once built;
/// share it freely across threads.
struct FlowModel {
  std::shared_ptr<const VelocityModel> velocity;
  PathSchedule path;
  TrainingMeta meta;

  std::size_t dim() const { return velocity->dim(); }
  // Null when the velocity is not an MlpVelocity.
  const MlpVelocity* mlp() const { return dynamic_cast<const MlpVelocity*>(velocity.get()); }
};

// alpha(t) x + beta(t) z. Throws std::invalid_argument for t outside [0, 1].
Tensor interpolate(const PathSchedule& path, const Tensor& x, const Tensor& z, double t);
// Conditional target velocity of the linear path, x - z.
Tensor target_velocity(const Tensor& x, const Tensor& z);

// Mean over the batch of |v(z_t, t) - (x - z)|^2. `x` and `z` are [batch, d],
// `t` is [batch, 1]. Differentiable with respect to anything attached.
Tensor fm_loss(const VelocityModel& velocity, const Tensor& x, const Tensor& z, const Tensor& t,
               const PathSchedule& path = {});

struct TrainSettings {
  std::vector<std::size_t> hidden{128, 128};
  std::size_t time_features = 8;
  Output output = Output::data;
  num::AdamSettings adam{};
  std::size_t steps = 2000;
  std::size_t batch = 64;
  // When positive, the step size follows a cosine from adam.lr down to this
  // value at the last step; otherwise it stays constant.
  double final_lr = 0.0;
  std::uint64_t seed = 0;
  std::function<void(std::size_t step, double loss)> on_step;  // optional
};

// Trains an MlpVelocity on `data` ([count, d]). Throws NumericError when the
// loss turns non-finite.
FlowModel train_fm(const Tensor& data, const TrainSettings& settings);

// FM loss of `velocity` on `samples` draws (x, z, t) with a fixed seed; used
// to compare a model before and after training on identical draws.
double evaluate_fm_loss(const VelocityModel& velocity, const Tensor& data, std::size_t samples,
                        std::uint64_t seed);

}  // namespace fmplug::flow
