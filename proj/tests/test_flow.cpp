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
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "fmplug/errors.hpp"
#include "fmplug/flow.hpp"
#include "fmplug/ode.hpp"
#include "support.hpp"

using namespace fmplug;
using namespace fmplug::flow;
using fmplug::testing::ConstantField;
using fmplug::testing::fd_max_error;
using fmplug::testing::normal_tensor;
using fmplug::testing::uniform_tensor;

TEST_CASE("linear path schedule endpoints") {
  PathSchedule p;
  CHECK(p.alpha(0.0) == 0.0);
  CHECK(p.alpha(1.0) == 1.0);
  CHECK(p.beta(0.0) == 1.0);
  CHECK(p.beta(1.0) == 0.0);
}

TEST_CASE("interpolate examples") {
  const auto x = Tensor::vector({1.0, 1.0});
  const auto z = Tensor::vector({0.0, 0.0});
  const auto x2 = Tensor::vector({0.3, -2.0});
  const auto z2 = Tensor::vector({1.5, 4.0});
  CHECK(interpolate({}, x2, z2, 0.0).to_vector() == z2.to_vector());
  CHECK(interpolate({}, x2, z2, 1.0).to_vector() == x2.to_vector());
  CHECK(interpolate({}, x, z, 0.25).to_vector() == std::vector<double>{0.25, 0.25});
  CHECK_THROWS_AS(interpolate({}, x, z, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(interpolate({}, x, z, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(interpolate({}, x, Tensor::vector({1, 2, 3}), 0.5), ShapeError);
}

TEST_CASE("interpolate is linear in x and z") {
  const auto x1 = uniform_tensor({4}, 1), x2 = uniform_tensor({4}, 2), z = uniform_tensor({4}, 3);
  const auto lhs = interpolate({}, x1 * 2.0 + x2 * -3.0, z, 0.3);
  const auto rhs = interpolate({}, x1, z, 0.3) * 2.0 + interpolate({}, x2, z, 0.3) * -3.0 - z * (0.7 * -2.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(lhs[i] == doctest::Approx(rhs[i]).epsilon(1e-12));
}

TEST_CASE("target_velocity examples") {
  CHECK(target_velocity(Tensor::vector({2, 0}), Tensor::vector({0, 2})).to_vector() ==
        std::vector<double>{2, -2});
  const auto x = Tensor::vector({0.5, 0.25});
  CHECK(target_velocity(x, x).to_vector() == std::vector<double>{0, 0});
  CHECK(target_velocity(Tensor::vector({1, 2, 3}), Tensor::zeros({3})).to_vector() ==
        std::vector<double>{1, 2, 3});
  CHECK_THROWS_AS(target_velocity(x, Tensor::zeros({3})), ShapeError);
}

TEST_CASE("mlp architecture") {
  MlpSpec spec{6, {128, 128}, 8};
  CHECK(spec.widths() == std::vector<std::size_t>{14, 128, 128, 6});
  const auto m = MlpVelocity::initialize(spec, 1);
  std::size_t n = 0;
  for (const auto& p : m.parameters()) n += p.size();
  CHECK(n == spec.parameter_count());
  const auto v = m.velocity(Tensor::zeros({5, 6}), Tensor::scalar(0.3));
  CHECK(v.shape() == num::Shape{5, 6});
  CHECK_THROWS_AS(m.velocity(Tensor::zeros({5, 7}), Tensor::scalar(0.3)), ShapeError);
  CHECK_THROWS_AS(MlpVelocity(spec, {}), ShapeError);
  CHECK(time_embedding(Tensor::scalar(0.5), 3, 8).shape() == num::Shape{3, 8});
}

TEST_CASE("fm_loss examples") {
  const auto x = Tensor({1, 2}, {1.0, 0.0});
  const auto z = Tensor({1, 2}, {0.0, 0.0});
  const auto t = Tensor({1, 1}, {0.37});
  // Hard-wired oracle returning x - z.
  CHECK(fm_loss(ConstantField({1.0, 0.0}), x, z, t).item() == 0.0);
  // Zero-initialized velocity-output network.
  MlpSpec spec{2, {16}, 8, Output::velocity};
  const auto zero = MlpVelocity::zeros(spec);
  for (double tv : {0.0, 0.4, 0.99}) {
    CHECK(fm_loss(zero, x, z, Tensor({1, 1}, {tv})).item() == doctest::Approx(1.0));
  }
  CHECK_THROWS_AS(fm_loss(zero, Tensor::zeros({0, 2}), Tensor::zeros({0, 2}), Tensor::zeros({0, 1})),
                  std::invalid_argument);
  CHECK(fm_loss(MlpVelocity::initialize(spec, 3), normal_tensor({4, 2}, 1), normal_tensor({4, 2}, 2),
                uniform_tensor({4, 1}, 3, 0.0, 1.0))
            .item() >= 0.0);
}

TEST_CASE("data output converts the prediction to a velocity") {
  MlpSpec spec{3, {8}, 4, Output::data};
  const auto m = MlpVelocity::initialize(spec, 4);
  MlpSpec vspec = spec;
  vspec.output = Output::velocity;
  const MlpVelocity raw(vspec, std::vector<Tensor>(m.parameters().begin(), m.parameters().end()));
  const auto z = normal_tensor({2, 3}, 5);
  for (double t : {0.2, 0.9, 0.99}) {
    const auto v = m.velocity(z, Tensor::scalar(t));
    const auto xhat = raw.velocity(z, Tensor::scalar(t));
    const double gap = std::max(1.0 - t, kDataGapFloor);
    for (std::size_t i = 0; i < 6; ++i) CHECK(v[i] == doctest::Approx((xhat[i] - z[i]) / gap));
  }
}

TEST_CASE("fm_loss gradient wrt parameters matches central differences on a width-8 net") {
  for (auto output : {Output::velocity, Output::data}) {
    MlpSpec spec{3, {8}, 4, output};
    const auto m = MlpVelocity::initialize(spec, 7);
    const auto x = uniform_tensor({4, 3}, 8), z = normal_tensor({4, 3}, 9);
    const auto t = uniform_tensor({4, 1}, 10, 0.0, 0.9);
    const auto params = std::vector<Tensor>(m.parameters().begin(), m.parameters().end());
    for (std::size_t k = 0; k < params.size(); ++k) {
      CAPTURE(k);
      auto f = [&](const Tensor& p) {
        auto ps = params;
        ps[k] = p;
        return fm_loss(m.with_parameters(ps), x, z, t);
      };
      CHECK(fd_max_error(f, k % 2 ? uniform_tensor(params[k].shape(), 11 + k) : params[k]) < 1e-4);
    }
  }
}

TEST_CASE("training is deterministic per seed") {
  const auto data = uniform_tensor({50, 2}, 12);
  TrainSettings ts;
  ts.hidden = {16};
  ts.steps = 30;
  ts.batch = 8;
  ts.seed = 5;
  const auto a = train_fm(data, ts), b = train_fm(data, ts);
  ts.seed = 6;
  const auto c = train_fm(data, ts);
  REQUIRE(a.mlp());
  for (std::size_t k = 0; k < a.mlp()->parameters().size(); ++k) {
    CHECK(a.mlp()->parameters()[k].to_vector() == b.mlp()->parameters()[k].to_vector());
  }
  CHECK(a.meta.loss_trace == b.meta.loss_trace);
  CHECK(a.meta.loss_trace != c.meta.loss_trace);
  CHECK(a.meta.loss_trace.size() == 30);
  CHECK(a.meta.seed == 5);
  CHECK(a.dim() == 2);
}

TEST_CASE("non-finite training loss aborts with a diagnostic") {
  const auto data = Tensor::full({4, 2}, 1e200);
  TrainSettings ts;
  ts.hidden = {4};
  ts.steps = 5;
  CHECK_THROWS_AS(train_fm(data, ts), NumericError);
  CHECK_THROWS_AS(train_fm(Tensor::zeros({0, 2}), ts), std::invalid_argument);
}

TEST_CASE("single-point dataset: samples land near the point") {
  const std::vector<double> x0{0.7, -1.2};
  const auto data = Tensor({1, 2}, x0);
  TrainSettings ts;
  ts.hidden = {64, 64};
  ts.output = Output::velocity;
  ts.steps = 1500;
  ts.adam.lr = 2e-3;
  ts.final_lr = 1e-5;
  const auto model = train_fm(data, ts);
  const std::size_t seeds = 200;
  const auto x = ode::generate(*model.velocity, normal_tensor({seeds, 2}, 13), ode::IntegrationSpec{20});
  std::size_t hits = 0;
  for (std::size_t s = 0; s < seeds; ++s) {
    const double dx = x[2 * s] - x0[0], dy = x[2 * s + 1] - x0[1];
    if (std::sqrt(dx * dx + dy * dy) <= 0.1 * std::sqrt(2.0)) ++hits;
  }
  CHECK(static_cast<double>(hits) / seeds >= 0.9);
}

TEST_CASE("evaluate_fm_loss is deterministic and lower after training") {
  const auto data = uniform_tensor({100, 2}, 14, 0.0, 1.0);
  TrainSettings ts;
  ts.hidden = {32};
  ts.output = Output::velocity;
  ts.steps = 300;
  ts.adam.lr = 3e-3;
  const auto model = train_fm(data, ts);
  const auto init = MlpVelocity::initialize({2, {32}, 8, Output::velocity}, ts.seed);
  const double before = evaluate_fm_loss(init, data, 512, 1);
  const double after = evaluate_fm_loss(*model.velocity, data, 512, 1);
  CHECK(after == evaluate_fm_loss(*model.velocity, data, 512, 1));
  CHECK(after < before);
}
