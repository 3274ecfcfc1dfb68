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
#include <memory>
#include <stdexcept>

#include "doctest.h"
#include "fmplug/bench.hpp"
#include "fmplug/errors.hpp"
#include "fmplug/ode.hpp"
#include "fmplug/random.hpp"
#include "fmplug/solve.hpp"
#include "support.hpp"

namespace num = fmplug::num;
using fmplug::Rng;
using fmplug::num::Tensor;
namespace ode = fmplug::ode;
namespace degrade = fmplug::degrade;
namespace flow = fmplug::flow;
namespace bench = fmplug::bench;
using fmplug::ShapeError;
using fmplug::NumericError;
using namespace fmplug::solve;
using fmplug::testing::ConstantField;
using fmplug::testing::fd_max_error;
using fmplug::testing::LinearField;
using fmplug::testing::normal_tensor;
using fmplug::testing::PointField;
using fmplug::testing::uniform_tensor;
using fmplug::testing::wrap;

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// Velocity-output MLP trained on the default 2D mixture.
const flow::FlowModel& mixture_model() {
  static const flow::FlowModel model = [] {
    flow::TrainSettings ts;
    ts.output = flow::Output::velocity;
    ts.steps = 2000;
    ts.adam.lr = 2e-3;
    ts.final_lr = 1e-5;
    return flow::train_fm(bench::make_gaussian_mixture({}), ts);
  }();
  return model;
}

// Small 4x4 smooth-image model for blur toys.
const flow::FlowModel& image_model() {
  static const flow::FlowModel model = [] {
    const auto data = bench::make_smooth_dataset(300, 8, 0.4, 3).as_matrix();
    flow::TrainSettings ts;
    ts.hidden = {32, 32};
    ts.steps = 400;
    ts.adam.lr = 2e-3;
    return flow::train_fm(data, ts);
  }();
  return model;
}

SolverConfig config(Method m, std::size_t iterations) {
  SolverConfig c;
  c.method = m;
  c.iterations = iterations;
  c.n_cal = 64;
  return c;
}

Tensor test_image(std::uint64_t seed) { return bench::make_smooth_dataset(1, 8, 0.4, seed).images[0]; }

}  // namespace

TEST_CASE("sphere_project examples") {
  const auto p = sphere_project(Tensor::vector({3.0, 4.0}));
  CHECK(p[0] == doctest::Approx(3.0 * std::sqrt(2.0) / 5.0).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(4.0 * std::sqrt(2.0) / 5.0).epsilon(1e-14));
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto z = uniform_tensor({17}, s);
    const auto once = sphere_project(z);
    CHECK(std::abs(norm(once.values()) - std::sqrt(17.0)) < 1e-9);
    const auto twice = sphere_project(once);
    const auto scaled = sphere_project(z * 3.7);
    for (std::size_t i = 0; i < 17; ++i) {
      CHECK(std::abs(twice[i] - once[i]) < 1e-12);
      CHECK(std::abs(scaled[i] - once[i]) < 1e-12);
    }
  }
  CHECK_THROWS_AS(sphere_project(Tensor::zeros({4})), std::invalid_argument);
}

TEST_CASE("chi2_nll examples") {
  const auto at = [](std::size_t d, double sq) {
    std::vector<double> z(d, 0.0);
    z[0] = std::sqrt(sq);
    return chi2_nll(Tensor::vector(z)).item();
  };
  CHECK(at(4, 2.0) == doctest::Approx(1.0 - std::log(2.0)).epsilon(1e-12));
  CHECK(at(4, 4.0) == doctest::Approx(2.0 - std::log(4.0)).epsilon(1e-12));
  CHECK(at(100, 98.0) <= at(100, 50.0));
  CHECK(at(100, 98.0) <= at(100, 200.0));
  CHECK_THROWS_AS(chi2_nll(Tensor::vector({1.0, 2.0})), std::invalid_argument);
  CHECK_THROWS_AS(chi2_nll(Tensor::zeros({5})), std::invalid_argument);

  // Depends only on |z|: a permutation with sign flips is orthogonal.
  const auto z = uniform_tensor({6}, 1);
  const auto zv = z.to_vector();
  const auto q = Tensor::vector({-zv[3], zv[0], zv[5], -zv[1], zv[2], zv[4]});
  CHECK(std::abs(chi2_nll(z).item() - chi2_nll(q).item()) < 1e-12);
  CHECK(fd_max_error([](const Tensor& x) { return chi2_nll(x); }, z) < 1e-4);
}

TEST_CASE("variance_calibrate examples") {
  const auto z = Tensor::vector({2.0, -2.0, 2.0, -2.0});  // variance 4
  CHECK(variance_calibrate(z, 1.0).to_vector() == std::vector<double>{1.0, -1.0, 1.0, -1.0});
  const auto r = uniform_tensor({30}, 2);
  const auto same = variance_calibrate(r, scalar_variance(r.values()));
  for (std::size_t i = 0; i < 30; ++i) CHECK(std::abs(same[i] - r[i]) < 1e-12);
  Rng rng(3);
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    const auto x = uniform_tensor({10}, 1000 + trial, -5.0, 5.0);
    const double target = 0.01 + 3.0 * rng.uniform();
    const double got = scalar_variance(variance_calibrate(x, target).values());
    CHECK(std::abs(got - target) / target < 1e-9);
  }
  CHECK_THROWS_AS(variance_calibrate(Tensor::full({5}, 0.3), 1.0), std::invalid_argument);
}

TEST_CASE("path variance table") {
  const ConstantField zero(std::vector<double>(8, 0.0));
  const auto flat = estimate_path_variance(zero, 512, 3, 1);
  REQUIRE(flat.times.size() == 4);
  for (double v : flat.variances) CHECK(v == doctest::Approx(1.0).epsilon(0.03));

  const PointField point(std::vector<double>(8, 0.4));
  const auto shrink = estimate_path_variance(point, 512, 4, 2);
  for (std::size_t i = 0; i + 1 < shrink.times.size(); ++i) {
    const double t = shrink.times[i];
    CHECK(shrink.variances[i] == doctest::Approx((1 - t) * (1 - t)).epsilon(0.03));
  }
  CHECK(shrink.at(0.125) == doctest::Approx(0.5 * (shrink.variances[0] + shrink.variances[1])));
  CHECK(shrink.at(-1.0) == shrink.variances.front());
  CHECK(shrink.at(2.0) == shrink.variances.back());
  CHECK(SolverConfig{}.n_cal == 512);
  CHECK_THROWS_AS(estimate_path_variance(zero, 1, 3, 1), std::invalid_argument);
}

TEST_CASE("dflow_init examples") {
  const LinearField lin(4);
  const auto y = Tensor({1, 4}, {0.5, -0.2, 1.0, 0.3});
  const auto y0 = ode::invert(lin, y, 3);
  CHECK(dflow_init(y, 1.0, lin, 3, 9).to_vector() == y0.to_vector());
  Rng rng(9);
  CHECK(dflow_init(y, 0.0, lin, 3, 9).to_vector() == rng.normals(4));
  CHECK(dflow_init(y * 5.0, 0.0, lin, 3, 9).to_vector() == dflow_init(y, 0.0, lin, 3, 9).to_vector());
  CHECK_THROWS_AS(dflow_init(y, 1.5, lin, 3, 9), std::invalid_argument);

  const double alpha = 0.3;
  const std::size_t n = 10000;
  std::vector<double> mean(4, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const auto v = dflow_init(y, alpha, lin, 3, 100 + s);
    for (std::size_t i = 0; i < 4; ++i) mean[i] += v[i] / n;
  }
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(mean[i] - std::sqrt(alpha) * y0[i]) < 3.0 * std::sqrt((1 - alpha) / n));
  }
}

TEST_CASE("config validation") {
  SolverConfig c;
  c.steps = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.lr = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.method = Method::interleave;
  CHECK_NOTHROW(c.validate());
  c = {};
  c.dflow_alpha = 1.2;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = {};
  c.t_init = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  CHECK(parse_method("fmplug_w_r") == Method::fmplug_w_r);
  CHECK_FALSE(parse_method("fmplug"));
  CHECK(parse_calibration("init_only") == Calibration::init_only);
}

TEST_CASE("plugin: known optimum gives zero loss at step 0") {
  const auto& model = mixture_model();
  const degrade::ForwardOperator id(degrade::Identity{}, 1, 2, 0.0);
  auto cfg = config(Method::plugin, 5);
  cfg.seed = 17;
  Rng rng(cfg.seed);
  const auto zstar = Tensor({1, 2}, rng.normals(2));
  const auto y = Tensor({1, 2}, ode::generate(*model.velocity, zstar, ode::IntegrationSpec{cfg.steps}).to_vector());
  const auto r = solve_plugin(y, id, model, cfg);
  CHECK(r.loss_trace.at(0) == 0.0);
  CHECK(r.best_iteration == 0);
  CHECK(r.loss_trace.size() == 5);
  CHECK(r.nfe == 5 * cfg.steps);
  CHECK_FALSE(r.learned_t);
}

TEST_CASE("plugin on a trained 2D model drives the residual down") {
  const auto& model = mixture_model();
  const degrade::ForwardOperator id(degrade::Identity{}, 1, 2, 0.0);
  const auto y = Tensor({1, 2}, {2.9, 2.1});
  for (auto m : {Method::plugin, Method::dflow}) {
    auto cfg = config(m, 300);
    cfg.lr = 5e-2;
    cfg.dflow_lambda = 0.0;
    const auto r = solve(y, id, model, cfg);
    CHECK(r.best_loss() <= r.loss_trace.front());
    CHECK(r.best_loss() < 1e-2);
    CHECK(r.loss_trace.size() == 300);
  }
}

TEST_CASE("plug-in family improves measurement feasibility on a blur toy") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.0);
  const auto y = blur.observe(test_image(21), 0);
  for (auto m : {Method::plugin, Method::dflow, Method::fmplug_w, Method::fmplug_w_r}) {
    CAPTURE(to_string(m));
    const auto r = solve(y, blur, model, config(m, 60));
    CHECK(r.loss_trace.size() == 60);
    CHECK(r.best_loss() < r.loss_trace.front());
    CHECK(r.estimate.shape() == num::Shape{8, 8});
    const double residual = num::sum(num::square(blur.apply(r.estimate) - y)).item();
    // dflow records the chi-square term as part of its loss.
    if (m != Method::dflow) CHECK(residual == doctest::Approx(r.best_loss()).epsilon(1e-9));
  }
}

TEST_CASE("solvers are bitwise deterministic") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.03);
  const auto y = blur.observe(test_image(22), 5);
  for (auto m : {Method::interleave, Method::plugin, Method::dflow, Method::fmplug_w, Method::fmplug_w_r}) {
    CAPTURE(to_string(m));
    auto cfg = config(m, 10);
    if (m == Method::interleave) cfg.lr = 0.1;
    const auto a = solve(y, blur, model, cfg), b = solve(y, blur, model, cfg);
    CHECK(a.estimate.to_vector() == b.estimate.to_vector());
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.t_trace == b.t_trace);
    cfg.seed = 1;
    CHECK(solve(y, blur, model, cfg).estimate.to_vector() != a.estimate.to_vector());
  }
}

TEST_CASE("fmplug_w: t -> 1 shortcut reproduces the measurement") {
  const auto& model = image_model();
  const degrade::ForwardOperator id(degrade::Identity{}, 8, 8, 0.0);
  const auto y = test_image(23);
  auto cfg = config(Method::fmplug_w, 0);
  cfg.calibration = Calibration::off;
  cfg.t_init = 1.0 - 1e-9;
  const auto r = solve_fmplug_w(y, id, model, cfg);
  CHECK(r.loss_trace.size() == 1);
  CHECK(r.best_loss() < 1e-6);
}

TEST_CASE("fmplug_w learns t strictly inside (0, 1)") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.03);
  const auto y = blur.observe(test_image(24), 1);
  for (auto cal : {Calibration::off, Calibration::per_step, Calibration::init_only}) {
    auto cfg = config(Method::fmplug_w, 40);
    cfg.calibration = cal;
    cfg.lr = 0.5;
    const auto r = solve_fmplug_w(y, blur, model, cfg);
    REQUIRE(r.learned_t);
    CHECK(*r.learned_t > 0.0);
    CHECK(*r.learned_t < 1.0);
    CHECK(r.t_trace.size() == 40);
    for (double t : r.t_trace) CHECK((t > 0.0 && t < 1.0));
  }
  CHECK_THROWS_AS(solve_fmplug_w(y, blur, model, config(Method::plugin, 1)), std::invalid_argument);
}

TEST_CASE("fmplug_w_r keeps the seed on the sphere") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.03);
  const auto y = blur.observe(test_image(25), 2);
  const auto r = solve_fmplug_wr(y, blur, model, config(Method::fmplug_w_r, 30));
  REQUIRE(r.seed_norm_trace.size() == 30);
  for (double n : r.seed_norm_trace) CHECK(std::abs(n - 8.0) < 1e-9);
}

TEST_CASE("fmplug_w_r with E = 0 evaluates the projected initialization") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.0);
  const auto y = blur.observe(test_image(26), 0);
  auto cfg = config(Method::fmplug_w_r, 0);
  cfg.calibration = Calibration::off;
  const auto r = solve_fmplug_wr(y, blur, model, cfg);

  Rng rng(cfg.seed);
  const auto z = sphere_project(Tensor({1, 64}, rng.normals(64)));
  const double t = cfg.t_init;
  const auto zt = blur.lift(y) * t + z * (1.0 - t);
  const auto x = ode::generate(*model.velocity, zt, ode::IntegrationSpec{cfg.steps, t});
  for (std::size_t i = 0; i < 64; ++i) CHECK(r.estimate[i] == doctest::Approx(x[i]).epsilon(1e-12));
}

TEST_CASE("fmplug_w objective gradient wrt tau matches central differences") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.0);
  const auto y = blur.observe(test_image(27), 0);
  const auto lifted = blur.lift(y);
  const auto z = normal_tensor({1, 64}, 28);
  const double scale = 0.9;  // calibration factor held constant
  auto f = [&](const Tensor& tau) {
    const auto t = num::sigmoid(tau);
    const auto zt = (t * lifted + (1.0 - t) * z) * scale;
    return num::sum(num::square(blur.apply(ode::generate(*model.velocity, zt, t, 3)) - y));
  };
  CHECK(fd_max_error(f, Tensor::scalar(0.4)) < 1e-3);
}

TEST_CASE("interleave with zero step size is plain generation") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.03);
  const auto y = blur.observe(test_image(29), 3);
  auto cfg = config(Method::interleave, 1);
  cfg.lr = 0.0;
  cfg.seed = 44;
  const auto r = solve_interleaving(y, blur, model, cfg);
  Rng rng(cfg.seed);
  const auto x = ode::generate(*model.velocity, Tensor({1, 64}, rng.normals(64)),
                               ode::IntegrationSpec{cfg.steps});
  CHECK(r.estimate.to_vector() == x.to_vector());
  CHECK(r.nfe == cfg.steps);
  CHECK(r.guidance_trace.empty());
}

TEST_CASE("interleave guidance steps never increase the residual") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.03);
  const auto y = blur.observe(test_image(30), 4);
  for (double lr : {0.05, 1.0, 50.0}) {
    auto cfg = config(Method::interleave, 1);
    cfg.lr = lr;
    cfg.guidance_steps = 3;
    const auto r = solve_interleaving(y, blur, model, cfg);
    CHECK(r.nfe == cfg.steps);
    CHECK(r.guidance_trace.size() == 3 * cfg.steps);
    for (const auto& [before, after] : r.guidance_trace) CHECK(after <= before);
  }
}

TEST_CASE("solver input validation") {
  const auto& model = image_model();
  const degrade::ForwardOperator blur(degrade::GaussianBlur{3, 0.8}, 8, 8, 0.0);
  const degrade::ForwardOperator wrong(degrade::Identity{}, 4, 4, 0.0);
  CHECK_THROWS_AS(solve(Tensor::zeros({4, 4}), blur, model, config(Method::plugin, 1)), ShapeError);
  CHECK_THROWS_AS(solve(Tensor::zeros({4, 4}), wrong, model, config(Method::plugin, 1)), ShapeError);
  const auto blowup = wrap(std::make_shared<ConstantField>(std::vector<double>(64, 1e200)));
  CHECK_THROWS_AS(solve(Tensor::zeros({8, 8}), blur, blowup, config(Method::plugin, 2)), NumericError);
}
