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

#include "fmplug/fmplug.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <filesystem>
#include <ios>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "fmplug/bench.hpp"
#include "fmplug/errors.hpp"
#include "fmplug/quality.hpp"

struct fmplug_config {
  fmplug::bench::ExperimentConfig cfg;
};

struct fmplug_model {
  fmplug::flow::FlowModel model;
};

struct fmplug_result {
  fmplug::bench::ResultRow row;
  fmplug::num::Tensor estimate;
};

namespace {

thread_local std::string g_last_error;

fmplug_status fail(fmplug_status status, const char* what) {
  g_last_error = what;
  return status;
}

// Maps the in-flight exception to a status code and records its message.
fmplug_status translate() {
  try {
    throw;
  } catch (const fmplug::ShapeError& e) {
    return fail(FMPLUG_SHAPE, e.what());
  } catch (const fmplug::NumericError& e) {
    return fail(FMPLUG_NUMERIC, e.what());
  } catch (const fmplug::FormatError& e) {
    return fail(FMPLUG_FORMAT, e.what());
  } catch (const std::ios_base::failure& e) {
    return fail(FMPLUG_IO, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(FMPLUG_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(FMPLUG_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(FMPLUG_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(FMPLUG_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(FMPLUG_INTERNAL, e.what());
  } catch (...) {
    return fail(FMPLUG_INTERNAL, "unknown error");
  }
}

template <class F>
fmplug_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return FMPLUG_OK;
  } catch (...) {
    return translate();
  }
}

#define FMPLUG_REQUIRE(cond, msg) \
  if (!(cond)) return fail(FMPLUG_INVALID_ARGUMENT, msg)

}  // namespace

extern "C" {

const char* fmplug_last_error(void) { return g_last_error.c_str(); }

const char* fmplug_version(void) { return "0.1.0"; }

fmplug_status fmplug_config_parse(const char* text, const char* base_dir, fmplug_config** out) {
  FMPLUG_REQUIRE(text && out, "null argument");
  return guarded([&] {
    const std::filesystem::path base = base_dir ? base_dir : std::filesystem::current_path();
    *out = new fmplug_config{fmplug::bench::parse_config(text, base)};
  });
}

fmplug_status fmplug_config_set_run_seed(fmplug_config* config, uint64_t seed) {
  FMPLUG_REQUIRE(config, "null argument");
  config->cfg.run.seed = seed;
  g_last_error.clear();
  return FMPLUG_OK;
}

fmplug_status fmplug_config_load(const char* path, fmplug_config** out) {
  FMPLUG_REQUIRE(path && out, "null argument");
  return guarded([&] { *out = new fmplug_config{fmplug::bench::load_config(path)}; });
}

void fmplug_config_free(fmplug_config* config) { delete config; }

fmplug_status fmplug_model_prepare(const fmplug_config* config, fmplug_train_callback callback,
                                   void* user, fmplug_model** out) {
  FMPLUG_REQUIRE(config && out, "null argument");
  return guarded([&] {
    std::function<void(std::size_t, double)> on_step;
    if (callback) on_step = [=](std::size_t step, double loss) { callback(step, loss, user); };
    *out = new fmplug_model{fmplug::bench::prepare_model(config->cfg, on_step)};
  });
}

fmplug_status fmplug_model_load(const char* path, fmplug_model** out) {
  FMPLUG_REQUIRE(path && out, "null argument");
  return guarded([&] { *out = new fmplug_model{fmplug::bench::load_checkpoint(path)}; });
}

fmplug_status fmplug_model_save(const fmplug_model* model, const char* path) {
  FMPLUG_REQUIRE(model && path, "null argument");
  return guarded([&] { fmplug::bench::save_checkpoint(model->model, path); });
}

size_t fmplug_model_dim(const fmplug_model* model) { return model ? model->model.dim() : 0; }

void fmplug_model_free(fmplug_model* model) { delete model; }

fmplug_status fmplug_solve_task(const fmplug_model* model, const fmplug_config* config,
                                const char* task, const char* method, size_t instance,
                                fmplug_result** out) {
  FMPLUG_REQUIRE(model && task && method && out, "null argument");
  namespace bench = fmplug::bench;
  return guarded([&] {
    bench::ExperimentConfig cfg = config ? config->cfg : bench::parse_config("");
    std::size_t t = 0;
    while (t < cfg.tasks.size() && cfg.tasks[t].name != task) ++t;
    if (t == cfg.tasks.size()) {
      auto builtin = bench::builtin_task(task);
      if (!builtin) throw std::invalid_argument(std::string("unknown task: ") + task);
      cfg.tasks.push_back(*builtin);
    }
    std::size_t s = 0;
    while (s < cfg.solvers.size() && cfg.solvers[s].name != method) ++s;
    if (s == cfg.solvers.size()) {
      auto m = fmplug::solve::parse_method(method);
      if (!m) throw std::invalid_argument(std::string("unknown solver: ") + method);
      bench::NamedSolver named{method, {}};
      named.config.method = *m;
      cfg.solvers.push_back(named);
    }
    cfg.run.instances = std::max(cfg.run.instances, instance + 1);
    const auto images = bench::test_images(cfg);
    if (images.height * images.width != model->model.dim()) {
      throw fmplug::ShapeError("model dimension does not match the configured image size");
    }
    auto cell = bench::solve_cell(cfg, model->model, images, t, instance, s);
    if (!cell.row.ok) throw fmplug::NumericError(cell.row.error);
    *out = new fmplug_result{std::move(cell.row), std::move(cell.estimate)};
  });
}

size_t fmplug_result_size(const fmplug_result* r) { return r ? r->estimate.size() : 0; }
size_t fmplug_result_height(const fmplug_result* r) { return r ? r->estimate.shape().at(0) : 0; }
size_t fmplug_result_width(const fmplug_result* r) { return r ? r->estimate.shape().at(1) : 0; }

size_t fmplug_result_estimate(const fmplug_result* r, double* out, size_t capacity) {
  if (!r) return 0;
  const auto values = r->estimate.values();
  if (out) {
    for (std::size_t i = 0; i < std::min(capacity, values.size()); ++i) out[i] = values[i];
  }
  return values.size();
}

double fmplug_result_psnr(const fmplug_result* r) { return r ? r->row.metrics.psnr : NAN; }
double fmplug_result_ssim(const fmplug_result* r) { return r ? r->row.metrics.ssim : NAN; }
double fmplug_result_mse(const fmplug_result* r) { return r ? r->row.metrics.mse : NAN; }
double fmplug_result_final_loss(const fmplug_result* r) { return r ? r->row.final_loss : NAN; }
double fmplug_result_learned_t(const fmplug_result* r) {
  return r && r->row.learned_t ? *r->row.learned_t : NAN;
}
size_t fmplug_result_nfe(const fmplug_result* r) { return r ? r->row.nfe : 0; }
fmplug_status fmplug_result_save(const fmplug_result* r, const char* path) {
  FMPLUG_REQUIRE(r && path, "null argument");
  FMPLUG_REQUIRE(r->estimate.rank() == 2, "result has no estimate");
  return guarded([&] {
    fmplug::bench::ImageSet set{r->estimate.shape()[0], r->estimate.shape()[1], {r->estimate}};
    fmplug::bench::write_image_set(path, set);
  });
}

void fmplug_result_free(fmplug_result* result) { delete result; }

fmplug_status fmplug_run_experiment(const fmplug_config* config, const char* out_dir) {
  FMPLUG_REQUIRE(config && out_dir, "null argument");
  return guarded([&] { fmplug::bench::run_experiment(config->cfg, out_dir); });
}

fmplug_status fmplug_concentration(size_t d, size_t n, uint64_t seed, double* mean_norm,
                                   double tail_fraction[3]) {
  FMPLUG_REQUIRE(mean_norm, "null argument");
  return guarded([&] {
    const auto report = fmplug::quality::concentration_diag(d, n, seed);
    *mean_norm = report.mean_norm;
    if (tail_fraction) {
      for (int k = 0; k < 3; ++k) tail_fraction[k] = report.tail_fraction[k];
    }
  });
}

fmplug_status fmplug_shell_overlap(const double* center, size_t d, double radius2, size_t n,
                                   uint64_t seed, double* fraction) {
  FMPLUG_REQUIRE(center && fraction, "null argument");
  return guarded([&] {
    const auto c = fmplug::num::Tensor::vector(std::vector<double>(center, center + d));
    *fraction = fmplug::quality::shell_overlap_diag(c, radius2, n, seed);
  });
}

}  // extern "C"
