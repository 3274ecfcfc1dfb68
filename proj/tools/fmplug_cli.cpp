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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fmplug/fmplug.h"

namespace {

int report(fmplug_status status, const char* what) {
  std::fprintf(stderr, "fmplug: %s failed (status %d): %s\n", what, static_cast<int>(status),
               fmplug_last_error());
  return 1;
}

void on_train_step(size_t step, double loss, void*) {
  if ((step + 1) % 100 == 0) std::fprintf(stderr, "step %zu loss %.6f\n", step + 1, loss);
}

// Solver overrides from the command line, one flag per config key.
struct SolverFlags {
  std::optional<long long> iterations, steps, n_cal, cal_seed, guidance_steps;
  std::optional<double> lr, beta1, beta2, epsilon, alpha, lambda, t_init;
  std::optional<std::string> calibration;
  std::optional<bool> descent_check;

  void attach(CLI::App* app) {
    app->add_option("--iterations", iterations, "Outer optimizer steps");
    app->add_option("--steps", steps, "Euler steps per generation");
    app->add_option("--lr", lr, "Step size");
    app->add_option("--beta1", beta1, "Adam beta1");
    app->add_option("--beta2", beta2, "Adam beta2");
    app->add_option("--epsilon", epsilon, "Adam epsilon");
    app->add_option("--alpha", alpha, "D-Flow blend weight");
    app->add_option("--lambda", lambda, "D-Flow chi-square weight");
    app->add_option("--n-cal", n_cal, "Calibration trajectories");
    app->add_option("--calibration", calibration, "off | per_step | init_only");
    app->add_option("--cal-seed", cal_seed, "Calibration seed");
    app->add_option("--t-init", t_init, "Initial warm-up time");
    app->add_option("--guidance-steps", guidance_steps, "Interleave gradient steps per Euler step");
    app->add_option("--descent-check", descent_check, "Interleave step halving");
  }

  std::string ini(const std::string& method, long long seed) const {
    std::ostringstream out;
    out.precision(17);
    out << "[solver.cli]\nmethod = " << method << "\nseed = " << seed << "\n";
    auto put = [&](const char* key, const auto& v) {
      if (v) out << key << " = " << *v << "\n";
    };
    put("iterations", iterations);
    put("steps", steps);
    put("lr", lr);
    put("beta1", beta1);
    put("beta2", beta2);
    put("epsilon", epsilon);
    put("alpha", alpha);
    put("lambda", lambda);
    put("n_cal", n_cal);
    put("calibration", calibration);
    put("cal_seed", cal_seed);
    put("t_init", t_init);
    put("guidance_steps", guidance_steps);
    if (descent_check) out << "descent_check = " << (*descent_check ? "true" : "false") << "\n";
    return out.str();
  }
};

std::optional<std::string> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-matching priors for linear inverse problems"};
  app.require_subcommand(1);

  std::string config_path, out_path, ckpt_path, task, method = "fmplug_w", out_dir;
  long long seed = 0;
  std::size_t instance = 0, d = 4096, samples = 10000;
  SolverFlags flags;

  auto* train = app.add_subcommand("train", "Train a velocity model and write a checkpoint");
  train->add_option("--config", config_path, "Experiment config (INI)")->required();
  train->add_option("--out", out_path, "Checkpoint path")->required();

  auto* solve = app.add_subcommand("solve", "Solve one task instance on a held-out test image");
  solve->add_option("--ckpt", ckpt_path, "Checkpoint path")->required();
  solve->add_option("--task", task, "Task name (deblur, sr4, or a config section)")->required();
  solve->add_option("--method", method, "interleave | plugin | dflow | fmplug_w | fmplug_w_r");
  solve->add_option("--seed", seed, "Seed for the test image, noise and solver");
  solve->add_option("--instance", instance, "Test instance index");
  solve->add_option("--config", config_path, "Experiment config supplying dataset and tasks");
  solve->add_option("--out", out_path, "Write the estimate as a dataset file");
  flags.attach(solve);

  auto* experiment = app.add_subcommand("experiment", "Run the full task x instance x method grid");
  experiment->add_option("--config", config_path, "Experiment config (INI)")->required();
  experiment->add_option("--out-dir", out_dir, "Directory for results.csv and summary.md")->required();

  auto* diagnose = app.add_subcommand("diagnose", "Gaussian concentration diagnostics");
  diagnose->add_option("--d", d, "Dimension");
  diagnose->add_option("--samples", samples, "Monte Carlo samples");
  diagnose->add_option("--seed", seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) {
    fmplug_config* cfg = nullptr;
    if (auto s = fmplug_config_load(config_path.c_str(), &cfg)) return report(s, "config");
    fmplug_model* model = nullptr;
    auto s = fmplug_model_prepare(cfg, on_train_step, nullptr, &model);
    fmplug_config_free(cfg);
    if (s) return report(s, "train");
    s = fmplug_model_save(model, out_path.c_str());
    fmplug_model_free(model);
    if (s) return report(s, "save");
    std::printf("wrote %s\n", out_path.c_str());
    return 0;
  }

  if (solve->parsed()) {
    std::string text, base;
    if (!config_path.empty()) {
      auto body = slurp(config_path);
      if (!body) {
        std::fprintf(stderr, "fmplug: cannot read %s\n", config_path.c_str());
        return 1;
      }
      text = *body + "\n";
      base = std::filesystem::path(config_path).parent_path().string();
    }
    text += flags.ini(method, seed);
    fmplug_config* cfg = nullptr;
    if (auto s = fmplug_config_parse(text.c_str(), base.empty() ? nullptr : base.c_str(), &cfg)) {
      return report(s, "config");
    }
    // The command-line seed drives the test image and noise as well as the solver.
    fmplug_config_set_run_seed(cfg, static_cast<uint64_t>(seed));
    fmplug_model* model = nullptr;
    if (auto s = fmplug_model_load(ckpt_path.c_str(), &model)) {
      fmplug_config_free(cfg);
      return report(s, "load");
    }
    fmplug_result* result = nullptr;
    auto s = fmplug_solve_task(model, cfg, task.c_str(), "cli", instance, &result);
    fmplug_model_free(model);
    fmplug_config_free(cfg);
    if (s) return report(s, "solve");
    std::printf("task %s method %s seed %lld\n", task.c_str(), method.c_str(), seed);
    std::printf("psnr %.4f\nssim %.4f\nmse %.6e\nfinal_loss %.6e\nnfe %zu\n", fmplug_result_psnr(result),
                fmplug_result_ssim(result), fmplug_result_mse(result),
                fmplug_result_final_loss(result), fmplug_result_nfe(result));
    if (const double t = fmplug_result_learned_t(result); !std::isnan(t)) std::printf("learned_t %.4f\n", t);
    if (!out_path.empty()) s = fmplug_result_save(result, out_path.c_str());
    fmplug_result_free(result);
    return s ? report(s, "write") : 0;
  }

  if (experiment->parsed()) {
    fmplug_config* cfg = nullptr;
    if (auto s = fmplug_config_load(config_path.c_str(), &cfg)) return report(s, "config");
    auto s = fmplug_run_experiment(cfg, out_dir.c_str());
    fmplug_config_free(cfg);
    if (s) return report(s, "experiment");
    std::printf("wrote %s/results.csv and %s/summary.md\n", out_dir.c_str(), out_dir.c_str());
    return 0;
  }

  double mean_norm = 0, tails[3] = {};
  if (auto s = fmplug_concentration(d, samples, seed, &mean_norm, tails)) return report(s, "diagnose");
  std::vector<double> center(d, 0.0);
  center[0] = 2.0 * std::sqrt(static_cast<double>(d));
  double overlap = 0;
  if (auto s = fmplug_shell_overlap(center.data(), d, 1.0, samples, seed, &overlap)) {
    return report(s, "diagnose");
  }
  std::printf("d %zu samples %zu\nmean_norm %.6f (sqrt(d) = %.6f)\n", d, samples, mean_norm,
              std::sqrt(static_cast<double>(d)));
  for (int k = 0; k < 3; ++k) std::printf("tail_fraction tau=%d %.6f\n", k + 1, tails[k]);
  std::printf("shell_overlap |center|=2sqrt(d) %.6f\n", overlap);
  return 0;
}
