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

// Experiment harness: synthetic datasets, config files, checkpoints, and
// the (task x instance x method) report grid.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fmplug/degrade.hpp"
#include "fmplug/flow.hpp"
#include "fmplug/quality.hpp"
#include "fmplug/solve.hpp"

namespace fmplug::bench {

using num::Tensor;

// ---- datasets ---------------------------------------------------------------

struct ImageSet {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Tensor> images;  // each [height, width]

  // Flattened rows, [count, height * width].
  Tensor as_matrix() const;
};

// Seeded white noise low-pass filtered to spatial frequencies with radius
// <= cutoff * size / 2 (in cycles per image), then min-max normalized per
// image to [0, 1].
ImageSet make_smooth_dataset(std::size_t count, std::size_t size, double cutoff, std::uint64_t seed);

struct MixtureSpec {
  std::size_t components = 2;
  std::size_t count = 500;
  // Component means sit evenly on a circle of `radius` around (center, center).
  double center = 2.0;
  double radius = 1.0;
  double stddev = 0.3;
  std::uint64_t seed = 0;
};

// 2D Gaussian mixture draws, [count, 2].
Tensor make_gaussian_mixture(const MixtureSpec& spec);
std::vector<std::array<double, 2>> mixture_means(const MixtureSpec& spec);

// Raw dataset file: u32 header length, then u64 count, height, width (any
// further header bytes are skipped), then count * height * width f64 values,
// all little-endian.
void write_image_set(const std::filesystem::path& path, const ImageSet& set);
ImageSet read_image_set(const std::filesystem::path& path);

// ---- checkpoints ------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "FMPL", u32 version, u32 header length, JSON header, then the MLP
// parameters as little-endian f64 in declaration order. Only MlpVelocity
// models can be saved.
std::string encode_checkpoint(const flow::FlowModel& model);
flow::FlowModel decode_checkpoint(std::string_view bytes);
void save_checkpoint(const flow::FlowModel& model, const std::filesystem::path& path);
flow::FlowModel load_checkpoint(const std::filesystem::path& path);

// ---- configuration ----------------------------------------------------------

enum class DatasetKind { smooth, mixture, file };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::smooth;
  std::size_t count = 2000;
  std::size_t size = 32;
  double cutoff = 0.25;
  std::uint64_t seed = 1;
  MixtureSpec mixture{};
  std::string path;  // kind == file
};

struct ModelSpec {
  std::vector<std::size_t> hidden{128, 128};
  std::size_t time_features = 8;
  flow::Output output = flow::Output::data;
  double lr = 1e-3;
  double final_lr = 0.0;  // cosine-anneal target; 0 keeps lr constant
  std::size_t steps = 2000;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  std::string checkpoint;  // loaded when it exists, else written after training
};

struct TaskSpec {
  std::string name;
  degrade::OperatorKind kind = degrade::Identity{};
  double noise_sigma = 0.03;
  // Mask tasks: the keep pattern is drawn per image size from these.
  double keep_fraction = 0.5;
  std::uint64_t mask_seed = 0;
};

struct NamedSolver {
  std::string name;
  solve::SolverConfig config;
};

struct RunSpec {
  std::size_t instances = 5;
  std::uint64_t seed = 2024;  // test images and measurement noise
  bool record_timing = false;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ModelSpec model;
  RunSpec run;
  std::vector<TaskSpec> tasks;
  std::vector<NamedSolver> solvers;
};

// INI-style text: [dataset], [model], [run], [task.<name>], [solver.<name>].
// Unknown sections or keys are errors. Relative paths resolve against
// `base_dir`.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

// Built-in desk-scale tasks: "deblur" (9x9 Gaussian, sigma 1.5) and "sr4"
// (4x block average), both with noise sigma 0.03.
std::optional<TaskSpec> builtin_task(std::string_view name);

degrade::ForwardOperator make_operator(const TaskSpec& task, std::size_t height, std::size_t width);

// ---- running ----------------------------------------------------------------

// Trains (or loads) the model described by cfg.dataset / cfg.model.
flow::FlowModel prepare_model(const ExperimentConfig& cfg,
                              const std::function<void(std::size_t, double)>& on_step = {});
Tensor training_matrix(const ExperimentConfig& cfg);
// Held-out ground-truth images for the run.
ImageSet test_images(const ExperimentConfig& cfg);

struct ResultRow {
  std::string task;
  std::size_t instance = 0;
  std::string method;  // solver section name
  bool ok = true;
  std::string error;
  quality::MetricReport metrics;
  double final_loss = 0.0;
  std::optional<double> learned_t;
  std::size_t nfe = 0;
  double seconds = 0.0;
};

struct ExperimentReport {
  std::vector<ResultRow> rows;  // task, instance, solver order
  std::string csv;
  std::string markdown;
};

// Solves every (task, instance, solver) cell on `model`. Cells run on
// FMPLUG_THREADS worker threads (default: hardware concurrency); output
// order and content do not depend on the thread count.
struct CellOutput {
  ResultRow row;
  Tensor estimate;  // empty when the cell failed
};

// One (task, instance, solver) cell. Solver failures are caught into the row.
// `table` is required for calibrated fmplug methods, else computed on the fly.
CellOutput solve_cell(const ExperimentConfig& cfg, const flow::FlowModel& model,
                      const ImageSet& images, std::size_t task, std::size_t instance,
                      std::size_t solver, const solve::VarianceTable* table = nullptr);

ExperimentReport run_grid(const ExperimentConfig& cfg, const flow::FlowModel& model);

// prepare_model + run_grid, writing results.csv and summary.md into out_dir.
ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir);

// Per-(task, solver) means over the successful rows, in config order.
struct SummaryRow {
  std::string task;
  std::string method;
  std::size_t runs = 0;
  double psnr = 0.0, ssim = 0.0, mse = 0.0, final_loss = 0.0;
  std::optional<double> learned_t;
};
std::vector<SummaryRow> summarize(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows);

std::string format_csv(const std::vector<ResultRow>& rows, bool record_timing);
std::string format_summary(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows);

}  // namespace fmplug::bench
