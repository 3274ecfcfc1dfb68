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
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <thread>
#include <tuple>

#include "byte_io.hpp"
#include "fmplug/bench.hpp"
#include "fmplug/random.hpp"

namespace fmplug::bench {
namespace {

std::size_t worker_count(std::size_t cells) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("FMPLUG_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) n = static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::min(n, cells));
}

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string exact(double v) { return fmt("%.17g", v); }

bool needs_table(const solve::SolverConfig& c) {
  return (c.method == solve::Method::fmplug_w || c.method == solve::Method::fmplug_w_r) &&
         c.calibration != solve::Calibration::off;
}

}  // namespace

Tensor training_matrix(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  switch (ds.kind) {
    case DatasetKind::smooth:
      return make_smooth_dataset(ds.count, ds.size, ds.cutoff, ds.seed).as_matrix();
    case DatasetKind::mixture:
      return make_gaussian_mixture(ds.mixture);
    case DatasetKind::file: {
      auto set = read_image_set(ds.path);
      if (set.images.size() <= cfg.run.instances) {
        throw std::invalid_argument("dataset file has no images left after holding out " +
                                    std::to_string(cfg.run.instances) + " test instances");
      }
      set.images.resize(set.images.size() - cfg.run.instances);
      return set.as_matrix();
    }
  }
  throw std::invalid_argument("unknown dataset kind");
}

ImageSet test_images(const ExperimentConfig& cfg) {
  const auto& ds = cfg.dataset;
  switch (ds.kind) {
    case DatasetKind::smooth:
      return make_smooth_dataset(cfg.run.instances, ds.size, ds.cutoff, cfg.run.seed);
    case DatasetKind::file: {
      auto set = read_image_set(ds.path);
      if (set.images.size() < cfg.run.instances) {
        throw std::invalid_argument("dataset file holds fewer images than run.instances");
      }
      set.images.erase(set.images.begin(),
                       set.images.end() - static_cast<std::ptrdiff_t>(cfg.run.instances));
      return set;
    }
    case DatasetKind::mixture:
      break;
  }
  throw std::invalid_argument("inverse-problem runs need an image dataset (smooth or file)");
}

flow::FlowModel prepare_model(const ExperimentConfig& cfg,
                              const std::function<void(std::size_t, double)>& on_step) {
  const auto& m = cfg.model;
  if (!m.checkpoint.empty() && std::filesystem::exists(m.checkpoint)) {
    return load_checkpoint(m.checkpoint);
  }
  flow::TrainSettings ts;
  ts.hidden = m.hidden;
  ts.time_features = m.time_features;
  ts.output = m.output;
  ts.adam.lr = m.lr;
  ts.final_lr = m.final_lr;
  ts.steps = m.steps;
  ts.batch = m.batch;
  ts.seed = m.seed;
  ts.on_step = on_step;
  auto model = flow::train_fm(training_matrix(cfg), ts);
  if (!m.checkpoint.empty()) save_checkpoint(model, m.checkpoint);
  return model;
}

CellOutput solve_cell(const ExperimentConfig& cfg, const flow::FlowModel& model,
                      const ImageSet& images, std::size_t task, std::size_t instance,
                      std::size_t solver, const solve::VarianceTable* table) {
  if (task >= cfg.tasks.size() || solver >= cfg.solvers.size() ||
      instance >= images.images.size()) {
    throw std::out_of_range("solve_cell: index out of range");
  }
  const auto& spec = cfg.tasks[task];
  CellOutput out;
  ResultRow& row = out.row;
  row.task = spec.name;
  row.instance = instance;
  row.method = cfg.solvers[solver].name;
  const std::uint64_t cell = (static_cast<std::uint64_t>(task) << 32) | instance;
  solve::SolverConfig sc = cfg.solvers[solver].config;
  // Paired across methods: every solver sees the same measurement and seed per cell.
  sc.seed = mix_seed(sc.seed, cell);
  try {
    const auto op = make_operator(spec, images.height, images.width);
    const auto y = op.observe(images.images[instance], mix_seed(cfg.run.seed, cell + (1ull << 48)));
    const auto result = solve::solve(y, op, model, sc, table);
    row.metrics = quality::evaluate(images.images[instance], result.estimate,
                                    row.task + "/" + std::to_string(instance));
    row.final_loss = result.best_loss();
    row.learned_t = result.learned_t;
    row.nfe = result.nfe;
    row.seconds = result.seconds;
    out.estimate = result.estimate;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  return out;
}

ExperimentReport run_grid(const ExperimentConfig& cfg, const flow::FlowModel& model) {
  const auto images = test_images(cfg);
  const std::size_t h = images.height, w = images.width;
  if (model.dim() != h * w) {
    throw std::invalid_argument("model dimension " + std::to_string(model.dim()) +
                                " does not match " + std::to_string(h) + "x" + std::to_string(w) +
                                " test images");
  }
  const std::size_t n_inst = cfg.run.instances, n_solv = cfg.solvers.size();
  if (images.images.size() < n_inst) throw std::invalid_argument("too few test images");

  // One calibration table per distinct (steps, n_cal, cal_seed), shared read-only.
  std::map<std::tuple<std::size_t, std::size_t, std::uint64_t>, solve::VarianceTable> tables;
  for (const auto& s : cfg.solvers) {
    if (!needs_table(s.config)) continue;
    const auto key = std::make_tuple(s.config.steps, s.config.n_cal, s.config.cal_seed);
    if (!tables.contains(key)) {
      tables.emplace(key, solve::estimate_path_variance(*model.velocity, s.config.n_cal,
                                                        s.config.steps, s.config.cal_seed));
    }
  }

  const std::size_t cells = cfg.tasks.size() * n_inst * n_solv;
  std::vector<ResultRow> rows(cells);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t c = next++; c < cells; c = next++) {
      const std::size_t t = c / (n_inst * n_solv), i = (c / n_solv) % n_inst, s = c % n_solv;
      const auto& sc = cfg.solvers[s].config;
      const solve::VarianceTable* table = nullptr;
      if (needs_table(sc)) table = &tables.at(std::make_tuple(sc.steps, sc.n_cal, sc.cal_seed));
      rows[c] = solve_cell(cfg, model, images, t, i, s, table).row;
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = worker_count(cells);
  for (std::size_t k = 1; k < workers; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  ExperimentReport report;
  report.rows = std::move(rows);
  report.csv = format_csv(report.rows, cfg.run.record_timing);
  report.markdown = format_summary(cfg, report.rows);
  return report;
}

std::string format_csv(const std::vector<ResultRow>& rows, bool record_timing) {
  std::string out = "task,instance,method,status,psnr,ssim,mse,final_loss,learned_t,nfe,seconds\n";
  for (const auto& r : rows) {
    out += r.task + "," + std::to_string(r.instance) + "," + r.method + ",";
    if (!r.ok) {
      out += "failed,,,,,,,\n";
      continue;
    }
    out += "ok," + exact(r.metrics.psnr) + "," + exact(r.metrics.ssim) + "," + exact(r.metrics.mse) +
           "," + exact(r.final_loss) + "," + (r.learned_t ? exact(*r.learned_t) : "") + "," +
           std::to_string(r.nfe) + "," + (record_timing ? exact(r.seconds) : "") + "\n";
  }
  return out;
}

std::vector<SummaryRow> summarize(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  std::vector<SummaryRow> out;
  for (const auto& task : cfg.tasks) {
    for (const auto& solver : cfg.solvers) {
      SummaryRow sr;
      sr.task = task.name;
      sr.method = solver.name;
      double t_sum = 0.0;
      std::size_t t_count = 0;
      for (const auto& r : rows) {
        if (!r.ok || r.task != task.name || r.method != solver.name) continue;
        sr.psnr += r.metrics.psnr;
        sr.ssim += r.metrics.ssim;
        sr.mse += r.metrics.mse;
        sr.final_loss += r.final_loss;
        if (r.learned_t) {
          t_sum += *r.learned_t;
          ++t_count;
        }
        ++sr.runs;
      }
      if (sr.runs) {
        const auto n = static_cast<double>(sr.runs);
        sr.psnr /= n;
        sr.ssim /= n;
        sr.mse /= n;
        sr.final_loss /= n;
      }
      if (t_count) sr.learned_t = t_sum / static_cast<double>(t_count);
      out.push_back(std::move(sr));
    }
  }
  return out;
}

std::string format_summary(const ExperimentConfig& cfg, const std::vector<ResultRow>& rows) {
  const auto summary = summarize(cfg, rows);
  std::string out = "# Results\n\nMean over instances; best value per column in bold.\n";
  const std::size_t n_solv = cfg.solvers.size();
  for (std::size_t t = 0; t < cfg.tasks.size(); ++t) {
    const SummaryRow* group = summary.data() + t * n_solv;
    const SummaryRow *best_psnr = nullptr, *best_ssim = nullptr, *best_mse = nullptr;
    for (std::size_t s = 0; s < n_solv; ++s) {
      const auto* r = group + s;
      if (r->runs == 0) continue;
      if (!best_psnr || r->psnr > best_psnr->psnr) best_psnr = r;
      if (!best_ssim || r->ssim > best_ssim->ssim) best_ssim = r;
      if (!best_mse || r->mse < best_mse->mse) best_mse = r;
    }
    out += "\n## " + cfg.tasks[t].name + "\n\n";
    out += "| Method | PSNR (dB) | SSIM | MSE | Final loss | Learned t | Runs |\n";
    out += "|---|---|---|---|---|---|---|\n";
    for (std::size_t s = 0; s < n_solv; ++s) {
      const auto* r = group + s;
      auto bold = [](bool b, const std::string& v) { return b ? "**" + v + "**" : v; };
      out += "| " + r->method + " | ";
      if (r->runs == 0) {
        out += "- | - | - | - | - | 0 |\n";
        continue;
      }
      out += bold(r == best_psnr, fmt("%.4f", r->psnr)) + " | " +
             bold(r == best_ssim, fmt("%.4f", r->ssim)) + " | " +
             bold(r == best_mse, fmt("%.4e", r->mse)) + " | " + fmt("%.4g", r->final_loss) + " | " +
             (r->learned_t ? fmt("%.4f", *r->learned_t) : std::string("-")) + " | " +
             std::to_string(r->runs) + " |\n";
    }
  }
  std::string failures;
  for (const auto& r : rows) {
    if (r.ok) continue;
    failures += "- " + r.task + " / " + std::to_string(r.instance) + " / " + r.method + ": " + r.error + "\n";
  }
  if (!failures.empty()) out += "\n## Failed cells\n\n" + failures;
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto model = prepare_model(cfg);
  auto report = run_grid(cfg, model);
  io::write_file(out_dir / "results.csv", report.csv);
  io::write_file(out_dir / "summary.md", report.markdown);
  return report;
}

}  // namespace fmplug::bench
