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

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <sstream>

#include "byte_io.hpp"
#include "fmplug/bench.hpp"
#include "fmplug/errors.hpp"
#include "fmplug/random.hpp"

namespace fmplug::bench {
namespace {

namespace pt = boost::property_tree;

[[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& msg) {
  throw FormatError("config [" + section + "] " + key + ": " + msg);
}

template <class T>
T parse_number(const std::string& section, const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(section, key, "cannot parse '" + text + "'");
  return value;
}

bool parse_bool(const std::string& section, const std::string& key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(section, key, "expected true/false, got '" + text + "'");
}

std::vector<std::size_t> parse_list(const std::string& section, const std::string& key,
                                    const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b == std::string::npos) fail(section, key, "empty list entry");
    out.push_back(parse_number<std::size_t>(section, key, item.substr(b, e - b + 1)));
  }
  return out;
}

// Walks the keys of one section, handing each to `handle`, which returns
// false for keys it does not know.
template <class F>
void each_key(const std::string& section, const pt::ptree& tree, F handle) {
  for (const auto& [key, node] : tree) {
    if (!handle(key, node.data())) fail(section, key, "unknown key");
  }
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  if (p.empty()) return {};
  const std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

void parse_dataset(const pt::ptree& tree, DatasetSpec& ds, const std::filesystem::path& base) {
  const std::string s = "dataset";
  each_key(s, tree, [&](const std::string& k, const std::string& v) {
    if (k == "kind") {
      if (v == "smooth") ds.kind = DatasetKind::smooth;
      else if (v == "mixture") ds.kind = DatasetKind::mixture;
      else if (v == "file") ds.kind = DatasetKind::file;
      else fail(s, k, "expected smooth, mixture or file");
    } else if (k == "count") {
      ds.count = parse_number<std::size_t>(s, k, v);
      ds.mixture.count = ds.count;
    } else if (k == "size") ds.size = parse_number<std::size_t>(s, k, v);
    else if (k == "cutoff") ds.cutoff = parse_number<double>(s, k, v);
    else if (k == "seed") {
      ds.seed = parse_number<std::uint64_t>(s, k, v);
      ds.mixture.seed = ds.seed;
    } else if (k == "components") ds.mixture.components = parse_number<std::size_t>(s, k, v);
    else if (k == "center") ds.mixture.center = parse_number<double>(s, k, v);
    else if (k == "radius") ds.mixture.radius = parse_number<double>(s, k, v);
    else if (k == "stddev") ds.mixture.stddev = parse_number<double>(s, k, v);
    else if (k == "path") ds.path = resolve(base, v).string();
    else return false;
    return true;
  });
}

void parse_model(const pt::ptree& tree, ModelSpec& m, const std::filesystem::path& base) {
  const std::string s = "model";
  each_key(s, tree, [&](const std::string& k, const std::string& v) {
    if (k == "hidden") m.hidden = parse_list(s, k, v);
    else if (k == "time_features") m.time_features = parse_number<std::size_t>(s, k, v);
    else if (k == "lr") m.lr = parse_number<double>(s, k, v);
    else if (k == "output") {
      auto o = flow::parse_output(v);
      if (!o) fail(s, k, "expected data or velocity");
      m.output = *o;
    } else if (k == "final_lr") m.final_lr = parse_number<double>(s, k, v);
    else if (k == "steps") m.steps = parse_number<std::size_t>(s, k, v);
    else if (k == "batch") m.batch = parse_number<std::size_t>(s, k, v);
    else if (k == "seed") m.seed = parse_number<std::uint64_t>(s, k, v);
    else if (k == "checkpoint") m.checkpoint = resolve(base, v).string();
    else return false;
    return true;
  });
}

void parse_run(const pt::ptree& tree, RunSpec& r) {
  const std::string s = "run";
  each_key(s, tree, [&](const std::string& k, const std::string& v) {
    if (k == "instances") r.instances = parse_number<std::size_t>(s, k, v);
    else if (k == "seed") r.seed = parse_number<std::uint64_t>(s, k, v);
    else if (k == "record_timing") r.record_timing = parse_bool(s, k, v);
    else return false;
    return true;
  });
}

TaskSpec parse_task(const std::string& s, const std::string& name, const pt::ptree& tree) {
  TaskSpec task;
  task.name = name;
  std::string kind = "identity";
  std::size_t kernel_size = 9, factor = 4;
  double sigma = 1.5;
  each_key(s, tree, [&](const std::string& k, const std::string& v) {
    if (k == "operator") kind = v;
    else if (k == "kernel_size") kernel_size = parse_number<std::size_t>(s, k, v);
    else if (k == "sigma") sigma = parse_number<double>(s, k, v);
    else if (k == "factor") factor = parse_number<std::size_t>(s, k, v);
    else if (k == "noise_sigma") task.noise_sigma = parse_number<double>(s, k, v);
    else if (k == "keep_fraction") task.keep_fraction = parse_number<double>(s, k, v);
    else if (k == "mask_seed") task.mask_seed = parse_number<std::uint64_t>(s, k, v);
    else return false;
    return true;
  });
  if (kind == "gaussian_blur") task.kind = degrade::GaussianBlur{kernel_size, sigma};
  else if (kind == "downsample") task.kind = degrade::Downsample{factor};
  else if (kind == "mask") task.kind = degrade::Mask{};
  else if (kind == "identity") task.kind = degrade::Identity{};
  else fail(s, "operator", "expected gaussian_blur, downsample, mask or identity");
  return task;
}

NamedSolver parse_solver(const std::string& s, const std::string& name, const pt::ptree& tree) {
  NamedSolver out{name, {}};
  auto& c = out.config;
  if (auto m = solve::parse_method(name)) c.method = *m;
  each_key(s, tree, [&](const std::string& k, const std::string& v) {
    if (k == "method") {
      auto m = solve::parse_method(v);
      if (!m) fail(s, k, "unknown method '" + v + "'");
      c.method = *m;
    } else if (k == "iterations") c.iterations = parse_number<std::size_t>(s, k, v);
    else if (k == "steps") c.steps = parse_number<std::size_t>(s, k, v);
    else if (k == "lr") c.lr = parse_number<double>(s, k, v);
    else if (k == "beta1") c.beta1 = parse_number<double>(s, k, v);
    else if (k == "beta2") c.beta2 = parse_number<double>(s, k, v);
    else if (k == "epsilon") c.epsilon = parse_number<double>(s, k, v);
    else if (k == "alpha") c.dflow_alpha = parse_number<double>(s, k, v);
    else if (k == "lambda") c.dflow_lambda = parse_number<double>(s, k, v);
    else if (k == "n_cal") c.n_cal = parse_number<std::size_t>(s, k, v);
    else if (k == "calibration") {
      auto cal = solve::parse_calibration(v);
      if (!cal) fail(s, k, "expected off, per_step or init_only");
      c.calibration = *cal;
    } else if (k == "cal_seed") c.cal_seed = parse_number<std::uint64_t>(s, k, v);
    else if (k == "t_init") c.t_init = parse_number<double>(s, k, v);
    else if (k == "guidance_steps") c.guidance_steps = parse_number<std::size_t>(s, k, v);
    else if (k == "descent_check") c.descent_check = parse_bool(s, k, v);
    else if (k == "seed") c.seed = parse_number<std::uint64_t>(s, k, v);
    else return false;
    return true;
  });
  if (!solve::parse_method(name) && tree.find("method") == tree.not_found()) {
    fail(s, "method", "missing (section name is not a method name)");
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError("config [" + s + "]: " + e.what());
  }
  return out;
}

}  // namespace

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError(std::string("config: ") + e.what());
  }
  for (const auto& [key, node] : tree) {
    if (!node.data().empty()) throw FormatError("config: key '" + key + "' outside a section");
  }
  // The INI reader drops sections without keys, so headers are collected separately.
  std::vector<std::string> sections;
  {
    std::istringstream lines{std::string(text)};
    std::string line;
    while (std::getline(lines, line)) {
      const auto b = line.find_first_not_of(" \t");
      if (b == std::string::npos || line[b] != '[') continue;
      const auto e = line.find(']', b);
      if (e == std::string::npos) throw FormatError("config: malformed section header '" + line + "'");
      sections.push_back(line.substr(b + 1, e - b - 1));
    }
  }
  const pt::ptree empty;
  ExperimentConfig cfg;
  bool any_task = false, any_solver = false;
  for (const auto& section : sections) {
    const auto it = tree.find(section);
    const pt::ptree& node = it == tree.not_found() ? empty : it->second;
    if (section == "dataset") {
      parse_dataset(node, cfg.dataset, base_dir);
    } else if (section == "model") {
      parse_model(node, cfg.model, base_dir);
    } else if (section == "run") {
      parse_run(node, cfg.run);
    } else if (section.rfind("task.", 0) == 0 && section.size() > 5) {
      cfg.tasks.push_back(parse_task(section, section.substr(5), node));
      any_task = true;
    } else if (section.rfind("solver.", 0) == 0 && section.size() > 7) {
      cfg.solvers.push_back(parse_solver(section, section.substr(7), node));
      any_solver = true;
    } else {
      throw FormatError("config: unknown section [" + section + "]");
    }
  }
  if (!any_task) cfg.tasks = {*builtin_task("deblur"), *builtin_task("sr4")};
  if (!any_solver) {
    for (auto m : {solve::Method::interleave, solve::Method::plugin, solve::Method::dflow,
                   solve::Method::fmplug_w, solve::Method::fmplug_w_r}) {
      solve::SolverConfig c;
      c.method = m;
      cfg.solvers.push_back({std::string(solve::to_string(m)), c});
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.parent_path());
}

std::optional<TaskSpec> builtin_task(std::string_view name) {
  TaskSpec t;
  t.name = std::string(name);
  t.noise_sigma = 0.03;
  if (name == "deblur") {
    t.kind = degrade::GaussianBlur{9, 1.5};
  } else if (name == "sr4") {
    t.kind = degrade::Downsample{4};
  } else {
    return std::nullopt;
  }
  return t;
}

degrade::ForwardOperator make_operator(const TaskSpec& task, std::size_t height, std::size_t width) {
  if (std::holds_alternative<degrade::Mask>(task.kind)) {
    if (!(task.keep_fraction >= 0.0 && task.keep_fraction <= 1.0)) {
      throw std::invalid_argument("mask keep_fraction must lie in [0, 1]");
    }
    Rng rng(task.mask_seed);
    degrade::Mask mask;
    mask.keep.resize(height * width);
    for (auto& k : mask.keep) k = rng.uniform() < task.keep_fraction;
    return degrade::ForwardOperator(mask, height, width, task.noise_sigma);
  }
  return degrade::ForwardOperator(task.kind, height, width, task.noise_sigma);
}

}  // namespace fmplug::bench
