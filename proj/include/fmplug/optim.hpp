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

#include <cstddef>
#include <span>
#include <vector>

namespace fmplug::num {

struct AdamSettings {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias-corrected moments over a fixed list of parameter blocks.
class Adam {
 public:
  Adam(AdamSettings settings, std::span<const std::size_t> block_sizes);

  // One update; params[i] and grads[i] must have block_sizes[i] entries.
  void step(std::span<std::vector<double>* const> params,
            std::span<const std::span<const double>> grads);
  // Single-block convenience.
  void step(std::vector<double>& param, std::span<const double> grad);

  std::size_t steps_taken() const noexcept { return t_; }
  const AdamSettings& settings() const noexcept { return settings_; }
  void set_lr(double lr);

 private:
  AdamSettings settings_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace fmplug::num
