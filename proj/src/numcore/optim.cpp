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

#include "fmplug/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace fmplug::num {

Adam::Adam(AdamSettings settings, std::span<const std::size_t> block_sizes)
    : settings_(settings) {
  if (!(settings_.lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
  for (auto n : block_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void Adam::step(std::span<std::vector<double>* const> params,
                std::span<const std::span<const double>> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("Adam: parameter block count changed");
  }
  ++t_;
  const auto& s = settings_;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(t_));
  for (std::size_t b = 0; b < m_.size(); ++b) {
    auto& p = *params[b];
    const auto g = grads[b];
    auto& m = m_[b];
    auto& v = v_[b];
    if (p.size() != m.size() || g.size() != m.size()) {
      throw std::invalid_argument("Adam: parameter block size changed");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
      v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
      p[i] -= s.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + s.epsilon);
    }
  }
}

void Adam::step(std::vector<double>& param, std::span<const double> grad) {
  std::vector<double>* p[] = {&param};
  std::span<const double> g[] = {grad};
  step(p, g);
}

void Adam::set_lr(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: learning rate must be positive");
  settings_.lr = lr;
}

}  // namespace fmplug::num
