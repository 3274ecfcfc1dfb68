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

#include <array>
#include <cstdint>
#include <string>

#include "fmplug/tensor.hpp"

namespace fmplug::quality {

using num::Tensor;

inline constexpr double kPsnrCap = 99.0;

struct MetricReport {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
  double mse = 0.0;
};

double mse(const Tensor& a, const Tensor& b);
// 10 log10(1 / mse) for peak 1; kPsnrCap when mse < 1e-10.
double psnr(const Tensor& a, const Tensor& b);
// Mean SSIM over all valid 7x7 uniform windows, K1 = 0.01, K2 = 0.03, peak 1.
// Both images must be [h, w] with h, w >= 7.
double ssim(const Tensor& a, const Tensor& b);

MetricReport evaluate(const Tensor& reference, const Tensor& estimate, std::string id = {});

struct ConcentrationReport {
  double mean_norm = 0.0;
  // Fraction of samples with | |z| - sqrt(d) | >= tau for tau = 1, 2, 3.
  std::array<double, 3> tail_fraction{};
};

// n standard Gaussian draws in R^d.
ConcentrationReport concentration_diag(std::size_t d, std::size_t n, std::uint64_t seed);

// Fraction of N(center, radius2 I) draws with | |z| - sqrt(d) | <= 1.
double shell_overlap_diag(const Tensor& center, double radius2, std::size_t n,
                          std::uint64_t seed);

}  // namespace fmplug::quality
