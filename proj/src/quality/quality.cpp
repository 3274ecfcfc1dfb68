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

#include "fmplug/quality.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "fmplug/errors.hpp"
#include "fmplug/random.hpp"

namespace fmplug::quality {
namespace {

constexpr std::size_t kWindow = 7;
constexpr double kC1 = (0.01 * 1.0) * (0.01 * 1.0);
constexpr double kC2 = (0.03 * 1.0) * (0.03 * 1.0);

void same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(what) + ": " + num::to_string(a.shape()) + " vs " +
                     num::to_string(b.shape()));
  }
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "mse");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double ssim(const Tensor& a, const Tensor& b) {
  same_shape(a, b, "ssim");
  if (a.rank() != 2) throw ShapeError("ssim: expected [h, w] images, got " + num::to_string(a.shape()));
  const std::size_t h = a.shape()[0], w = a.shape()[1];
  if (h < kWindow || w < kWindow) {
    throw std::invalid_argument("ssim: image smaller than the 7x7 window");
  }
  // Direct window sums: identical inputs give exactly 1 per window.
  const double n = static_cast<double>(kWindow * kWindow);
  double total = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i + kWindow <= h; ++i) {
    for (std::size_t j = 0; j + kWindow <= w; ++j) {
      double sa = 0, sb = 0;
      for (std::size_t u = 0; u < kWindow; ++u)
        for (std::size_t v = 0; v < kWindow; ++v) {
          sa += a[(i + u) * w + j + v];
          sb += b[(i + u) * w + j + v];
        }
      const double ma = sa / n, mb = sb / n;
      double vaa = 0, vbb = 0, vab = 0;
      for (std::size_t u = 0; u < kWindow; ++u)
        for (std::size_t v = 0; v < kWindow; ++v) {
          const double da = a[(i + u) * w + j + v] - ma;
          const double db = b[(i + u) * w + j + v] - mb;
          vaa += da * da;
          vbb += db * db;
          vab += da * db;
        }
      vaa /= n;
      vbb /= n;
      vab /= n;
      total += ((2 * ma * mb + kC1) * (2 * vab + kC2)) /
               ((ma * ma + mb * mb + kC1) * (vaa + vbb + kC2));
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

MetricReport evaluate(const Tensor& reference, const Tensor& estimate, std::string id) {
  return {std::move(id), psnr(reference, estimate), ssim(reference, estimate),
          mse(reference, estimate)};
}

ConcentrationReport concentration_diag(std::size_t d, std::size_t n, std::uint64_t seed) {
  if (d == 0) throw std::invalid_argument("concentration_diag: d must be >= 1");
  if (n < 100) throw std::invalid_argument("concentration_diag: n must be >= 100");
  Rng rng(seed);
  const double radius = std::sqrt(static_cast<double>(d));
  ConcentrationReport report;
  double total = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    double ss = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double g = rng.normal();
      ss += g * g;
    }
    const double r = std::sqrt(ss);
    total += r;
    const double dev = std::abs(r - radius);
    for (std::size_t k = 0; k < 3; ++k)
      if (dev >= static_cast<double>(k + 1)) report.tail_fraction[k] += 1.0;
  }
  report.mean_norm = total / static_cast<double>(n);
  for (auto& f : report.tail_fraction) f /= static_cast<double>(n);
  return report;
}

double shell_overlap_diag(const Tensor& center, double radius2, std::size_t n,
                          std::uint64_t seed) {
  if (!(radius2 > 0.0)) throw std::invalid_argument("shell_overlap_diag: radius2 must be > 0");
  if (n == 0) throw std::invalid_argument("shell_overlap_diag: n must be positive");
  Rng rng(seed);
  const std::size_t d = center.size();
  const double radius = std::sqrt(static_cast<double>(d));
  const double sd = std::sqrt(radius2);
  const auto c = center.values();
  std::size_t inside = 0;
  for (std::size_t s = 0; s < n; ++s) {
    double ss = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double z = c[k] + sd * rng.normal();
      ss += z * z;
    }
    if (std::abs(std::sqrt(ss) - radius) <= 1.0) ++inside;
  }
  return static_cast<double>(inside) / static_cast<double>(n);
}

}  // namespace fmplug::quality
