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
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include "byte_io.hpp"
#include "fmplug/bench.hpp"
#include "fmplug/errors.hpp"
#include "fmplug/random.hpp"

namespace fmplug::bench {
namespace {

using Complex = std::complex<double>;

// In-place separable DFT of an n x n grid; `inverse` includes the 1/n^2.
void dft2(std::vector<Complex>& grid, std::size_t n, bool inverse) {
  const double sign = inverse ? 1.0 : -1.0;
  std::vector<Complex> twiddle(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double a = sign * 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    twiddle[k] = {std::cos(a), std::sin(a)};
  }
  std::vector<Complex> line(n);
  auto transform = [&](std::size_t base, std::size_t stride) {
    for (std::size_t k = 0; k < n; ++k) {
      Complex acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grid[base + j * stride] * twiddle[(j * k) % n];
      line[k] = acc;
    }
    for (std::size_t k = 0; k < n; ++k) grid[base + k * stride] = line[k];
  };
  for (std::size_t r = 0; r < n; ++r) transform(r * n, 1);
  for (std::size_t c = 0; c < n; ++c) transform(c, n);
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n * n);
    for (auto& v : grid) v *= s;
  }
}

}  // namespace

Tensor ImageSet::as_matrix() const {
  const std::size_t d = height * width;
  std::vector<double> rows;
  rows.reserve(images.size() * d);
  for (const auto& img : images) rows.insert(rows.end(), img.values().begin(), img.values().end());
  return Tensor({images.size(), d}, std::move(rows));
}

ImageSet make_smooth_dataset(std::size_t count, std::size_t size, double cutoff, std::uint64_t seed) {
  if (size < 8) throw std::invalid_argument("smooth dataset: size must be >= 8");
  if (!(cutoff > 0.0 && cutoff < 1.0)) {
    throw std::invalid_argument("smooth dataset: cutoff must lie in (0, 1)");
  }
  const double radius = cutoff * static_cast<double>(size) / 2.0;
  if (radius < 1.0) {
    throw std::invalid_argument("smooth dataset: cutoff keeps no frequency besides DC");
  }
  if (count == 0) throw std::invalid_argument("smooth dataset: count must be positive");

  std::vector<std::uint8_t> keep(size * size);
  for (std::size_t u = 0; u < size; ++u) {
    for (std::size_t v = 0; v < size; ++v) {
      const double fu = static_cast<double>(std::min(u, size - u));
      const double fv = static_cast<double>(std::min(v, size - v));
      keep[u * size + v] = std::hypot(fu, fv) <= radius;
    }
  }

  Rng rng(seed);
  ImageSet set{size, size, {}};
  std::vector<Complex> grid(size * size);
  for (std::size_t n = 0; n < count; ++n) {
    for (auto& g : grid) g = rng.normal();
    dft2(grid, size, false);
    for (std::size_t i = 0; i < grid.size(); ++i)
      if (!keep[i]) grid[i] = 0.0;
    dft2(grid, size, true);
    std::vector<double> px(grid.size());
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = grid[i].real();
    const auto [lo, hi] = std::minmax_element(px.begin(), px.end());
    const double min = *lo, span = *hi - *lo;
    for (auto& p : px) p = (p - min) / span;
    set.images.emplace_back(num::Shape{size, size}, std::move(px));
  }
  return set;
}

std::vector<std::array<double, 2>> mixture_means(const MixtureSpec& spec) {
  std::vector<std::array<double, 2>> means;
  for (std::size_t k = 0; k < spec.components; ++k) {
    const double a = 2.0 * std::numbers::pi * static_cast<double>(k) /
                     static_cast<double>(spec.components);
    means.push_back({spec.center + spec.radius * std::cos(a), spec.center + spec.radius * std::sin(a)});
  }
  return means;
}

Tensor make_gaussian_mixture(const MixtureSpec& spec) {
  if (spec.components == 0 || spec.count == 0) {
    throw std::invalid_argument("mixture: components and count must be positive");
  }
  if (!(spec.stddev > 0.0)) throw std::invalid_argument("mixture: stddev must be positive");
  const auto means = mixture_means(spec);
  Rng rng(spec.seed);
  std::vector<double> out;
  out.reserve(spec.count * 2);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const auto& m = means[rng.index(spec.components)];
    out.push_back(m[0] + spec.stddev * rng.normal());
    out.push_back(m[1] + spec.stddev * rng.normal());
  }
  return Tensor({spec.count, 2}, std::move(out));
}

void write_image_set(const std::filesystem::path& path, const ImageSet& set) {
  std::string bytes;
  io::put_u32(bytes, 24);
  io::put_u64(bytes, set.images.size());
  io::put_u64(bytes, set.height);
  io::put_u64(bytes, set.width);
  for (const auto& img : set.images)
    for (double v : img.values()) io::put_f64(bytes, v);
  io::write_file(path, bytes);
}

ImageSet read_image_set(const std::filesystem::path& path) {
  const std::string bytes = io::read_file(path);
  io::Reader in(bytes, "dataset");
  const auto header = in.u32();
  if (header < 24) throw FormatError("dataset: header too short");
  const auto count = in.u64(), h = in.u64(), w = in.u64();
  in.skip(header - 24);
  if (count == 0 || h == 0 || w == 0) throw FormatError("dataset: empty grid");
  if (in.remaining() != count * h * w * 8) {
    throw FormatError("dataset: payload holds " + std::to_string(in.remaining()) +
                      " bytes, header declares " + std::to_string(count * h * w * 8));
  }
  ImageSet set{h, w, {}};
  for (std::uint64_t n = 0; n < count; ++n) {
    std::vector<double> px(h * w);
    for (auto& p : px) p = in.f64();
    set.images.emplace_back(num::Shape{h, w}, std::move(px));
  }
  return set;
}

}  // namespace fmplug::bench
