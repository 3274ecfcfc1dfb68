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

#include <cstdint>
#include <random>
#include <vector>

namespace fmplug {

/// Seeded random stream used for every draw in the library.
///
/// std::mt19937_64 is fully specified by the standard; the uniform and
/// normal transforms are written out here so that a seed reproduces the
/// same doubles on any conforming toolchain (std::normal_distribution is
/// implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Standard normal, Marsaglia polar method.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t index(std::uint64_t n);

  std::vector<double> normals(std::size_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stream seed for cell `index` of a run: base XOR index. mt19937_64's
// seeding spreads adjacent seeds into unrelated streams.
std::uint64_t mix_seed(std::uint64_t base, std::uint64_t index);

}  // namespace fmplug
