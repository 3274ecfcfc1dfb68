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

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "fmplug/errors.hpp"
#include "fmplug/tensor.hpp"
#include "tape.hpp"

namespace fmplug::num {
namespace {

using detail::GradSlot;
using detail::record;
using detail::TensorAccess;
using detail::Values;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

const Values& vals(const Tensor& t) { return TensorAccess::values(t); }

[[noreturn]] void shape_mismatch(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                   to_string(b.shape()));
}

// Elementwise binary op with single-element broadcasting. `da`/`db` give the
// partial derivatives at (a, b).
template <class F, class DA, class DB>
Tensor binary(const char* name, const Tensor& a, const Tensor& b, F f, DA da, DB db) {
  const bool same = a.shape() == b.shape();
  const bool a_bc = !same && a.size() == 1;
  const bool b_bc = !same && !a_bc && b.size() == 1;
  if (!same && !a_bc && !b_bc) shape_mismatch(name, a, b);
  const Shape shape = a_bc ? b.shape() : a.shape();
  const std::size_t n = numel(shape);
  auto av = vals(a);
  auto bv = vals(b);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = f((*av)[a_bc ? 0 : i], (*bv)[b_bc ? 0 : i]);
  return record({&a, &b}, shape, std::move(out),
                [av, bv, a_bc, b_bc, da, db](std::span<const double> g,
                                             std::span<const GradSlot> gin) {
                  const std::size_t n = g.size();
                  for (std::size_t i = 0; i < n; ++i) {
                    const double x = (*av)[a_bc ? 0 : i];
                    const double y = (*bv)[b_bc ? 0 : i];
                    if (gin[0]) (*gin[0])[a_bc ? 0 : i] += g[i] * da(x, y);
                    if (gin[1]) (*gin[1])[b_bc ? 0 : i] += g[i] * db(x, y);
                  }
                });
}

// Elementwise unary op; `df` receives (input, output).
template <class F, class DF>
Tensor unary(const Tensor& x, F f, DF df) {
  auto xv = vals(x);
  std::vector<double> out(xv->size());
  std::transform(xv->begin(), xv->end(), out.begin(), f);
  auto yv = std::make_shared<const std::vector<double>>(out);
  return record({&x}, x.shape(), std::move(out),
                [xv, yv, df](std::span<const double> g, std::span<const GradSlot> gin) {
                  auto& gx = *gin[0];
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * df((*xv)[i], (*yv)[i]);
                });
}

std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * (n - 1) - i;
  return static_cast<std::size_t>(i);
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) +
                     ", got shape " + to_string(t.shape()));
  }
}

}  // namespace

Tensor operator+(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
      [](double, double) { return 1.0; });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
      [](double, double) { return -1.0; });
}

Tensor operator*(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; }, [](double, double y) { return y; },
      [](double x, double) { return x; });
}

Tensor operator-(const Tensor& a) { return a * -1.0; }

Tensor operator*(const Tensor& a, double c) {
  return unary(
      a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}
Tensor operator*(double c, const Tensor& a) { return a * c; }

Tensor operator+(const Tensor& a, double c) {
  return unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}
Tensor operator+(double c, const Tensor& a) { return a + c; }
Tensor operator-(const Tensor& a, double c) { return a + (-c); }

Tensor operator-(double c, const Tensor& a) {
  return unary(
      a, [c](double x) { return c - x; }, [](double, double) { return -1.0; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const auto m = a.shape()[0], k = a.shape()[1], n = b.shape()[1];
  if (b.shape()[0] != k) shape_mismatch("matmul", a, b);
  auto av = vals(a);
  auto bv = vals(b);
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(av->data(), m, k) * ConstMap(bv->data(), k, n);
  return record({&a, &b}, {m, n}, std::move(out),
                [av, bv, m, k, n](std::span<const double> g, std::span<const GradSlot> gin) {
                  ConstMap gm(g.data(), m, n);
                  if (gin[0]) {
                    MutMap(gin[0]->data(), m, k).noalias() +=
                        gm * ConstMap(bv->data(), k, n).transpose();
                  }
                  if (gin[1]) {
                    MutMap(gin[1]->data(), k, n).noalias() +=
                        ConstMap(av->data(), m, k).transpose() * gm;
                  }
                });
}

Tensor conv2d(const Tensor& image, const Tensor& kernel) {
  require_rank("conv2d", image, 2);
  require_rank("conv2d", kernel, 2);
  const auto h = static_cast<std::ptrdiff_t>(image.shape()[0]);
  const auto w = static_cast<std::ptrdiff_t>(image.shape()[1]);
  const auto kh = static_cast<std::ptrdiff_t>(kernel.shape()[0]);
  const auto kw = static_cast<std::ptrdiff_t>(kernel.shape()[1]);
  if (kh % 2 == 0 || kw % 2 == 0) {
    throw ShapeError("conv2d: kernel extents must be odd, got " + to_string(kernel.shape()));
  }
  const auto rh = kh / 2, rw = kw / 2;
  if (rh >= h || rw >= w) {
    throw ShapeError("conv2d: kernel " + to_string(kernel.shape()) +
                     " too large for reflect padding of image " + to_string(image.shape()));
  }
  // Precomputed reflected source indices per output row/column and tap.
  auto rows = std::make_shared<std::vector<std::size_t>>(h * kh);
  auto cols = std::make_shared<std::vector<std::size_t>>(w * kw);
  for (std::ptrdiff_t i = 0; i < h; ++i)
    for (std::ptrdiff_t a = 0; a < kh; ++a) (*rows)[i * kh + a] = reflect(i + a - rh, h);
  for (std::ptrdiff_t j = 0; j < w; ++j)
    for (std::ptrdiff_t b = 0; b < kw; ++b) (*cols)[j * kw + b] = reflect(j + b - rw, w);

  auto xv = vals(image);
  auto kv = vals(kernel);
  std::vector<double> out(h * w, 0.0);
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (std::ptrdiff_t a = 0; a < kh; ++a) {
        const auto src_row = (*rows)[i * kh + a] * w;
        for (std::ptrdiff_t b = 0; b < kw; ++b) {
          acc += (*kv)[a * kw + b] * (*xv)[src_row + (*cols)[j * kw + b]];
        }
      }
      out[i * w + j] = acc;
    }
  }
  return record({&image, &kernel}, image.shape(), std::move(out),
                [xv, kv, rows, cols, h, w, kh, kw](std::span<const double> g,
                                                   std::span<const GradSlot> gin) {
                  for (std::ptrdiff_t i = 0; i < h; ++i) {
                    for (std::ptrdiff_t j = 0; j < w; ++j) {
                      const double gij = g[i * w + j];
                      for (std::ptrdiff_t a = 0; a < kh; ++a) {
                        const auto src_row = (*rows)[i * kh + a] * w;
                        for (std::ptrdiff_t b = 0; b < kw; ++b) {
                          const auto src = src_row + (*cols)[j * kw + b];
                          if (gin[0]) (*gin[0])[src] += gij * (*kv)[a * kw + b];
                          if (gin[1]) (*gin[1])[a * kw + b] += gij * (*xv)[src];
                        }
                      }
                    }
                  }
                });
}

Tensor avg_pool2d(const Tensor& image, std::size_t factor) {
  require_rank("avg_pool2d", image, 2);
  const auto h = image.shape()[0], w = image.shape()[1];
  if (factor == 0 || h % factor != 0 || w % factor != 0) {
    throw ShapeError("avg_pool2d: factor " + std::to_string(factor) + " does not divide " +
                     to_string(image.shape()));
  }
  const auto oh = h / factor, ow = w / factor;
  const double inv = 1.0 / static_cast<double>(factor * factor);
  auto xv = vals(image);
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t i = 0; i < h; ++i)
    for (std::size_t j = 0; j < w; ++j) out[(i / factor) * ow + j / factor] += (*xv)[i * w + j];
  for (auto& v : out) v *= inv;
  return record({&image}, {oh, ow}, std::move(out),
                [h, w, ow, factor, inv](std::span<const double> g, std::span<const GradSlot> gin) {
                  auto& gx = *gin[0];
                  for (std::size_t i = 0; i < h; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                      gx[i * w + j] += g[(i / factor) * ow + j / factor] * inv;
                });
}

Tensor tanh(const Tensor& x) {
  return unary(
      x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& x) {
  return unary(
      x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& x) {
  return unary(
      x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
}

Tensor reciprocal(const Tensor& x) {
  return unary(
      x, [](double v) { return 1.0 / v; }, [](double, double y) { return -y * y; });
}

Tensor clamp_min(const Tensor& x, double lo) {
  return unary(
      x, [lo](double v) { return v < lo ? lo : v; },
      [lo](double v, double) { return v < lo ? 0.0 : 1.0; });
}

Tensor sin(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sin(v); }, [](double v, double) { return std::cos(v); });
}

Tensor cos(const Tensor& x) {
  return unary(
      x, [](double v) { return std::cos(v); }, [](double v, double) { return -std::sin(v); });
}

Tensor square(const Tensor& x) {
  return unary(
      x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
}

Tensor sqrt(const Tensor& x) {
  return unary(
      x, [](double v) { return std::sqrt(v); }, [](double, double y) { return 0.5 / y; });
}

Tensor sum(const Tensor& x) {
  auto xv = vals(x);
  const double s = std::accumulate(xv->begin(), xv->end(), 0.0);
  return record({&x}, {1}, {s}, [](std::span<const double> g, std::span<const GradSlot> gin) {
    for (auto& v : *gin[0]) v += g[0];
  });
}

Tensor mean(const Tensor& x) { return sum(x) * (1.0 / static_cast<double>(x.size())); }

Tensor l2_norm(const Tensor& x) {
  auto xv = vals(x);
  double ss = 0.0;
  for (double v : *xv) ss += v * v;
  const double norm = std::sqrt(ss);
  return record({&x}, {1}, {norm},
                [xv, norm](std::span<const double> g, std::span<const GradSlot> gin) {
                  auto& gx = *gin[0];
                  const double scale = g[0] / norm;
                  for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += scale * (*xv)[i];
                });
}

Tensor concat(std::initializer_list<Tensor> parts, std::size_t axis) {
  return concat(std::span<const Tensor>(parts.begin(), parts.size()), axis);
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
  if (parts.empty()) throw ShapeError("concat: no operands");
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) throw ShapeError("concat: axis out of range for " + to_string(first));
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first[d];
  for (std::size_t d = axis + 1; d < first.size(); ++d) inner *= first[d];

  Shape shape = first;
  shape[axis] = 0;
  std::vector<std::size_t> chunk;  // contiguous run per outer index, per part
  std::vector<const Tensor*> inputs;
  std::vector<Values> pv;
  for (const auto& p : parts) {
    bool ok = p.rank() == first.size();
    for (std::size_t d = 0; ok && d < first.size(); ++d) ok = d == axis || p.shape()[d] == first[d];
    if (!ok) shape_mismatch("concat", parts[0], p);
    shape[axis] += p.shape()[axis];
    chunk.push_back(p.shape()[axis] * inner);
    inputs.push_back(&p);
    pv.push_back(vals(p));
  }
  const std::size_t row = shape[axis] * inner;
  std::vector<double> out(outer * row);
  for (std::size_t o = 0; o < outer; ++o) {
    std::size_t off = o * row;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      std::copy_n(pv[k]->data() + o * chunk[k], chunk[k], out.data() + off);
      off += chunk[k];
    }
  }
  return record(inputs, shape, std::move(out),
                [outer, row, chunk](std::span<const double> g, std::span<const GradSlot> gin) {
                  for (std::size_t o = 0; o < outer; ++o) {
                    std::size_t off = o * row;
                    for (std::size_t k = 0; k < chunk.size(); ++k) {
                      if (gin[k]) {
                        for (std::size_t i = 0; i < chunk[k]; ++i)
                          (*gin[k])[o * chunk[k] + i] += g[off + i];
                      }
                      off += chunk[k];
                    }
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& in = x.shape();
  if (axis >= in.size() || begin >= end || end > in[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") on axis " + std::to_string(axis) + " invalid for " + to_string(in));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= in[d];
  for (std::size_t d = axis + 1; d < in.size(); ++d) inner *= in[d];
  Shape shape = in;
  shape[axis] = end - begin;
  const std::size_t src_row = in[axis] * inner, dst_row = shape[axis] * inner;
  const std::size_t start = begin * inner;
  auto xv = vals(x);
  std::vector<double> out(outer * dst_row);
  for (std::size_t o = 0; o < outer; ++o)
    std::copy_n(xv->data() + o * src_row + start, dst_row, out.data() + o * dst_row);
  return record({&x}, shape, std::move(out),
                [outer, src_row, dst_row, start](std::span<const double> g,
                                                 std::span<const GradSlot> gin) {
                  auto& gx = *gin[0];
                  for (std::size_t o = 0; o < outer; ++o)
                    for (std::size_t i = 0; i < dst_row; ++i)
                      gx[o * src_row + start + i] += g[o * dst_row + i];
                });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
  }
  return record({&x}, std::move(shape), x.to_vector(),
                [](std::span<const double> g, std::span<const GradSlot> gin) {
                  auto& gx = *gin[0];
                  for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                });
}

Tensor broadcast_to(const Tensor& x, Shape shape) {
  if (x.size() != 1) {
    throw ShapeError("broadcast_to: expected a single element, got " + to_string(x.shape()));
  }
  const auto n = numel(shape);
  return record({&x}, std::move(shape), std::vector<double>(n, x[0]),
                [](std::span<const double> g, std::span<const GradSlot> gin) {
                  double s = 0.0;
                  for (double v : g) s += v;
                  (*gin[0])[0] += s;
                });
}

bool all_finite(const Tensor& x) {
  for (double v : x.values())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace fmplug::num
