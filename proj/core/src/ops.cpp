// Copyright 2026 The dcac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dcac/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "dcac/cost.hpp"
#include "dcac/error.hpp"

namespace dcac::ops {

namespace {

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t ra = a.size(), rb = b.size();
  const std::size_t r = std::max(ra, rb);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < r - ra ? 1 : a[i - (r - ra)];
    const std::int64_t db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast " + shape_str(a) + " with " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

std::vector<std::int64_t> contiguous_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

// Strides of `in` viewed through the broadcast `out` shape; 0 where the
// input extent is 1 or the axis is missing.
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  const auto in_st = contiguous_strides(in);
  std::vector<std::int64_t> st(out.size(), 0);
  const std::size_t off = out.size() - in.size();
  for (std::size_t i = 0; i < in.size(); ++i) {
    st[off + i] = in[i] == 1 ? 0 : in_st[i];
  }
  return st;
}

// Calls fn(flat_out, flat_a, flat_b) for every output element.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::int64_t>& sa,
                        const std::vector<std::int64_t>& sb, Fn&& fn) {
  const std::int64_t n = shape_numel(out);
  const std::size_t r = out.size();
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (int d = static_cast<int>(r) - 1; d >= 0; --d) {
      ia += sa[d];
      ib += sb[d];
      if (++idx[d] < out[d]) break;
      ia -= sa[d] * out[d];
      ib -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

Tensor binary_op(const char* name, const Tensor& a, const Tensor& b,
                 double (*fwd)(double, double),
                 void (*bwd)(double dz, double av, double bv, double& da, double& db),
                 bool count_work = false) {
  const Shape out_shape = broadcast_shape(a.shape(), b.shape());
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));

  const auto a_impl = a.impl();
  const auto b_impl = b.impl();

  if (same_shape(a.shape(), b.shape())) {
    const double* pa = a.data();
    const double* pb = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i], pb[i]);
  } else {
    const auto sa = broadcast_strides(a.shape(), out_shape);
    const auto sb = broadcast_strides(b.shape(), out_shape);
    const double* pa = a.data();
    const double* pb = b.data();
    for_each_broadcast(out_shape, sa, sb, [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
      out[i] = fwd(pa[ia], pb[ib]);
    });
  }
  // Only multiply-type work participates in the cost ledger.
  if (count_work) cost_add(out.size());

  Shape a_shape = a.shape(), b_shape = b.shape();
  Shape out_shape_copy = out_shape;
  return detail::make_op_output(
      name, out_shape, std::move(out), {a, b},
      [a_impl, b_impl, a_shape, b_shape, out_shape_copy, bwd](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& da = sink(0);
        std::vector<double>& db = sink(1);
        const double* pa = a_impl->data.data();
        const double* pb = b_impl->data.data();
        if (same_shape(a_shape, b_shape)) {
          for (std::size_t i = 0; i < dz.size(); ++i) {
            bwd(dz[i], pa[i], pb[i], da[i], db[i]);
          }
        } else {
          const auto sa = broadcast_strides(a_shape, out_shape_copy);
          const auto sb = broadcast_strides(b_shape, out_shape_copy);
          for_each_broadcast(out_shape_copy, sa, sb,
                             [&](std::int64_t i, std::int64_t ia, std::int64_t ib) {
                               bwd(dz[i], pa[ia], pb[ib], da[ia], db[ib]);
                             });
        }
      });
}

Tensor unary_op(const char* name, const Tensor& a, double (*fwd)(double),
                double (*dydx_from_in_out)(double x, double y)) {
  std::vector<double> out(a.values().size());
  const double* pa = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(pa[i]);

  const auto a_impl = a.impl();
  std::vector<double> y_copy = out;  // kept for backward; no output cycle
  return detail::make_op_output(
      name, a.shape(), std::move(out), {a},
      [a_impl, y_copy = std::move(y_copy), dydx_from_in_out](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& da = sink(0);
        const double* pa = a_impl->data.data();
        for (std::size_t i = 0; i < dz.size(); ++i) {
          da[i] += dz[i] * dydx_from_in_out(pa[i], y_copy[i]);
        }
      });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double dz, double, double, double& da, double& db) {
        da += dz;
        db += dz;
      });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double dz, double, double, double& da, double& db) {
        da += dz;
        db -= dz;
      });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double dz, double av, double bv, double& da, double& db) {
        da += dz * bv;
        db += dz * av;
      },
      /*count_work=*/true);
}

Tensor relu(const Tensor& a) {
  return unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a,
      [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary_op(
      "exp", a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary_op(
      "log", a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Tensor neg(const Tensor& a) {
  return unary_op(
      "neg", a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return mul(a, Tensor::scalar(factor));
}

Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b) {
  switch (kind) {
    case OpKind::kAdd: return add(a, b);
    case OpKind::kSub: return sub(a, b);
    case OpKind::kMul: return mul(a, b);
    case OpKind::kRelu: return relu(a);
    case OpKind::kSigmoid: return sigmoid(a);
    case OpKind::kTanh: return tanh(a);
  }
  throw ConfigError("unknown elementwise op kind");
}

namespace {

Tensor softmax_impl(const Tensor& x, int axis, bool log_variant) {
  const Shape& shape = x.shape();
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for " +
                     shape_str(shape));
  }
  for (const double v : x.values()) {
    if (std::isnan(v)) throw NumericError("softmax input contains NaN");
  }

  const std::int64_t n = shape[axis];
  std::int64_t inner = 1, outer = 1;
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) inner *= shape[i];
  for (int i = 0; i < axis; ++i) outer *= shape[i];

  std::vector<double> out(x.values().size());
  const double* px = x.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    for (std::int64_t in = 0; in < inner; ++in) {
      const std::int64_t base = o * n * inner + in;
      double mx = -std::numeric_limits<double>::infinity();
      for (std::int64_t j = 0; j < n; ++j) mx = std::max(mx, px[base + j * inner]);
      double denom = 0.0;
      for (std::int64_t j = 0; j < n; ++j) denom += std::exp(px[base + j * inner] - mx);
      if (log_variant) {
        const double log_denom = std::log(denom);
        for (std::int64_t j = 0; j < n; ++j) {
          out[base + j * inner] = px[base + j * inner] - mx - log_denom;
        }
      } else {
        for (std::int64_t j = 0; j < n; ++j) {
          out[base + j * inner] = std::exp(px[base + j * inner] - mx) / denom;
        }
      }
    }
  }

  std::vector<double> y_copy = out;
  return detail::make_op_output(
      log_variant ? "log_softmax" : "softmax", shape, std::move(out), {x},
      [y_copy = std::move(y_copy), n, inner, outer, log_variant](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        for (std::int64_t o = 0; o < outer; ++o) {
          for (std::int64_t in = 0; in < inner; ++in) {
            const std::int64_t base = o * n * inner + in;
            if (log_variant) {
              // dx_j = dz_j - softmax_j * sum(dz)
              double s = 0.0;
              for (std::int64_t j = 0; j < n; ++j) s += dz[base + j * inner];
              for (std::int64_t j = 0; j < n; ++j) {
                dx[base + j * inner] += dz[base + j * inner] - std::exp(y_copy[base + j * inner]) * s;
              }
            } else {
              // dx_j = y_j * (dz_j - sum(dz * y))
              double s = 0.0;
              for (std::int64_t j = 0; j < n; ++j) {
                s += dz[base + j * inner] * y_copy[base + j * inner];
              }
              for (std::int64_t j = 0; j < n; ++j) {
                dx[base + j * inner] += y_copy[base + j * inner] * (dz[base + j * inner] - s);
              }
            }
          }
        }
      });
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) { return softmax_impl(x, axis, false); }
Tensor log_softmax(const Tensor& x, int axis) { return softmax_impl(x, axis, true); }

Tensor matmul_fc(const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 2 || w.rank() != 2) {
    throw ShapeError("matmul_fc expects rank-2 operands, got " + shape_str(x.shape()) +
                     " and " + shape_str(w.shape()));
  }
  const std::int64_t m = x.shape()[0], k = x.shape()[1];
  const std::int64_t k2 = w.shape()[0], n = w.shape()[1];
  if (k != k2) {
    throw ShapeError("matmul_fc inner dims disagree: " + shape_str(x.shape()) + " vs " +
                     shape_str(w.shape()));
  }
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != n) {
    throw ShapeError("bias length " + std::to_string(bias.numel()) + " != " + std::to_string(n));
  }

  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  const double* px = x.data();
  const double* pw = w.data();
  std::uint64_t trips = 0;
  for (std::int64_t i = 0; i < m; ++i) {
    double* orow = out.data() + i * n;
    if (has_bias) {
      const double* pb = bias.data();
      for (std::int64_t j = 0; j < n; ++j) orow[j] = pb[j];
    }
    for (std::int64_t p = 0; p < k; ++p) {
      const double xv = px[i * k + p];
      const double* wrow = pw + p * n;
      for (std::int64_t j = 0; j < n; ++j) {
        orow[j] += xv * wrow[j];
        ++trips;
      }
    }
  }
  cost_add(trips);

  const auto x_impl = x.impl();
  const auto w_impl = w.impl();
  std::vector<Tensor> inputs = {x, w};
  if (has_bias) inputs.push_back(bias);
  return detail::make_op_output(
      "matmul_fc", {m, n}, std::move(out), inputs,
      [x_impl, w_impl, m, k, n, has_bias](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<double>& dw = sink(1);
        const double* px = x_impl->data.data();
        const double* pw = w_impl->data.data();
        for (std::int64_t i = 0; i < m; ++i) {
          const double* dzrow = dz.data() + i * n;
          for (std::int64_t p = 0; p < k; ++p) {
            const double* wrow = pw + p * n;
            const double xv = px[i * k + p];
            double acc = 0.0;
            double* dwrow = dw.data() + p * n;
            for (std::int64_t j = 0; j < n; ++j) {
              acc += dzrow[j] * wrow[j];
              dwrow[j] += xv * dzrow[j];
            }
            dx[i * k + p] += acc;
          }
        }
        if (has_bias) {
          std::vector<double>& db = sink(2);
          for (std::int64_t i = 0; i < m; ++i) {
            const double* dzrow = dz.data() + i * n;
            for (std::int64_t j = 0; j < n; ++j) db[j] += dzrow[j];
          }
        }
      });
}

namespace {

// Shared machinery for sum/mean reductions.
Tensor reduce_impl(const char* name, const Tensor& x, const std::vector<int>& axes,
                   bool keepdims, bool mean) {
  const Shape& shape = x.shape();
  if (axes.empty()) throw ShapeError("reduction with empty axis set");
  std::vector<bool> reduced(shape.size(), false);
  for (const int a : axes) {
    if (a < 0 || a >= static_cast<int>(shape.size())) {
      throw ShapeError("reduction axis " + std::to_string(a) + " out of range for " +
                       shape_str(shape));
    }
    if (reduced[a]) throw ShapeError("duplicate reduction axis");
    reduced[a] = true;
  }

  Shape out_shape;
  std::int64_t count = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (reduced[i]) {
      count *= shape[i];
      if (keepdims) out_shape.push_back(1);
    } else {
      out_shape.push_back(shape[i]);
    }
  }
  if (out_shape.empty()) out_shape.push_back(1);

  // Map every input flat index to its output flat index.
  const auto in_strides = contiguous_strides(shape);
  Shape kept_shape(shape);
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (reduced[i]) kept_shape[i] = 1;
  }
  const auto kept_strides = contiguous_strides(kept_shape);

  const std::int64_t n = x.numel();
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)), 0.0);
  const double* px = x.data();
  {
    std::vector<std::int64_t> idx(shape.size(), 0);
    std::int64_t iout = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      out[iout] += px[i];
      for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
        if (!reduced[d]) iout += kept_strides[d];
        if (++idx[d] < shape[d]) break;
        if (!reduced[d]) iout -= kept_strides[d] * shape[d];
        idx[d] = 0;
      }
    }
  }
  const double inv = mean ? 1.0 / static_cast<double>(count) : 1.0;
  if (mean) {
    for (auto& v : out) v *= inv;
    cost_add(static_cast<std::uint64_t>(n));  // pooling counts its gathered elements
  }

  Shape shape_copy = shape;
  std::vector<bool> reduced_copy = reduced;
  return detail::make_op_output(
      name, out_shape, std::move(out), {x},
      [shape_copy, reduced_copy, kept_strides, inv](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<std::int64_t> idx(shape_copy.size(), 0);
        std::int64_t iout = 0;
        const std::int64_t n = static_cast<std::int64_t>(dx.size());
        for (std::int64_t i = 0; i < n; ++i) {
          dx[i] += dz[iout] * inv;
          for (int d = static_cast<int>(shape_copy.size()) - 1; d >= 0; --d) {
            if (!reduced_copy[d]) iout += kept_strides[d];
            if (++idx[d] < shape_copy[d]) break;
            if (!reduced_copy[d]) iout -= kept_strides[d] * shape_copy[d];
            idx[d] = 0;
          }
        }
      });
}

}  // namespace

Tensor reduce_sum(const Tensor& x, const std::vector<int>& axes, bool keepdims) {
  return reduce_impl("reduce_sum", x, axes, keepdims, false);
}

Tensor sum_all(const Tensor& x) {
  std::vector<int> axes(x.rank());
  for (int i = 0; i < x.rank(); ++i) axes[i] = i;
  return reduce_impl("sum_all", x, axes, false, false);
}

Tensor global_avg_pool(const Tensor& x, const std::vector<int>& axes) {
  return reduce_impl("global_avg_pool", x, axes, true, true);
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw ShapeError("reshape " + shape_str(x.shape()) + " -> " + shape_str(shape) +
                     " changes element count");
  }
  std::vector<double> out = x.values();
  return detail::make_op_output(
      "reshape", std::move(shape), std::move(out), {x},
      [](const std::vector<double>& dz,
         const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        for (std::size_t i = 0; i < dz.size(); ++i) dx[i] += dz[i];
      });
}

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  const Shape& shape = x.shape();
  if (perm.size() != shape.size()) throw ShapeError("permute rank mismatch");
  std::vector<bool> used(perm.size(), false);
  Shape out_shape(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] < 0 || perm[i] >= static_cast<int>(shape.size()) || used[perm[i]]) {
      throw ShapeError("invalid permutation");
    }
    used[perm[i]] = true;
    out_shape[i] = shape[perm[i]];
  }

  const auto out_strides = contiguous_strides(out_shape);
  // For input axis a, the output stride it moves by.
  std::vector<std::int64_t> axis_out_stride(shape.size(), 0);
  for (std::size_t i = 0; i < perm.size(); ++i) axis_out_stride[perm[i]] = out_strides[i];

  const std::int64_t n = x.numel();
  std::vector<double> out(static_cast<std::size_t>(n));
  const double* px = x.data();
  {
    std::vector<std::int64_t> idx(shape.size(), 0);
    std::int64_t iout = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      out[iout] = px[i];
      for (int d = static_cast<int>(shape.size()) - 1; d >= 0; --d) {
        iout += axis_out_stride[d];
        if (++idx[d] < shape[d]) break;
        iout -= axis_out_stride[d] * shape[d];
        idx[d] = 0;
      }
    }
  }

  Shape shape_copy = shape;
  return detail::make_op_output(
      "permute", out_shape, std::move(out), {x},
      [shape_copy, axis_out_stride](const std::vector<double>& dz,
                                    const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<std::int64_t> idx(shape_copy.size(), 0);
        std::int64_t iout = 0;
        const std::int64_t n = static_cast<std::int64_t>(dx.size());
        for (std::int64_t i = 0; i < n; ++i) {
          dx[i] += dz[iout];
          for (int d = static_cast<int>(shape_copy.size()) - 1; d >= 0; --d) {
            iout += axis_out_stride[d];
            if (++idx[d] < shape_copy[d]) break;
            iout -= axis_out_stride[d] * shape_copy[d];
            idx[d] = 0;
          }
        }
      });
}

Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len) {
  const Shape& shape = x.shape();
  if (axis < 0 || axis >= static_cast<int>(shape.size())) throw ShapeError("slice axis out of range");
  if (start < 0 || len <= 0 || start + len > shape[axis]) {
    throw ShapeError("slice [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") out of bounds for axis extent " + std::to_string(shape[axis]));
  }
  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= shape[i];
  for (int i = axis + 1; i < static_cast<int>(shape.size()); ++i) inner *= shape[i];
  const std::int64_t n_axis = shape[axis];

  Shape out_shape = shape;
  out_shape[axis] = len;
  std::vector<double> out(static_cast<std::size_t>(outer * len * inner));
  const double* px = x.data();
  for (std::int64_t o = 0; o < outer; ++o) {
    std::memcpy(out.data() + o * len * inner, px + (o * n_axis + start) * inner,
                sizeof(double) * static_cast<std::size_t>(len * inner));
  }

  return detail::make_op_output(
      "slice", out_shape, std::move(out), {x},
      [outer, inner, n_axis, start, len](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        for (std::int64_t o = 0; o < outer; ++o) {
          const double* src = dz.data() + o * len * inner;
          double* dst = dx.data() + (o * n_axis + start) * inner;
          for (std::int64_t i = 0; i < len * inner; ++i) dst[i] += src[i];
        }
      });
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& first = parts[0].shape();
  if (axis < 0 || axis >= static_cast<int>(first.size())) throw ShapeError("concat axis out of range");

  std::int64_t total_axis = 0;
  for (const auto& p : parts) {
    if (p.rank() != static_cast<int>(first.size())) throw ShapeError("concat rank mismatch");
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.shape()[i] != first[i]) {
        throw ShapeError("concat extent mismatch at axis " + std::to_string(i));
      }
    }
    total_axis += p.shape()[axis];
  }

  std::int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= first[i];
  for (int i = axis + 1; i < static_cast<int>(first.size()); ++i) inner *= first[i];

  Shape out_shape = first;
  out_shape[axis] = total_axis;
  std::vector<double> out(static_cast<std::size_t>(outer * total_axis * inner));
  std::vector<std::int64_t> part_axis(parts.size());
  {
    std::int64_t off = 0;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
      const std::int64_t na = parts[pi].shape()[axis];
      part_axis[pi] = na;
      const double* src = parts[pi].data();
      for (std::int64_t o = 0; o < outer; ++o) {
        std::memcpy(out.data() + (o * total_axis + off) * inner, src + o * na * inner,
                    sizeof(double) * static_cast<std::size_t>(na * inner));
      }
      off += na;
    }
  }

  return detail::make_op_output(
      "concat", out_shape, std::move(out), parts,
      [outer, inner, total_axis, part_axis](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::int64_t off = 0;
        for (std::size_t pi = 0; pi < part_axis.size(); ++pi) {
          std::vector<double>& dp = sink(pi);
          const std::int64_t na = part_axis[pi];
          for (std::int64_t o = 0; o < outer; ++o) {
            const double* src = dz.data() + (o * total_axis + off) * inner;
            double* dst = dp.data() + o * na * inner;
            for (std::int64_t i = 0; i < na * inner; ++i) dst[i] += src[i];
          }
          off += na;
        }
      });
}

BnState make_bn_state(std::int64_t channels, bool requires_grad) {
  BnState s;
  s.gamma = Tensor::full({channels}, 1.0, requires_grad);
  s.beta = Tensor::zeros({channels}, requires_grad);
  s.running_mean.assign(static_cast<std::size_t>(channels), 0.0);
  s.running_var.assign(static_cast<std::size_t>(channels), 1.0);
  return s;
}

Tensor batch_norm(const Tensor& x, BnState& state, int channel_axis, bool training) {
  const Shape& shape = x.shape();
  if (channel_axis < 0 || channel_axis >= static_cast<int>(shape.size())) {
    throw ShapeError("batch_norm channel axis out of range");
  }
  const std::int64_t channels = shape[channel_axis];
  if (state.gamma.numel() != channels) {
    throw ShapeError("batch_norm state sized for " + std::to_string(state.gamma.numel()) +
                     " channels, input has " + std::to_string(channels));
  }
  const std::int64_t n_total = x.numel();
  const std::int64_t population = n_total / channels;
  if (training && population < 2) {
    throw DegenerateBatchError("batch_norm training needs population >= 2, got " +
                               std::to_string(population));
  }

  std::int64_t inner = 1;
  for (int i = channel_axis + 1; i < static_cast<int>(shape.size()); ++i) inner *= shape[i];
  auto channel_of = [channels, inner](std::int64_t flat) { return (flat / inner) % channels; };

  std::vector<double> mean(static_cast<std::size_t>(channels), 0.0);
  std::vector<double> var(static_cast<std::size_t>(channels), 0.0);
  const double* px = x.data();
  if (training) {
    for (std::int64_t i = 0; i < n_total; ++i) mean[channel_of(i)] += px[i];
    for (auto& m : mean) m /= static_cast<double>(population);
    for (std::int64_t i = 0; i < n_total; ++i) {
      const double d = px[i] - mean[channel_of(i)];
      var[channel_of(i)] += d * d;
    }
    for (auto& v : var) v /= static_cast<double>(population);
    // Running buffers keep the unbiased estimate.
    const double unbias = static_cast<double>(population) / static_cast<double>(population - 1);
    for (std::int64_t c = 0; c < channels; ++c) {
      state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mean[c];
      state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * var[c] * unbias;
    }
  } else {
    mean = state.running_mean;
    var = state.running_var;
  }

  std::vector<double> invstd(static_cast<std::size_t>(channels));
  for (std::int64_t c = 0; c < channels; ++c) invstd[c] = 1.0 / std::sqrt(var[c] + state.eps);

  std::vector<double> out(static_cast<std::size_t>(n_total));
  const double* pg = state.gamma.data();
  const double* pb = state.beta.data();
  for (std::int64_t i = 0; i < n_total; ++i) {
    const std::int64_t c = channel_of(i);
    out[i] = (px[i] - mean[c]) * invstd[c] * pg[c] + pb[c];
  }
  cost_add(static_cast<std::uint64_t>(n_total));

  const auto x_impl = x.impl();
  const auto g_impl = state.gamma.impl();
  return detail::make_op_output(
      "batch_norm", shape, std::move(out), {x, state.gamma, state.beta},
      [x_impl, g_impl, mean = std::move(mean), invstd = std::move(invstd), channels, inner,
       population, training](const std::vector<double>& dz,
                             const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<double>& dgamma = sink(1);
        std::vector<double>& dbeta = sink(2);
        const double* px = x_impl->data.data();
        const double* pg = g_impl->data.data();
        const std::int64_t n_total = static_cast<std::int64_t>(dx.size());
        auto channel_of = [channels, inner](std::int64_t flat) { return (flat / inner) % channels; };

        std::vector<double> sum_dz(static_cast<std::size_t>(channels), 0.0);
        std::vector<double> sum_dz_xhat(static_cast<std::size_t>(channels), 0.0);
        for (std::int64_t i = 0; i < n_total; ++i) {
          const std::int64_t c = channel_of(i);
          const double xhat = (px[i] - mean[c]) * invstd[c];
          sum_dz[c] += dz[i];
          sum_dz_xhat[c] += dz[i] * xhat;
        }
        for (std::int64_t c = 0; c < channels; ++c) {
          dgamma[c] += sum_dz_xhat[c];
          dbeta[c] += sum_dz[c];
        }
        if (training) {
          const double inv_n = 1.0 / static_cast<double>(population);
          for (std::int64_t i = 0; i < n_total; ++i) {
            const std::int64_t c = channel_of(i);
            const double xhat = (px[i] - mean[c]) * invstd[c];
            dx[i] += pg[c] * invstd[c] *
                     (dz[i] - inv_n * sum_dz[c] - xhat * inv_n * sum_dz_xhat[c]);
          }
        } else {
          for (std::int64_t i = 0; i < n_total; ++i) {
            const std::int64_t c = channel_of(i);
            dx[i] += dz[i] * pg[c] * invstd[c];
          }
        }
      });
}

}  // namespace dcac::ops
