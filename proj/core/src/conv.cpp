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

#include <algorithm>
#include <cstring>
#include <vector>

#include "dcac/cost.hpp"
#include "dcac/error.hpp"
#include "dcac/ops.hpp"

namespace dcac::ops {

namespace {

// Zero-padded copy of x:[C,T,H,W] -> [C,T,H+2ph,W+2pw].
std::vector<double> pad_chw(const double* px, std::int64_t c, std::int64_t t, std::int64_t h,
                            std::int64_t w, int ph, int pw) {
  const std::int64_t hp = h + 2 * ph, wp = w + 2 * pw;
  std::vector<double> out(static_cast<std::size_t>(c * t * hp * wp), 0.0);
  for (std::int64_t ci = 0; ci < c; ++ci) {
    for (std::int64_t ti = 0; ti < t; ++ti) {
      for (std::int64_t hi = 0; hi < h; ++hi) {
        std::memcpy(out.data() + ((ci * t + ti) * hp + hi + ph) * wp + pw,
                    px + ((ci * t + ti) * h + hi) * w, sizeof(double) * static_cast<std::size_t>(w));
      }
    }
  }
  return out;
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride_h, int stride_w,
              int pad_h, int pad_w, int groups) {
  if (x.rank() != 4) throw ShapeError("conv2d input must be [C,T,H,W], got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ShapeError("conv2d weight must be [Co,Ci/G,kh,kw], got " + shape_str(w.shape()));
  const std::int64_t cin = x.shape()[0], t = x.shape()[1], h = x.shape()[2], wdt = x.shape()[3];
  const std::int64_t cout = w.shape()[0], cig = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
  if (groups <= 0 || cin % groups != 0 || cout % groups != 0) {
    throw ShapeError("conv2d groups " + std::to_string(groups) + " must divide channels");
  }
  if (cig != cin / groups) {
    throw ShapeError("conv2d weight expects " + std::to_string(cin / groups) +
                     " input channels per group, got " + std::to_string(cig));
  }
  if (stride_h <= 0 || stride_w <= 0) throw ShapeError("conv2d stride must be positive");
  const std::int64_t ho = (h + 2 * pad_h - kh) / stride_h + 1;
  const std::int64_t wo = (wdt + 2 * pad_w - kw) / stride_w + 1;
  if (ho <= 0 || wo <= 0) throw ShapeError("conv2d output would be empty");
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != cout) throw ShapeError("conv2d bias length mismatch");

  const std::int64_t hp = h + 2 * pad_h, wp = wdt + 2 * pad_w;
  const std::vector<double> xpad = pad_chw(x.data(), cin, t, h, wdt, pad_h, pad_w);
  const std::int64_t cog = cout / groups;

  std::vector<double> out(static_cast<std::size_t>(cout * t * ho * wo), 0.0);
  const double* pw = w.data();
  std::uint64_t trips = 0;
  for (std::int64_t co = 0; co < cout; ++co) {
    const std::int64_t g = co / cog;
    for (std::int64_t ti = 0; ti < t; ++ti) {
      for (std::int64_t oh = 0; oh < ho; ++oh) {
        for (std::int64_t ow = 0; ow < wo; ++ow) {
          double acc = has_bias ? bias.data()[co] : 0.0;
          for (std::int64_t cl = 0; cl < cig; ++cl) {
            const std::int64_t ci = g * cig + cl;
            const double* wbase = pw + ((co * cig + cl) * kh) * kw;
            const double* xbase = xpad.data() + ((ci * t + ti) * hp + oh * stride_h) * wp + ow * stride_w;
            for (std::int64_t r = 0; r < kh; ++r) {
              const double* wrow = wbase + r * kw;
              const double* xrow = xbase + r * wp;
              for (std::int64_t s = 0; s < kw; ++s) {
                acc += wrow[s] * xrow[s];
                ++trips;
              }
            }
          }
          out[((co * t + ti) * ho + oh) * wo + ow] = acc;
        }
      }
    }
  }
  cost_add(trips);

  const auto x_impl = x.impl();
  const auto w_impl = w.impl();
  std::vector<Tensor> inputs = {x, w};
  if (has_bias) inputs.push_back(bias);
  return detail::make_op_output(
      "conv2d", {cout, t, ho, wo}, std::move(out), inputs,
      [x_impl, w_impl, cin, t, h, wdt, cout, cig, cog, kh, kw, ho, wo, stride_h, stride_w, pad_h,
       pad_w, has_bias](const std::vector<double>& dz,
                        const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<double>& dw = sink(1);
        const std::int64_t hp = h + 2 * pad_h, wp = wdt + 2 * pad_w;
        const std::vector<double> xpad = pad_chw(x_impl->data.data(), cin, t, h, wdt, pad_h, pad_w);
        std::vector<double> dxpad(xpad.size(), 0.0);
        const double* pw = w_impl->data.data();
        for (std::int64_t co = 0; co < cout; ++co) {
          const std::int64_t g = co / cog;
          for (std::int64_t ti = 0; ti < t; ++ti) {
            for (std::int64_t oh = 0; oh < ho; ++oh) {
              for (std::int64_t ow = 0; ow < wo; ++ow) {
                const double d = dz[((co * t + ti) * ho + oh) * wo + ow];
                if (d == 0.0) continue;
                for (std::int64_t cl = 0; cl < cig; ++cl) {
                  const std::int64_t ci = g * cig + cl;
                  const double* wbase = pw + ((co * cig + cl) * kh) * kw;
                  double* dwbase = dw.data() + ((co * cig + cl) * kh) * kw;
                  const std::int64_t xoff = ((ci * t + ti) * hp + oh * stride_h) * wp + ow * stride_w;
                  for (std::int64_t r = 0; r < kh; ++r) {
                    const double* xrow = xpad.data() + xoff + r * wp;
                    double* dxrow = dxpad.data() + xoff + r * wp;
                    const double* wrow = wbase + r * kw;
                    double* dwrow = dwbase + r * kw;
                    for (std::int64_t s = 0; s < kw; ++s) {
                      dwrow[s] += d * xrow[s];
                      dxrow[s] += d * wrow[s];
                    }
                  }
                }
              }
            }
          }
        }
        // Strip the padding border back off.
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          for (std::int64_t ti = 0; ti < t; ++ti) {
            for (std::int64_t hi = 0; hi < h; ++hi) {
              const double* src = dxpad.data() + ((ci * t + ti) * hp + hi + pad_h) * wp + pad_w;
              double* dst = dx.data() + ((ci * t + ti) * h + hi) * wdt;
              for (std::int64_t wi = 0; wi < wdt; ++wi) dst[wi] += src[wi];
            }
          }
        }
        if (has_bias) {
          std::vector<double>& db = sink(2);
          for (std::int64_t co = 0; co < cout; ++co) {
            double acc = 0.0;
            const double* dzc = dz.data() + co * t * ho * wo;
            for (std::int64_t i = 0; i < t * ho * wo; ++i) acc += dzc[i];
            db[co] += acc;
          }
        }
      });
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias, int stride, int pad) {
  if (x.rank() != 2) throw ShapeError("conv1d input must be [C,T], got " + shape_str(x.shape()));
  if (w.rank() != 3) throw ShapeError("conv1d weight must be [Co,Ci,k], got " + shape_str(w.shape()));
  const std::int64_t cin = x.shape()[0], t = x.shape()[1];
  const std::int64_t cout = w.shape()[0], cin2 = w.shape()[1], k = w.shape()[2];
  if (cin != cin2) throw ShapeError("conv1d channel mismatch");
  if (stride <= 0) throw ShapeError("conv1d stride must be positive");
  const std::int64_t to = (t + 2 * pad - k) / stride + 1;
  if (to <= 0) throw ShapeError("conv1d output would be empty");
  const bool has_bias = bias.defined();
  if (has_bias && bias.numel() != cout) throw ShapeError("conv1d bias length mismatch");

  const std::int64_t tp = t + 2 * pad;
  std::vector<double> xpad(static_cast<std::size_t>(cin * tp), 0.0);
  for (std::int64_t ci = 0; ci < cin; ++ci) {
    std::memcpy(xpad.data() + ci * tp + pad, x.data() + ci * t,
                sizeof(double) * static_cast<std::size_t>(t));
  }

  std::vector<double> out(static_cast<std::size_t>(cout * to), 0.0);
  const double* pw = w.data();
  std::uint64_t trips = 0;
  for (std::int64_t co = 0; co < cout; ++co) {
    for (std::int64_t ot = 0; ot < to; ++ot) {
      double acc = has_bias ? bias.data()[co] : 0.0;
      for (std::int64_t ci = 0; ci < cin; ++ci) {
        const double* wrow = pw + (co * cin + ci) * k;
        const double* xrow = xpad.data() + ci * tp + ot * stride;
        for (std::int64_t j = 0; j < k; ++j) {
          acc += wrow[j] * xrow[j];
          ++trips;
        }
      }
      out[co * to + ot] = acc;
    }
  }
  cost_add(trips);

  const auto x_impl = x.impl();
  const auto w_impl = w.impl();
  std::vector<Tensor> inputs = {x, w};
  if (has_bias) inputs.push_back(bias);
  return detail::make_op_output(
      "conv1d", {cout, to}, std::move(out), inputs,
      [x_impl, w_impl, cin, t, cout, k, to, stride, pad, has_bias](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        std::vector<double>& dw = sink(1);
        const std::int64_t tp = t + 2 * pad;
        std::vector<double> xpad(static_cast<std::size_t>(cin * tp), 0.0);
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          std::memcpy(xpad.data() + ci * tp + pad, x_impl->data.data() + ci * t,
                      sizeof(double) * static_cast<std::size_t>(t));
        }
        std::vector<double> dxpad(xpad.size(), 0.0);
        const double* pw = w_impl->data.data();
        for (std::int64_t co = 0; co < cout; ++co) {
          for (std::int64_t ot = 0; ot < to; ++ot) {
            const double d = dz[co * to + ot];
            if (d == 0.0) continue;
            for (std::int64_t ci = 0; ci < cin; ++ci) {
              const double* wrow = pw + (co * cin + ci) * k;
              double* dwrow = dw.data() + (co * cin + ci) * k;
              const double* xrow = xpad.data() + ci * tp + ot * stride;
              double* dxrow = dxpad.data() + ci * tp + ot * stride;
              for (std::int64_t j = 0; j < k; ++j) {
                dwrow[j] += d * xrow[j];
                dxrow[j] += d * wrow[j];
              }
            }
          }
        }
        for (std::int64_t ci = 0; ci < cin; ++ci) {
          const double* src = dxpad.data() + ci * tp + pad;
          double* dst = dx.data() + ci * t;
          for (std::int64_t j = 0; j < t; ++j) dst[j] += src[j];
        }
        if (has_bias) {
          std::vector<double>& db = sink(2);
          for (std::int64_t co = 0; co < cout; ++co) {
            double acc = 0.0;
            for (std::int64_t ot = 0; ot < to; ++ot) acc += dz[co * to + ot];
            db[co] += acc;
          }
        }
      });
}

Tensor max_pool1d(const Tensor& x, int k, int s) {
  if (x.rank() != 2) throw ShapeError("max_pool1d input must be [C,T]");
  if (k <= 0 || s <= 0) throw ShapeError("max_pool1d window and stride must be positive");
  const std::int64_t c = x.shape()[0], t = x.shape()[1];
  if (t < k) throw ShapeError("max_pool1d input shorter than window");
  const std::int64_t to = (t - k) / s + 1;

  std::vector<double> out(static_cast<std::size_t>(c * to));
  std::vector<std::int32_t> argmax(static_cast<std::size_t>(c * to));
  const double* px = x.data();
  for (std::int64_t ci = 0; ci < c; ++ci) {
    for (std::int64_t ot = 0; ot < to; ++ot) {
      const std::int64_t base = ci * t + ot * s;
      double best = px[base];
      std::int32_t besti = 0;
      for (std::int64_t j = 1; j < k; ++j) {
        if (px[base + j] > best) {
          best = px[base + j];
          besti = static_cast<std::int32_t>(j);
        }
      }
      out[ci * to + ot] = best;
      argmax[ci * to + ot] = besti;
    }
  }

  return detail::make_op_output(
      "max_pool1d", {c, to}, std::move(out), {x},
      [argmax = std::move(argmax), c, t, to, s](
          const std::vector<double>& dz,
          const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        for (std::int64_t ci = 0; ci < c; ++ci) {
          for (std::int64_t ot = 0; ot < to; ++ot) {
            dx[ci * t + ot * s + argmax[ci * to + ot]] += dz[ci * to + ot];
          }
        }
      });
}

Tensor unfold_time(const Tensor& x, int k) {
  if (x.rank() != 2) throw ShapeError("unfold_time input must be [C,T]");
  if (k <= 0 || k % 2 == 0) throw ConfigError("unfold_time window must be odd, got " + std::to_string(k));
  const std::int64_t c = x.shape()[0], t = x.shape()[1];
  const std::int64_t half = (k - 1) / 2;

  std::vector<double> out(static_cast<std::size_t>(c * t * k), 0.0);
  const double* px = x.data();
  std::uint64_t trips = 0;
  for (std::int64_t ci = 0; ci < c; ++ci) {
    for (std::int64_t ti = 0; ti < t; ++ti) {
      double* orow = out.data() + (ci * t + ti) * k;
      for (std::int64_t j = 0; j < k; ++j) {
        const std::int64_t src = ti + j - half;
        orow[j] = (src >= 0 && src < t) ? px[ci * t + src] : 0.0;
        ++trips;
      }
    }
  }
  cost_add(trips);

  return detail::make_op_output(
      "unfold_time", {c, t, k}, std::move(out), {x},
      [c, t, k, half](const std::vector<double>& dz,
                      const std::function<std::vector<double>&(std::size_t)>& sink) {
        std::vector<double>& dx = sink(0);
        for (std::int64_t ci = 0; ci < c; ++ci) {
          for (std::int64_t ti = 0; ti < t; ++ti) {
            const double* drow = dz.data() + (ci * t + ti) * k;
            for (std::int64_t j = 0; j < k; ++j) {
              const std::int64_t src = ti + j - half;
              if (src >= 0 && src < t) dx[ci * t + src] += drow[j];
            }
          }
        }
      });
}

}  // namespace dcac::ops
