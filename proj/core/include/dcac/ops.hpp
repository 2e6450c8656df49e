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

#ifndef DCAC_OPS_HPP_
#define DCAC_OPS_HPP_

#include <cstdint>
#include <vector>

#include "dcac/tensor.hpp"

namespace dcac::ops {

enum class OpKind { kAdd, kSub, kMul, kRelu, kSigmoid, kTanh };

// Binary ops broadcast with trailing-dimension (numpy) rules; unary ops
// ignore `b`.  Backward handles the broadcast reduction.
Tensor elementwise(OpKind kind, const Tensor& a, const Tensor& b = Tensor());

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);

// Max-subtracted softmax along `axis`; rejects NaN input with NumericError.
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);

// x:[m,k] @ w:[k,n] + bias[n] (bias optional).
Tensor matmul_fc(const Tensor& x, const Tensor& w, const Tensor& bias = Tensor());

Tensor reduce_sum(const Tensor& x, const std::vector<int>& axes, bool keepdims);
// Scalar sum over everything; the usual loss-root reduction.
Tensor sum_all(const Tensor& x);

// Mean over `axes`; pooled extents become 1.
Tensor global_avg_pool(const Tensor& x, const std::vector<int>& axes);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor slice(const Tensor& x, int axis, std::int64_t start, std::int64_t len);
Tensor concat(const std::vector<Tensor>& parts, int axis);

// Trainable affine + running statistics of a batch-norm layer.
struct BnState {
  Tensor gamma;
  Tensor beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  double eps = 1e-5;
  double momentum = 0.1;
};

BnState make_bn_state(std::int64_t channels, bool requires_grad = true);

// Normalizes over every axis except `channel_axis`.  Training mode uses
// batch statistics (population >= 2 or DegenerateBatchError) and updates the
// running buffers in place; eval mode reads the running buffers.
Tensor batch_norm(const Tensor& x, BnState& state, int channel_axis, bool training);

// x:[Cin,T,H,W] (T acts as batch), w:[Cout,Cin/groups,kh,kw], bias:[Cout] optional.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride_h, int stride_w, int pad_h, int pad_w, int groups);

// x:[Cin,T], w:[Cout,Cin,k], bias:[Cout] optional; zero padding.
Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& bias,
              int stride, int pad);

// x:[C,T] -> [C,floor((T-k)/s)+1]; trailing remainder is dropped.
Tensor max_pool1d(const Tensor& x, int k, int s);

// x:[C,T] -> [C,T,k] zero-padded symmetric windows; k must be odd.
Tensor unfold_time(const Tensor& x, int k);

}  // namespace dcac::ops

#endif  // DCAC_OPS_HPP_
