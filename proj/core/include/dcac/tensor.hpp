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

#ifndef DCAC_TENSOR_HPP_
#define DCAC_TENSOR_HPP_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dcac/error.hpp"

namespace dcac {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Persistent gradient accumulator; empty until the first backward pass
  // reaches this tensor.  Same length as data once allocated.
  std::vector<double> grad;
  // Op record that produced this tensor; null for leaves.
  std::shared_ptr<Node> creator;
};

// One reverse-mode op record.  `backward` receives the adjoint of the output
// and must add each input's contribution into `sink(input_index)`.
struct Node {
  const char* op = "";
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::weak_ptr<TensorImpl> output;
  std::function<void(const std::vector<double>& out_adj,
                     const std::function<std::vector<double>&(std::size_t)>& sink)>
      backward;
};

}  // namespace detail

// Dense row-major float64 tensor participating in a dynamically built
// reverse-mode graph.  Copies are shallow; the payload is shared.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> values,
                          bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int rank() const { return static_cast<int>(impl_->shape.size()); }
  std::int64_t numel() const { return static_cast<std::int64_t>(impl_->data.size()); }

  double* data() { return impl_->data.data(); }
  const double* data() const { return impl_->data.data(); }
  std::vector<double>& values() { return impl_->data; }
  const std::vector<double>& values() const { return impl_->data; }

  // Value of a rank-0 / single-element tensor.
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::vector<double>& grad();
  const std::vector<double>& grad() const;
  void zero_grad();

  // Value copy detached from the graph.
  Tensor detached() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }

  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {

// Creates the output tensor of an op and, when any input needs gradients,
// records the op on the graph.
Tensor make_op_output(const char* op, Shape shape, std::vector<double> values,
                      const std::vector<Tensor>& inputs,
                      std::function<void(const std::vector<double>&,
                                         const std::function<std::vector<double>&(std::size_t)>&)>
                          backward);

}  // namespace detail

// Reverse topological order of the op records reachable from `root`
// (root's creator first in reverse order).  Exposed for tests.
std::vector<std::shared_ptr<detail::Node>> topo_order(const Tensor& root);

// Reverse-mode sweep from a scalar root.  Adds one unit of root sensitivity
// into the persistent grad of every reachable requires_grad tensor; repeated
// calls accumulate.  Throws ShapeError if root is not a single element.
void backward(const Tensor& root);

}  // namespace dcac

#endif  // DCAC_TENSOR_HPP_
