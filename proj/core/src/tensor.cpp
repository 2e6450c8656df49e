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

#include "dcac/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

namespace dcac {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (const auto d : shape) {
    if (d <= 0) throw ShapeError("non-positive extent in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << "]";
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto impl = std::make_shared<detail::TensorImpl>();
  const auto n = shape_numel(shape);
  impl->shape = std::move(shape);
  impl->data.assign(static_cast<std::size_t>(n), 0.0);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.values().begin(), t.values().end(), value);
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> values, bool requires_grad) {
  const auto n = shape_numel(shape);
  if (n != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("data length " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(values);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_data({1}, {value}, requires_grad);
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

std::vector<double>& Tensor::grad() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), 0.0);
  return impl_->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (impl_->grad.empty()) throw Error("grad accessed before any backward pass");
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::detached() const {
  return Tensor::from_data(impl_->shape, impl_->data, false);
}

namespace detail {

Tensor make_op_output(const char* op, Shape shape, std::vector<double> values,
                      const std::vector<Tensor>& inputs,
                      std::function<void(const std::vector<double>&,
                                         const std::function<std::vector<double>&(std::size_t)>&)>
                          backward_fn) {
  bool needs_graph = false;
  for (const auto& in : inputs) needs_graph = needs_graph || in.requires_grad();

  Tensor out = Tensor::from_data(std::move(shape), std::move(values), needs_graph);
  if (needs_graph) {
    auto node = std::make_shared<Node>();
    node->op = op;
    node->inputs.reserve(inputs.size());
    for (const auto& in : inputs) node->inputs.push_back(in.impl());
    node->output = out.impl();
    node->backward = std::move(backward_fn);
    out.impl()->creator = std::move(node);
  }
  return out;
}

}  // namespace detail

std::vector<std::shared_ptr<detail::Node>> topo_order(const Tensor& root) {
  // Iterative post-order DFS over op records; each node appears exactly once.
  std::vector<std::shared_ptr<detail::Node>> order;
  if (!root.impl()->creator) return order;

  std::unordered_set<const detail::Node*> seen;
  struct Frame {
    std::shared_ptr<detail::Node> node;
    std::size_t next_input = 0;
  };
  std::vector<Frame> stack;
  seen.insert(root.impl()->creator.get());
  stack.push_back({root.impl()->creator});

  while (!stack.empty()) {
    Frame& top = stack.back();
    if (top.next_input < top.node->inputs.size()) {
      const auto& in = top.node->inputs[top.next_input++];
      if (in->creator && !seen.count(in->creator.get())) {
        seen.insert(in->creator.get());
        stack.push_back({in->creator});
      }
    } else {
      order.push_back(top.node);
      stack.pop_back();
    }
  }
  // Post-order gives children first; reverse so the root's creator is first.
  std::reverse(order.begin(), order.end());
  return order;
}

void backward(const Tensor& root) {
  if (root.numel() != 1) {
    throw ShapeError("backward() requires a scalar root, got " + shape_str(root.shape()));
  }

  const auto order = topo_order(root);

  // Per-call adjoint buffers so repeated backward passes accumulate exactly
  // one unit of sensitivity each.
  std::unordered_map<const detail::TensorImpl*, std::vector<double>> adjoint;
  adjoint.reserve(order.size() * 2 + 1);
  auto adj_of = [&adjoint](const std::shared_ptr<detail::TensorImpl>& t) -> std::vector<double>& {
    auto it = adjoint.find(t.get());
    if (it == adjoint.end()) {
      it = adjoint.emplace(t.get(), std::vector<double>(t->data.size(), 0.0)).first;
    }
    return it->second;
  };

  adj_of(root.impl()) = {1.0};

  for (const auto& node : order) {
    auto out = node->output.lock();
    if (!out) throw Error("graph output expired before backward");
    auto it = adjoint.find(out.get());
    if (it == adjoint.end()) continue;  // no sensitivity reached this op
    const std::vector<double>& out_adj = it->second;
    auto sink = [&](std::size_t input_index) -> std::vector<double>& {
      return adj_of(node->inputs[input_index]);
    };
    node->backward(out_adj, sink);
  }

  // Flush adjoints into persistent grads in deterministic (topo) order.
  auto flush = [&adjoint](const std::shared_ptr<detail::TensorImpl>& t) {
    if (!t->requires_grad) return;
    auto it = adjoint.find(t.get());
    if (it == adjoint.end()) return;
    if (t->grad.empty()) t->grad.assign(t->data.size(), 0.0);
    const auto& a = it->second;
    for (std::size_t i = 0; i < a.size(); ++i) t->grad[i] += a[i];
    adjoint.erase(it);
  };
  flush(root.impl());
  for (const auto& node : order) {
    if (auto out = node->output.lock()) flush(out);
    for (const auto& in : node->inputs) flush(in);
  }
}

}  // namespace dcac
