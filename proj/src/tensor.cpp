#include "manet/tensor.hpp"

#include <stdexcept>
#include <unordered_set>

namespace manet {

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor shape has non-positive extent " + shape_str(shape));
    n *= static_cast<size_t>(d);
  }
  return n;
}

std::string shape_str(const std::vector<int>& shape) {
  std::string s = "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<int> shape, std::vector<float> data, bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  }
  impl_ = std::make_shared<detail::TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  std::vector<float> d(shape_numel(shape), 0.0f);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, float value, bool requires_grad) {
  std::vector<float> d(shape_numel(shape), value);
  return Tensor(std::move(shape), std::move(d), requires_grad);
}

Tensor Tensor::scalar(float value, bool requires_grad) {
  return Tensor({1}, {value}, requires_grad);
}

float Tensor::value() const {
  if (numel() != 1) {
    throw std::invalid_argument("value() requires a scalar tensor, got shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

const std::vector<float>& Tensor::grad() const {
  if (!has_grad()) throw std::runtime_error("tensor has no gradient buffer");
  return impl_->grad;
}

namespace {
bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace

NoGradGuard::NoGradGuard() : prev_(grad_mode()) { grad_mode() = false; }
NoGradGuard::~NoGradGuard() { grad_mode() = prev_; }

Tensor make_node(std::vector<int> shape, std::vector<float> data,
                 const std::vector<Tensor>& parents,
                 std::function<void(detail::TensorImpl&)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  bool needs = false;
  if (grad_mode()) {
    for (const Tensor& p : parents) {
      if (p.requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  if (needs) {
    auto impl = out.impl();
    impl->requires_grad = true;
    impl->parents.reserve(parents.size());
    for (const Tensor& p : parents) impl->parents.push_back(p.impl());
    impl->backward_fn = std::move(backward_fn);
  }
  return out;
}

void Tensor::backward() const {
  if (!impl_) throw std::runtime_error("backward() on undefined tensor");
  if (numel() != 1) {
    throw std::invalid_argument("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) return;  // nothing reachable needs gradients

  // Iterative post-order DFS for the topological order.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> visited;
  std::vector<std::pair<detail::TensorImpl*, size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      detail::TensorImpl* parent = node->parents[idx].get();
      ++idx;
      if (parent->requires_grad && !visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad()[0] = 1.0f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorImpl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace manet
