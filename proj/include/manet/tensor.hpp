#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace manet {

namespace detail {

// One node of the single-use autodiff tape. Activations own their parents,
// so the whole graph of a forward pass is released once the caller drops the
// loss handle; leaf tensors (parameters) have no parents and persist.
struct TensorImpl {
  std::vector<int> shape;
  std::vector<float> data;
  std::vector<float> grad;  // allocated on first accumulation
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;  // scatters this->grad into parents

  size_t numel() const { return data.size(); }

  std::vector<float>& ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0f);
    return grad;
  }
};

}  // namespace detail

// Value-semantic handle onto a shared tensor buffer participating in a
// dynamically built reverse-mode graph. fp32 storage throughout; reduction
// kernels accumulate in double.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<int> shape, std::vector<float> data, bool requires_grad = false);

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, float value, bool requires_grad = false);
  static Tensor scalar(float value, bool requires_grad = false);  // shape {1}

  bool defined() const { return impl_ != nullptr; }
  const std::vector<int>& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int dim(int i) const { return impl_->shape[static_cast<size_t>(i)]; }
  size_t numel() const { return impl_->data.size(); }

  std::vector<float>& data() { return impl_->data; }
  const std::vector<float>& data() const { return impl_->data; }
  float* ptr() { return impl_->data.data(); }
  const float* ptr() const { return impl_->data.data(); }

  // Scalar convenience; requires numel() == 1.
  float value() const;

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg) { impl_->requires_grad = rg; }

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  const std::vector<float>& grad() const;
  void zero_grad() { impl_->grad.clear(); }

  // Reverse-mode accumulation from a scalar. Throws if numel() != 1.
  void backward() const;

  std::shared_ptr<detail::TensorImpl> impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// Number of elements implied by a shape.
size_t shape_numel(const std::vector<int>& shape);

// "[2, 3, 4]" for error messages.
std::string shape_str(const std::vector<int>& shape);

// Builds a graph node: requires_grad is inherited from parents, and the
// backward closure is only retained when some parent needs gradients.
Tensor make_node(std::vector<int> shape, std::vector<float> data,
                 const std::vector<Tensor>& parents,
                 std::function<void(detail::TensorImpl&)> backward_fn);

// While alive, make_node drops all graph bookkeeping (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace manet
