#pragma once

#include <functional>
#include <memory>

#include "core/common.hpp"

namespace hdf {

// One node of the reverse-mode tape. Value storage and gradient storage share
// the node; the graph is a DAG of shared_ptr parent edges built while the
// forward pass runs (define-by-run).
template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // sized lazily, same length as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this->grad, accumulates into parents' grad buffers.
  std::function<void(TensorNode&)> backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), T(0));
  }
};

// Value-semantics handle over a shared node. Tensors are immutable after
// construction by convention; data() is mutable for initialization,
// checkpoint loading and the finite-difference harness only.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() = default;

  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, T v, bool requires_grad = false);
  static Tensor from_data(const Shape& s, std::vector<T> data,
                          bool requires_grad = false);
  static Tensor scalar(T v);
  static Tensor uniform(const Shape& s, T lo, T hi, Rng& rng,
                        bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int64_t numel() const { return static_cast<int64_t>(node_->value.size()); }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  bool requires_grad() const { return node_->requires_grad; }

  std::vector<T>& data() { return node_->value; }
  const std::vector<T>& data() const { return node_->value; }

  // Gradient buffer; populated by backward(). Zero-sized until then.
  std::vector<T>& grad() {
    node_->ensure_grad();
    return node_->grad;
  }
  const std::vector<T>& grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    node_->grad.assign(node_->value.size(), T(0));
  }

  T item() const;

  // Reverse pass from a scalar root. Accumulates into grad buffers of every
  // reachable node with requires_grad set.
  void backward();

  std::shared_ptr<TensorNode<T>>& node() { return node_; }
  const std::shared_ptr<TensorNode<T>>& node() const { return node_; }

  explicit Tensor(std::shared_ptr<TensorNode<T>> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<TensorNode<T>> node_;
};

// Tape recording toggle. Inference paths wrap themselves in NoGradGuard so
// no graph is retained.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Shared constructor for primitive results: validates finiteness, wires
// parents and the backward closure when taping is active.
template <typename T>
Tensor<T> make_op_result(const char* op, Shape shape, std::vector<T> value,
                         const std::vector<Tensor<T>>& parents,
                         std::function<void(TensorNode<T>&)> backward);

template <typename T>
void check_finite(const char* op, const std::vector<T>& v);

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace hdf
