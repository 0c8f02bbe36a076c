#include "core/tensor.hpp"

#include <cmath>
#include <unordered_set>

namespace hdf {

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = prev_; }

template <typename T>
void check_finite(const char* op, const std::vector<T>& v) {
  if (!finite_checks()) return;
  for (size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      fail(ErrorCode::numeric, std::string(op) + ": non-finite value at flat index " +
                                   std::to_string(i));
    }
  }
}

template <typename T>
Tensor<T> Tensor<T>::zeros(const Shape& s, bool requires_grad) {
  return from_data(s, std::vector<T>(static_cast<size_t>(hdf::numel(s)), T(0)),
                   requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::full(const Shape& s, T v, bool requires_grad) {
  return from_data(s, std::vector<T>(static_cast<size_t>(hdf::numel(s)), v),
                   requires_grad);
}

template <typename T>
Tensor<T> Tensor<T>::from_data(const Shape& s, std::vector<T> data,
                               bool requires_grad) {
  if (static_cast<int64_t>(data.size()) != hdf::numel(s)) {
    fail(ErrorCode::shape_mismatch,
         "from_data: " + std::to_string(data.size()) + " values for shape " +
             to_string(s));
  }
  for (int64_t e : s) {
    if (e <= 0) fail(ErrorCode::invalid_argument, "non-positive extent in " + to_string(s));
  }
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = s;
  n->value = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor<T>(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T v) {
  return from_data({}, std::vector<T>{v}, false);
}

template <typename T>
Tensor<T> Tensor<T>::uniform(const Shape& s, T lo, T hi, Rng& rng,
                             bool requires_grad) {
  std::vector<T> data(static_cast<size_t>(hdf::numel(s)));
  for (auto& x : data) x = static_cast<T>(rng.uniform(lo, hi));
  return from_data(s, std::move(data), requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) {
    fail(ErrorCode::shape_mismatch, "item(): tensor has " + std::to_string(numel()) + " elements");
  }
  return node_->value[0];
}

template <typename T>
void Tensor<T>::backward() {
  if (!defined() || numel() != 1) {
    fail(ErrorCode::invalid_argument, "backward() requires a defined scalar root");
  }
  if (!node_->requires_grad) return;

  // Reverse post-order DFS over parent edges yields a topological order in
  // which every node precedes its parents.
  std::vector<TensorNode<T>*> order;
  std::unordered_set<TensorNode<T>*> seen;
  struct Frame {
    TensorNode<T>* node;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({node_.get(), 0});
  seen.insert(node_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorNode<T>* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  node_->ensure_grad();
  node_->grad[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorNode<T>* n = *it;
    if (n->backward) n->backward(*n);
  }
}

template <typename T>
Tensor<T> make_op_result(const char* op, Shape shape, std::vector<T> value,
                         const std::vector<Tensor<T>>& parents,
                         std::function<void(TensorNode<T>&)> backward) {
  if (static_cast<int64_t>(value.size()) != numel(shape)) {
    fail(ErrorCode::internal, std::string(op) + ": result size does not match shape");
  }
  check_finite(op, value);
  auto n = std::make_shared<TensorNode<T>>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  bool needs = false;
  for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs && grad_enabled()) {
    n->requires_grad = true;
    n->parents.reserve(parents.size());
    for (const auto& p : parents) n->parents.push_back(p.node());
    n->backward = std::move(backward);
  }
  return Tensor<T>(std::move(n));
}

template class Tensor<float>;
template class Tensor<double>;

template void check_finite<float>(const char*, const std::vector<float>&);
template void check_finite<double>(const char*, const std::vector<double>&);

template Tensor<float> make_op_result<float>(const char*, Shape, std::vector<float>,
                                             const std::vector<Tensor<float>>&,
                                             std::function<void(TensorNode<float>&)>);
template Tensor<double> make_op_result<double>(const char*, Shape, std::vector<double>,
                                               const std::vector<Tensor<double>>&,
                                               std::function<void(TensorNode<double>&)>);

}  // namespace hdf
