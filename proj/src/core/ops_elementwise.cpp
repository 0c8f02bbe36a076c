#include <cmath>

#include "core/ops.hpp"

namespace hdf {

namespace {

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": shapes " +
                                        to_string(a.shape()) + " vs " +
                                        to_string(b.shape()));
  }
}

// Unary elementwise helper. dfdx(x_i, y_i) is the local derivative.
template <typename T, typename F, typename D>
Tensor<T> unary_op(const char* name, const Tensor<T>& x, F f, D dfdx) {
  const auto& xv = x.data();
  std::vector<T> out(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return make_op_result<T>(
      name, x.shape(), std::move(out), {x},
      [dfdx](TensorNode<T>& self) {
        auto& p = *self.parents[0];
        if (!p.requires_grad) return;
        p.ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) {
          p.grad[i] += self.grad[i] * dfdx(p.value[i], self.value[i]);
        }
      });
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
  return make_op_result<T>("add", a.shape(), std::move(out), {a, b},
                           [](TensorNode<T>& self) {
                             for (int k = 0; k < 2; ++k) {
                               auto& p = *self.parents[k];
                               if (!p.requires_grad) continue;
                               p.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 p.grad[i] += self.grad[i];
                             }
                           });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
  return make_op_result<T>("sub", a.shape(), std::move(out), {a, b},
                           [](TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             auto& pb = *self.parents[1];
                             if (pa.requires_grad) {
                               pa.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 pa.grad[i] += self.grad[i];
                             }
                             if (pb.requires_grad) {
                               pb.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 pb.grad[i] -= self.grad[i];
                             }
                           });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
  return make_op_result<T>("mul", a.shape(), std::move(out), {a, b},
                           [](TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             auto& pb = *self.parents[1];
                             if (pa.requires_grad) {
                               pa.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 pa.grad[i] += self.grad[i] * pb.value[i];
                             }
                             if (pb.requires_grad) {
                               pb.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 pb.grad[i] += self.grad[i] * pa.value[i];
                             }
                           });
}

template <typename T>
Tensor<T> div_elem(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("div", a, b);
  const auto& av = a.data();
  const auto& bv = b.data();
  std::vector<T> out(av.size());
  for (size_t i = 0; i < av.size(); ++i) out[i] = av[i] / bv[i];
  return make_op_result<T>("div", a.shape(), std::move(out), {a, b},
                           [](TensorNode<T>& self) {
                             auto& pa = *self.parents[0];
                             auto& pb = *self.parents[1];
                             if (pa.requires_grad) {
                               pa.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 pa.grad[i] += self.grad[i] / pb.value[i];
                             }
                             if (pb.requires_grad) {
                               pb.ensure_grad();
                               for (size_t i = 0; i < self.grad.size(); ++i)
                                 pb.grad[i] -= self.grad[i] * self.value[i] / pb.value[i];
                             }
                           });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& x, T c) {
  return unary_op<T>(
      "add_scalar", x, [c](T v) { return v + c; },
      [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& x, T c) {
  return unary_op<T>(
      "mul_scalar", x, [c](T v) { return v * c; },
      [c](T, T) { return c; });
}

template <typename T>
Tensor<T> pow_scalar(const Tensor<T>& x, T p) {
  for (T v : x.data()) {
    if (v < T(0)) fail(ErrorCode::invalid_argument, "pow_scalar: negative base");
  }
  return unary_op<T>(
      "pow_scalar", x, [p](T v) { return std::pow(v, p); },
      [p](T v, T) {
        if (v == T(0)) return p >= T(1) ? T(0) : T(0);  // subgradient at 0
        return p * std::pow(v, p - T(1));
      });
}

template <typename T>
Tensor<T> log_clamped(const Tensor<T>& x, T floor_val) {
  return unary_op<T>(
      "log_clamped", x,
      [floor_val](T v) { return std::log(std::max(v, floor_val)); },
      [floor_val](T v, T) { return v > floor_val ? T(1) / v : T(0); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary_op<T>(
      "relu", x, [](T v) { return v > T(0) ? v : T(0); },
      [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
  constexpr double inv_sqrt2 = 0.70710678118654752440;
  constexpr double inv_sqrt2pi = 0.39894228040143267794;
  return unary_op<T>(
      "gelu", x,
      [](T v) {
        return static_cast<T>(0.5 * static_cast<double>(v) *
                              (1.0 + std::erf(static_cast<double>(v) * inv_sqrt2)));
      },
      [](T v, T) {
        double vd = static_cast<double>(v);
        double cdf = 0.5 * (1.0 + std::erf(vd * inv_sqrt2));
        double pdf = inv_sqrt2pi * std::exp(-0.5 * vd * vd);
        return static_cast<T>(cdf + vd * pdf);
      });
}

#define HDF_INSTANTIATE(T)                                            \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);         \
  template Tensor<T> div_elem(const Tensor<T>&, const Tensor<T>&);    \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                 \
  template Tensor<T> mul_scalar(const Tensor<T>&, T);                 \
  template Tensor<T> pow_scalar(const Tensor<T>&, T);                 \
  template Tensor<T> log_clamped(const Tensor<T>&, T);                \
  template Tensor<T> relu(const Tensor<T>&);                          \
  template Tensor<T> gelu(const Tensor<T>&);

HDF_INSTANTIATE(float)
HDF_INSTANTIATE(double)
#undef HDF_INSTANTIATE

}  // namespace hdf
