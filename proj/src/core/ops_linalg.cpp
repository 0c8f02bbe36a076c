#include <Eigen/Core>

#include "core/ops.hpp"

namespace hdf {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatRM<T>>;
template <typename T>
using CMap = Eigen::Map<const MatRM<T>>;

}  // namespace

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
  if (x.rank() != 2 || w.rank() != 2 || b.rank() != 1) {
    fail(ErrorCode::shape_mismatch, "linear: expects x(n,in) w(out,in) b(out)");
  }
  const int64_t n = x.shape()[0], in = x.shape()[1];
  const int64_t out = w.shape()[0];
  if (w.shape()[1] != in || b.shape()[0] != out) {
    fail(ErrorCode::shape_mismatch, "linear: x " + to_string(x.shape()) + " w " +
                                        to_string(w.shape()) + " b " +
                                        to_string(b.shape()));
  }
  std::vector<T> y(static_cast<size_t>(n * out));
  {
    CMap<T> xm(x.data().data(), n, in);
    CMap<T> wm(w.data().data(), out, in);
    Map<T> ym(y.data(), n, out);
    ym.noalias() = xm * wm.transpose();
    for (int64_t r = 0; r < n; ++r) {
      for (int64_t c = 0; c < out; ++c) ym(r, c) += b.data()[c];
    }
  }
  auto backward = [n, in, out](TensorNode<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    CMap<T> gy(self.grad.data(), n, out);
    if (px.requires_grad) {
      px.ensure_grad();
      Map<T> gx(px.grad.data(), n, in);
      CMap<T> wm(pw.value.data(), out, in);
      gx.noalias() += gy * wm;
    }
    if (pw.requires_grad) {
      pw.ensure_grad();
      Map<T> gw(pw.grad.data(), out, in);
      CMap<T> xm(px.value.data(), n, in);
      gw.noalias() += gy.transpose() * xm;
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t r = 0; r < n; ++r) {
        for (int64_t c = 0; c < out; ++c) pb.grad[c] += gy(r, c);
      }
    }
  };
  return make_op_result<T>("linear", Shape{n, out}, std::move(y), {x, w, b},
                           std::move(backward));
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) {
    fail(ErrorCode::shape_mismatch, "matmul: " + to_string(a.shape()) + " x " +
                                        to_string(b.shape()));
  }
  const int64_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  std::vector<T> y(static_cast<size_t>(n * m));
  {
    CMap<T> am(a.data().data(), n, k);
    CMap<T> bm(b.data().data(), k, m);
    Map<T> ym(y.data(), n, m);
    ym.noalias() = am * bm;
  }
  auto backward = [n, k, m](TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    CMap<T> gy(self.grad.data(), n, m);
    if (pa.requires_grad) {
      pa.ensure_grad();
      Map<T> ga(pa.grad.data(), n, k);
      CMap<T> bm(pb.value.data(), k, m);
      ga.noalias() += gy * bm.transpose();
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      Map<T> gb(pb.grad.data(), k, m);
      CMap<T> am(pa.value.data(), n, k);
      gb.noalias() += am.transpose() * gy;
    }
  };
  return make_op_result<T>("matmul", Shape{n, m}, std::move(y), {a, b},
                           std::move(backward));
}

template <typename T>
Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 3 || b.rank() != 3 || a.shape()[0] != b.shape()[0] ||
      a.shape()[2] != b.shape()[1]) {
    fail(ErrorCode::shape_mismatch,
         "bmm: " + to_string(a.shape()) + " x " + to_string(b.shape()));
  }
  const int64_t B = a.shape()[0], n = a.shape()[1], k = a.shape()[2], m = b.shape()[2];
  std::vector<T> y(static_cast<size_t>(B * n * m));
  for (int64_t i = 0; i < B; ++i) {
    CMap<T> am(a.data().data() + i * n * k, n, k);
    CMap<T> bm(b.data().data() + i * k * m, k, m);
    Map<T> ym(y.data() + i * n * m, n, m);
    ym.noalias() = am * bm;
  }
  auto backward = [B, n, k, m](TensorNode<T>& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    for (int64_t i = 0; i < B; ++i) {
      CMap<T> gy(self.grad.data() + i * n * m, n, m);
      if (pa.requires_grad) {
        pa.ensure_grad();
        Map<T> ga(pa.grad.data() + i * n * k, n, k);
        CMap<T> bm(pb.value.data() + i * k * m, k, m);
        ga.noalias() += gy * bm.transpose();
      }
      if (pb.requires_grad) {
        pb.ensure_grad();
        Map<T> gb(pb.grad.data() + i * k * m, k, m);
        CMap<T> am(pa.value.data() + i * n * k, n, k);
        gb.noalias() += am.transpose() * gy;
      }
    }
  };
  return make_op_result<T>("bmm", Shape{B, n, m}, std::move(y), {a, b},
                           std::move(backward));
}

#define HDF_INSTANTIATE(T)                                                         \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&); \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                   \
  template Tensor<T> bmm(const Tensor<T>&, const Tensor<T>&);

HDF_INSTANTIATE(float)
HDF_INSTANTIATE(double)
#undef HDF_INSTANTIATE

}  // namespace hdf
