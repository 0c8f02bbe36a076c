#include <Eigen/Core>
#include <array>
#include <cstring>

#include "core/ops.hpp"

namespace hdf {

namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Map = Eigen::Map<MatRM<T>>;
template <typename T>
using CMap = Eigen::Map<const MatRM<T>>;
template <typename T>
using StrideMap = Eigen::Map<MatRM<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using CStrideMap = Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>>;

// Geometry of a conv mapping "in" spatial extents to "out" spatial extents.
// Transposed conv reuses the same geometry with the roles of its own input
// and output swapped.
struct ConvGeom {
  int rank = 2;
  int64_t cin = 0, cout = 0;
  std::array<int64_t, 3> in{1, 1, 1};
  std::array<int64_t, 3> out{1, 1, 1};
  std::array<int64_t, 3> k{1, 1, 1};
  int stride = 1, pad = 0;
  int64_t kvol = 1, pin = 1, pout = 1;
};

ConvGeom make_geom(const char* op, const Shape& x, const Shape& w, int stride,
                   int pad, bool transposed) {
  if (x.size() < 3 || x.size() > 4 || w.size() != x.size() + 1) {
    fail(ErrorCode::shape_mismatch,
         std::string(op) + ": x " + to_string(x) + " w " + to_string(w));
  }
  if (stride < 1 || pad < 0) {
    fail(ErrorCode::invalid_argument, std::string(op) + ": bad stride/padding");
  }
  ConvGeom g;
  g.rank = static_cast<int>(x.size()) - 1;
  g.stride = stride;
  g.pad = pad;
  // w is (Cout,Cin,K...) for conv and (Cin,Cout,K...) for transposed conv.
  const int64_t x_ch = x[0];
  const int64_t w_first = w[0], w_second = w[1];
  if (w_first != (transposed ? x_ch : w_first) || (!transposed && w_second != x_ch) ||
      (transposed && w_first != x_ch)) {
    fail(ErrorCode::shape_mismatch, std::string(op) + ": channel mismatch, x " +
                                        to_string(x) + " w " + to_string(w));
  }
  g.cout = transposed ? w_second : w_first;
  g.cin = x_ch;
  for (int i = 0; i < g.rank; ++i) {
    g.k[i] = w[2 + i];
    g.kvol *= g.k[i];
  }
  for (int i = 0; i < g.rank; ++i) {
    const int64_t xi = x[1 + i];
    if (transposed) {
      // x lives in the conv's "out" space.
      g.out[i] = xi;
      g.in[i] = (xi - 1) * stride - 2 * pad + g.k[i];
      if (g.in[i] < 1) {
        fail(ErrorCode::shape_mismatch, std::string(op) + ": degenerate output extent");
      }
    } else {
      g.in[i] = xi;
      const int64_t num = xi + 2 * pad - g.k[i];
      if (num < 0 || num % stride != 0) {
        // Non-divisible extents are accepted with floor semantics elsewhere;
        // here every config the model uses divides exactly, so reject early.
        if (num < 0) {
          fail(ErrorCode::shape_mismatch, std::string(op) + ": kernel " +
                                              std::to_string(g.k[i]) +
                                              " larger than padded input " +
                                              std::to_string(xi));
        }
      }
      g.out[i] = num / stride + 1;
    }
  }
  for (int i = 0; i < g.rank; ++i) {
    g.pin *= g.in[i];
    g.pout *= g.out[i];
  }
  return g;
}

// Gather (Scatter=false): cols[(c*kvol+kk), j] = x[c, i(kk,oj)] over the
// conv-output chunk [row0, row1) of the outermost output axis.
// Scatter=true runs the transpose: x[c, i] += cols[...].
template <typename T, bool Scatter>
void im2col_slab(const ConvGeom& g, std::conditional_t<Scatter, T*, const T*> x,
                 std::conditional_t<Scatter, const T*, T*> cols, int64_t o0_begin,
                 int64_t o0_end) {
  const int64_t out1 = g.rank == 3 ? g.out[1] : g.out[g.rank - 1];
  const int64_t out2 = g.rank == 3 ? g.out[2] : 1;
  const int64_t in1 = g.rank == 3 ? g.in[1] : g.in[g.rank - 1];
  const int64_t in2 = g.rank == 3 ? g.in[2] : 1;
  const int64_t chunk_p = (o0_end - o0_begin) * out1 * out2;
  for (int64_t c = 0; c < g.cin; ++c) {
    const int64_t x_base = c * g.pin;
    for (int64_t kk = 0; kk < g.kvol; ++kk) {
      int64_t k0, k1, k2;
      if (g.rank == 3) {
        k0 = kk / (g.k[1] * g.k[2]);
        k1 = (kk / g.k[2]) % g.k[1];
        k2 = kk % g.k[2];
      } else {
        k0 = kk / g.k[1];
        k1 = kk % g.k[1];
        k2 = 0;
      }
      const int64_t row = c * g.kvol + kk;
      T* col_row = nullptr;
      const T* ccol_row = nullptr;
      if constexpr (Scatter) {
        ccol_row = cols + row * chunk_p;
      } else {
        col_row = cols + row * chunk_p;
      }
      int64_t j = 0;
      for (int64_t o0 = o0_begin; o0 < o0_end; ++o0) {
        const int64_t i0 = o0 * g.stride - g.pad + k0;
        const bool ok0 = (i0 >= 0 && i0 < g.in[0]);
        for (int64_t o1 = 0; o1 < out1; ++o1) {
          const int64_t i1 = o1 * g.stride - g.pad + k1;
          const bool ok01 = ok0 && (i1 >= 0 && i1 < in1);
          if (g.rank == 2) {
            if constexpr (Scatter) {
              if (ok01) x[x_base + i0 * in1 + i1] += ccol_row[j];
            } else {
              col_row[j] = ok01 ? x[x_base + i0 * in1 + i1] : T(0);
            }
            ++j;
          } else {
            const int64_t plane = x_base + (i0 * in1 + i1) * in2;
            for (int64_t o2 = 0; o2 < out2; ++o2, ++j) {
              const int64_t i2 = o2 * g.stride - g.pad + k2;
              const bool ok = ok01 && (i2 >= 0 && i2 < in2);
              if constexpr (Scatter) {
                if (ok) x[plane + i2] += ccol_row[j];
              } else {
                col_row[j] = ok ? x[plane + i2] : T(0);
              }
            }
          }
        }
      }
    }
  }
}

// Slab rows per chunk so the cols buffer stays bounded.
int64_t slab_rows(const ConvGeom& g) {
  constexpr int64_t budget = int64_t(4) << 20;  // elements
  const int64_t inner = (g.rank == 3 ? g.out[1] * g.out[2] : g.out[1]);
  const int64_t per_row = g.cin * g.kvol * inner;
  return std::max<int64_t>(1, budget / std::max<int64_t>(per_row, 1));
}

bool is_pointwise(const ConvGeom& g) {
  return g.kvol == 1 && g.stride == 1 && g.pad == 0;
}

template <typename T>
Shape out_shape_of(const ConvGeom& g, bool transposed) {
  Shape s{transposed ? g.cout : g.cout};
  if (transposed) {
    s = Shape{g.cout};
    for (int i = 0; i < g.rank; ++i) s.push_back(g.in[i]);
  } else {
    for (int i = 0; i < g.rank; ++i) s.push_back(g.out[i]);
  }
  return s;
}

}  // namespace

template <typename T>
Tensor<T> conv_nd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                  int stride, int padding) {
  ConvGeom g = make_geom("conv_nd", x.shape(), w.shape(), stride, padding, false);
  if (b.rank() != 1 || b.shape()[0] != g.cout) {
    fail(ErrorCode::shape_mismatch, "conv_nd: bias " + to_string(b.shape()) +
                                        " for " + std::to_string(g.cout) + " channels");
  }
  const int64_t K = g.cin * g.kvol;
  std::vector<T> y(static_cast<size_t>(g.cout * g.pout));
  CMap<T> wm(w.data().data(), g.cout, K);
  Map<T> ym(y.data(), g.cout, g.pout);
  if (is_pointwise(g)) {
    CMap<T> xm(x.data().data(), g.cin, g.pin);
    ym.noalias() = wm * xm;
  } else {
    const int64_t inner = g.pout / g.out[0];
    const int64_t rows = slab_rows(g);
    std::vector<T> cols;
    for (int64_t o0 = 0; o0 < g.out[0]; o0 += rows) {
      const int64_t o0e = std::min(g.out[0], o0 + rows);
      const int64_t chunk_p = (o0e - o0) * inner;
      cols.resize(static_cast<size_t>(K * chunk_p));
      im2col_slab<T, false>(g, x.data().data(), cols.data(), o0, o0e);
      CMap<T> cm(cols.data(), K, chunk_p);
      StrideMap<T> yblock(y.data() + o0 * inner, g.cout, chunk_p,
                          Eigen::OuterStride<>(g.pout));
      yblock.noalias() = wm * cm;
    }
  }
  for (int64_t c = 0; c < g.cout; ++c) {
    const T bc = b.data()[c];
    T* row = y.data() + c * g.pout;
    for (int64_t j = 0; j < g.pout; ++j) row[j] += bc;
  }

  auto backward = [g, K](TensorNode<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    CMap<T> gy(self.grad.data(), g.cout, g.pout);
    CMap<T> wm(pw.value.data(), g.cout, K);
    if (pb.requires_grad) {
      pb.ensure_grad();
      for (int64_t c = 0; c < g.cout; ++c) pb.grad[c] += gy.row(c).sum();
    }
    if (is_pointwise(g)) {
      CMap<T> xm(px.value.data(), g.cin, g.pin);
      if (pw.requires_grad) {
        pw.ensure_grad();
        Map<T> gw(pw.grad.data(), g.cout, K);
        gw.noalias() += gy * xm.transpose();
      }
      if (px.requires_grad) {
        px.ensure_grad();
        Map<T> gx(px.grad.data(), g.cin, g.pin);
        gx.noalias() += wm.transpose() * gy;
      }
      return;
    }
    const int64_t inner = g.pout / g.out[0];
    const int64_t rows = slab_rows(g);
    std::vector<T> cols;
    for (int64_t o0 = 0; o0 < g.out[0]; o0 += rows) {
      const int64_t o0e = std::min(g.out[0], o0 + rows);
      const int64_t chunk_p = (o0e - o0) * inner;
      cols.resize(static_cast<size_t>(K * chunk_p));
      CStrideMap<T> gyblock(self.grad.data() + o0 * inner, g.cout, chunk_p,
                            Eigen::OuterStride<>(g.pout));
      if (pw.requires_grad) {
        pw.ensure_grad();
        im2col_slab<T, false>(g, px.value.data(), cols.data(), o0, o0e);
        Map<T> gw(pw.grad.data(), g.cout, K);
        CMap<T> cm(cols.data(), K, chunk_p);
        gw.noalias() += gyblock * cm.transpose();
      }
      if (px.requires_grad) {
        px.ensure_grad();
        Map<T> cm(cols.data(), K, chunk_p);
        cm.noalias() = wm.transpose() * gyblock;
        im2col_slab<T, true>(g, px.grad.data(), cols.data(), o0, o0e);
      }
    }
  };
  return make_op_result<T>("conv_nd", out_shape_of<T>(g, false), std::move(y),
                           {x, w, b}, std::move(backward));
}

template <typename T>
Tensor<T> conv_transpose_nd(const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& b, int stride, int padding) {
  // Geometry of the conv that maps our output back onto our input.
  ConvGeom g = make_geom("conv_transpose_nd", x.shape(), w.shape(), stride,
                         padding, true);
  // Conv roles: cin/cout describe the forward conv out->in, so the deconv
  // weight (Cin,Cout,K...) is exactly that conv's (Cout,Cin,K...) layout.
  const int64_t conv_cout = g.cin;   // deconv input channels
  const int64_t conv_cin = g.cout;   // deconv output channels
  const int64_t K = conv_cin * g.kvol;
  if (b.rank() != 1 || b.shape()[0] != conv_cin) {
    fail(ErrorCode::shape_mismatch, "conv_transpose_nd: bias " + to_string(b.shape()));
  }
  ConvGeom cg = g;
  cg.cin = conv_cin;
  cg.cout = conv_cout;

  std::vector<T> y(static_cast<size_t>(conv_cin * g.pin), T(0));
  CMap<T> wm(w.data().data(), conv_cout, K);
  {
    const int64_t inner = g.pout / g.out[0];
    const int64_t rows = slab_rows(cg);
    std::vector<T> cols;
    for (int64_t o0 = 0; o0 < g.out[0]; o0 += rows) {
      const int64_t o0e = std::min(g.out[0], o0 + rows);
      const int64_t chunk_p = (o0e - o0) * inner;
      cols.resize(static_cast<size_t>(K * chunk_p));
      CStrideMap<T> xblock(x.data().data() + o0 * inner, conv_cout, chunk_p,
                           Eigen::OuterStride<>(g.pout));
      Map<T> cm(cols.data(), K, chunk_p);
      cm.noalias() = wm.transpose() * xblock;
      im2col_slab<T, true>(cg, y.data(), cols.data(), o0, o0e);
    }
  }
  for (int64_t c = 0; c < conv_cin; ++c) {
    const T bc = b.data()[c];
    T* row = y.data() + c * g.pin;
    for (int64_t j = 0; j < g.pin; ++j) row[j] += bc;
  }

  auto backward = [g, cg, conv_cin, conv_cout, K](TensorNode<T>& self) {
    auto& px = *self.parents[0];
    auto& pw = *self.parents[1];
    auto& pb = *self.parents[2];
    if (pb.requires_grad) {
      pb.ensure_grad();
      CMap<T> gy(self.grad.data(), conv_cin, g.pin);
      for (int64_t c = 0; c < conv_cin; ++c) pb.grad[c] += gy.row(c).sum();
    }
    CMap<T> wm(pw.value.data(), conv_cout, K);
    const int64_t inner = g.pout / g.out[0];
    const int64_t rows = slab_rows(cg);
    std::vector<T> cols;
    for (int64_t o0 = 0; o0 < g.out[0]; o0 += rows) {
      const int64_t o0e = std::min(g.out[0], o0 + rows);
      const int64_t chunk_p = (o0e - o0) * inner;
      cols.resize(static_cast<size_t>(K * chunk_p));
      // cols of the deconv OUTPUT gradient, gathered over conv geometry
      im2col_slab<T, false>(cg, self.grad.data(), cols.data(), o0, o0e);
      CMap<T> cm(cols.data(), K, chunk_p);
      if (px.requires_grad) {
        px.ensure_grad();
        StrideMap<T> gxblock(px.grad.data() + o0 * inner, conv_cout, chunk_p,
                             Eigen::OuterStride<>(g.pout));
        gxblock.noalias() += wm * cm;
      }
      if (pw.requires_grad) {
        pw.ensure_grad();
        Map<T> gw(pw.grad.data(), conv_cout, K);
        CStrideMap<T> xblock(px.value.data() + o0 * inner, conv_cout, chunk_p,
                             Eigen::OuterStride<>(g.pout));
        gw.noalias() += xblock * cm.transpose();
      }
    }
  };
  return make_op_result<T>("conv_transpose_nd", out_shape_of<T>(g, true),
                           std::move(y), {x, w, b}, std::move(backward));
}

#define HDF_INSTANTIATE(T)                                                       \
  template Tensor<T> conv_nd(const Tensor<T>&, const Tensor<T>&,                 \
                             const Tensor<T>&, int, int);                        \
  template Tensor<T> conv_transpose_nd(const Tensor<T>&, const Tensor<T>&,       \
                                       const Tensor<T>&, int, int);

HDF_INSTANTIATE(float)
HDF_INSTANTIATE(double)
#undef HDF_INSTANTIATE

}  // namespace hdf
