#include <algorithm>
#include <cstring>
#include <numeric>

#include "core/ops.hpp"

namespace hdf {

namespace {

// Splits a shape at `axis` into (outer, extent, inner) block sizes.
struct AxisSplit {
  int64_t outer = 1, extent = 1, inner = 1;
};

template <typename T>
AxisSplit split_axis(const Tensor<T>& x, int axis, const char* op) {
  if (axis < 0 || axis >= x.rank()) {
    fail(ErrorCode::invalid_argument,
         std::string(op) + ": axis " + std::to_string(axis) + " out of range for " +
             to_string(x.shape()));
  }
  AxisSplit s;
  const Shape& sh = x.shape();
  for (int i = 0; i < axis; ++i) s.outer *= sh[i];
  s.extent = sh[axis];
  for (size_t i = axis + 1; i < sh.size(); ++i) s.inner *= sh[i];
  return s;
}

}  // namespace

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis) {
  if (parts.empty()) fail(ErrorCode::invalid_argument, "concat: no operands");
  const Shape& ref = parts[0].shape();
  Shape out_shape = ref;
  int64_t total = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank()) {
      fail(ErrorCode::shape_mismatch, "concat: rank mismatch");
    }
    for (int i = 0; i < p.rank(); ++i) {
      if (i != axis && p.shape()[i] != ref[i]) {
        fail(ErrorCode::shape_mismatch, "concat: shapes " + to_string(ref) +
                                            " vs " + to_string(p.shape()));
      }
    }
    total += p.shape()[axis];
  }
  out_shape[axis] = total;

  AxisSplit s = split_axis(parts[0], axis, "concat");
  std::vector<T> out(static_cast<size_t>(numel(out_shape)));
  std::vector<int64_t> extents;
  extents.reserve(parts.size());
  for (const auto& p : parts) extents.push_back(p.shape()[axis]);

  const int64_t out_row = total * s.inner;
  int64_t offset = 0;
  for (size_t pi = 0; pi < parts.size(); ++pi) {
    const auto& pv = parts[pi].data();
    const int64_t blk = extents[pi] * s.inner;
    for (int64_t o = 0; o < s.outer; ++o) {
      std::memcpy(out.data() + o * out_row + offset, pv.data() + o * blk,
                  sizeof(T) * static_cast<size_t>(blk));
    }
    offset += blk;
  }

  auto backward = [s, extents, total](TensorNode<T>& self) {
    const int64_t out_row = total * s.inner;
    int64_t offset = 0;
    for (size_t pi = 0; pi < self.parents.size(); ++pi) {
      auto& p = *self.parents[pi];
      const int64_t blk = extents[pi] * s.inner;
      if (p.requires_grad) {
        p.ensure_grad();
        for (int64_t o = 0; o < s.outer; ++o) {
          const T* src = self.grad.data() + o * out_row + offset;
          T* dst = p.grad.data() + o * blk;
          for (int64_t i = 0; i < blk; ++i) dst[i] += src[i];
        }
      }
      offset += blk;
    }
  };
  return make_op_result<T>("concat", std::move(out_shape), std::move(out), parts,
                           std::move(backward));
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t len) {
  AxisSplit s = split_axis(x, axis, "slice");
  if (start < 0 || len <= 0 || start + len > s.extent) {
    fail(ErrorCode::invalid_argument,
         "slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
             ") out of bounds for extent " + std::to_string(s.extent));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  std::vector<T> out(static_cast<size_t>(s.outer * len * s.inner));
  const auto& xv = x.data();
  const int64_t in_row = s.extent * s.inner;
  const int64_t out_row = len * s.inner;
  for (int64_t o = 0; o < s.outer; ++o) {
    std::memcpy(out.data() + o * out_row, xv.data() + o * in_row + start * s.inner,
                sizeof(T) * static_cast<size_t>(out_row));
  }
  auto backward = [s, start, len](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    const int64_t in_row = s.extent * s.inner;
    const int64_t out_row = len * s.inner;
    for (int64_t o = 0; o < s.outer; ++o) {
      const T* src = self.grad.data() + o * out_row;
      T* dst = p.grad.data() + o * in_row + start * s.inner;
      for (int64_t i = 0; i < out_row; ++i) dst[i] += src[i];
    }
  };
  return make_op_result<T>("slice", std::move(out_shape), std::move(out), {x},
                           std::move(backward));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, const Shape& s) {
  if (numel(s) != x.numel()) {
    fail(ErrorCode::shape_mismatch, "reshape: " + to_string(x.shape()) + " to " +
                                        to_string(s) + " changes element count");
  }
  std::vector<T> out = x.data();
  return make_op_result<T>("reshape", s, std::move(out), {x},
                           [](TensorNode<T>& self) {
                             auto& p = *self.parents[0];
                             if (!p.requires_grad) return;
                             p.ensure_grad();
                             for (size_t i = 0; i < self.grad.size(); ++i)
                               p.grad[i] += self.grad[i];
                           });
}

namespace {

std::vector<int64_t> row_major_strides(const Shape& s) {
  std::vector<int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

// out[i...] = in[perm applied]; returns the flat source index per flat
// destination index as an explicit walk to keep the loop rank-generic.
template <typename T>
void permute_copy(const Shape& out_shape, const std::vector<int64_t>& in_strides,
                  const std::vector<int>& perm, const T* src, T* dst, bool accumulate) {
  const int r = static_cast<int>(out_shape.size());
  std::vector<int64_t> idx(r, 0);
  const int64_t n = numel(out_shape);
  for (int64_t flat = 0; flat < n; ++flat) {
    int64_t src_flat = 0;
    for (int i = 0; i < r; ++i) src_flat += idx[i] * in_strides[perm[i]];
    if (accumulate) {
      dst[src_flat] += src[flat];
    } else {
      dst[flat] = src[src_flat];
    }
    for (int i = r - 1; i >= 0; --i) {
      if (++idx[i] < out_shape[i]) break;
      idx[i] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm) {
  const int r = x.rank();
  if (static_cast<int>(perm.size()) != r) {
    fail(ErrorCode::invalid_argument, "permute: order has wrong length");
  }
  std::vector<bool> used(r, false);
  Shape out_shape(r);
  for (int i = 0; i < r; ++i) {
    if (perm[i] < 0 || perm[i] >= r || used[perm[i]]) {
      fail(ErrorCode::invalid_argument, "permute: invalid axis order");
    }
    used[perm[i]] = true;
    out_shape[i] = x.shape()[perm[i]];
  }
  auto in_strides = row_major_strides(x.shape());
  std::vector<T> out(static_cast<size_t>(x.numel()));
  permute_copy(out_shape, in_strides, perm, x.data().data(), out.data(), false);

  auto backward = [out_shape, in_strides, perm](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    permute_copy(out_shape, in_strides, perm, self.grad.data(), p.grad.data(), true);
  };
  return make_op_result<T>("permute", std::move(out_shape), std::move(out), {x},
                           std::move(backward));
}

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  return make_op_result<T>("reduce_sum", Shape{}, {acc}, {x},
                           [](TensorNode<T>& self) {
                             auto& p = *self.parents[0];
                             if (!p.requires_grad) return;
                             p.ensure_grad();
                             const T g = self.grad[0];
                             for (auto& gi : p.grad) gi += g;
                           });
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& x) {
  T acc = T(0);
  for (T v : x.data()) acc += v;
  const T inv_n = T(1) / static_cast<T>(x.numel());
  return make_op_result<T>("reduce_mean", Shape{}, {acc * inv_n}, {x},
                           [inv_n](TensorNode<T>& self) {
                             auto& p = *self.parents[0];
                             if (!p.requires_grad) return;
                             p.ensure_grad();
                             const T g = self.grad[0] * inv_n;
                             for (auto& gi : p.grad) gi += g;
                           });
}

template <typename T>
Tensor<T> reduce_max(const Tensor<T>& x) {
  const auto& xv = x.data();
  size_t arg = 0;
  for (size_t i = 1; i < xv.size(); ++i) {
    if (xv[i] > xv[arg]) arg = i;
  }
  return make_op_result<T>("reduce_max", Shape{}, {xv[arg]}, {x},
                           [arg](TensorNode<T>& self) {
                             auto& p = *self.parents[0];
                             if (!p.requires_grad) return;
                             p.ensure_grad();
                             p.grad[arg] += self.grad[0];
                           });
}

template <typename T>
Tensor<T> reduce_sum_axis(const Tensor<T>& x, int axis) {
  AxisSplit s = split_axis(x, axis, "reduce_sum_axis");
  Shape out_shape;
  for (int i = 0; i < x.rank(); ++i) {
    if (i != axis) out_shape.push_back(x.shape()[i]);
  }
  std::vector<T> out(static_cast<size_t>(s.outer * s.inner), T(0));
  const auto& xv = x.data();
  for (int64_t o = 0; o < s.outer; ++o) {
    for (int64_t j = 0; j < s.extent; ++j) {
      const T* src = xv.data() + (o * s.extent + j) * s.inner;
      T* dst = out.data() + o * s.inner;
      for (int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
    }
  }
  auto backward = [s](TensorNode<T>& self) {
    auto& p = *self.parents[0];
    if (!p.requires_grad) return;
    p.ensure_grad();
    for (int64_t o = 0; o < s.outer; ++o) {
      const T* src = self.grad.data() + o * s.inner;
      for (int64_t j = 0; j < s.extent; ++j) {
        T* dst = p.grad.data() + (o * s.extent + j) * s.inner;
        for (int64_t i = 0; i < s.inner; ++i) dst[i] += src[i];
      }
    }
  };
  return make_op_result<T>("reduce_sum_axis", std::move(out_shape), std::move(out),
                           {x}, std::move(backward));
}

#define HDF_INSTANTIATE(T)                                                \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, int);          \
  template Tensor<T> slice(const Tensor<T>&, int, int64_t, int64_t);      \
  template Tensor<T> reshape(const Tensor<T>&, const Shape&);             \
  template Tensor<T> permute(const Tensor<T>&, const std::vector<int>&);  \
  template Tensor<T> reduce_sum(const Tensor<T>&);                        \
  template Tensor<T> reduce_mean(const Tensor<T>&);                       \
  template Tensor<T> reduce_max(const Tensor<T>&);                        \
  template Tensor<T> reduce_sum_axis(const Tensor<T>&, int);

HDF_INSTANTIATE(float)
HDF_INSTANTIATE(double)
#undef HDF_INSTANTIATE

}  // namespace hdf
