#pragma once

#include "core/tensor.hpp"

namespace hdf {

// Elementwise binary ops require identical shapes; no implicit broadcasting.
template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> div_elem(const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> add_scalar(const Tensor<T>& x, T c);
template <typename T> Tensor<T> mul_scalar(const Tensor<T>& x, T c);
// x^p on the non-negative domain.
template <typename T> Tensor<T> pow_scalar(const Tensor<T>& x, T p);
// log(max(x, floor)); gradient is zero below the clamp.
template <typename T> Tensor<T> log_clamped(const Tensor<T>& x, T floor_val);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> gelu(const Tensor<T>& x);

// x:(n,in) w:(out,in) b:(out) -> (n,out)
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

// (n,k)x(k,m) -> (n,m)
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
// (B,n,k)x(B,k,m) -> (B,n,m)
template <typename T> Tensor<T> bmm(const Tensor<T>& a, const Tensor<T>& b);

// N-d convolution over 2 or 3 trailing spatial axes.
// x:(Cin,S...) w:(Cout,Cin,K...) b:(Cout); uniform stride/padding per axis.
template <typename T>
Tensor<T> conv_nd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b,
                  int stride, int padding);

// Transposed convolution; w:(Cin,Cout,K...). Output extent per axis is
// (in-1)*stride - 2*padding + k.
template <typename T>
Tensor<T> conv_transpose_nd(const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& b, int stride, int padding);

// Normalization over the last axis; gamma/beta shaped (last extent).
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                     const Tensor<T>& beta, T eps = T(1e-5));

// Per-channel normalization over all spatial positions; x:(C,S...),
// gamma/beta shaped (C).
template <typename T>
Tensor<T> instance_norm(const Tensor<T>& x, const Tensor<T>& gamma,
                        const Tensor<T>& beta, T eps = T(1e-5));

template <typename T> Tensor<T> softmax(const Tensor<T>& x, int axis);

template <typename T> Tensor<T> reduce_sum(const Tensor<T>& x);
template <typename T> Tensor<T> reduce_mean(const Tensor<T>& x);
template <typename T> Tensor<T> reduce_max(const Tensor<T>& x);
// Sum over one axis; the axis is removed from the result shape.
template <typename T> Tensor<T> reduce_sum_axis(const Tensor<T>& x, int axis);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, int axis);
template <typename T>
Tensor<T> slice(const Tensor<T>& x, int axis, int64_t start, int64_t len);

template <typename T> Tensor<T> reshape(const Tensor<T>& x, const Shape& s);
template <typename T>
Tensor<T> permute(const Tensor<T>& x, const std::vector<int>& perm);

enum class ResizeMode { nearest, linear };

// Spatial resize of x:(C,S...) to the given spatial extents. Linear mode is
// bi-/tri-linear with half-pixel centers and no corner alignment; nearest
// picks floor((o+0.5)*in/out) clamped to the input range.
template <typename T>
Tensor<T> resize(const Tensor<T>& x, const Shape& out_spatial, ResizeMode mode);

}  // namespace hdf
