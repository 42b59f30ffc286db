#pragma once

#include "hdrunet/tensor.hpp"

// Differentiable tensor ops. Each op records a backward rule on the active
// tape when at least one operand is tracked by it; otherwise it is a plain
// computation.
namespace hdrunet::ops {

template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <Real T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <Real T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <Real T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <Real T>
Tensor<T> abs(const Tensor<T>& a);
template <Real T>
Tensor<T> tanh(const Tensor<T>& a);
template <Real T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <Real T>
Tensor<T> relu(const Tensor<T>& a);

/// Single-element (1,1,1,1) results.
template <Real T>
Tensor<T> mean_all(const Tensor<T>& a);
template <Real T>
Tensor<T> sum_all(const Tensor<T>& a);

/// alpha * x + beta. alpha and beta share one shape out of
/// {N,C,H,W}, {N,1,H,W}, {N,C,1,1}; size-1 axes broadcast.
template <Real T>
Tensor<T> broadcast_mul_add(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& beta);

/// Cross-correlation with zero padding. weight is (Cout, Cin, k, k), bias has
/// Cout elements (any shape) or is empty.
template <Real T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                 std::size_t padding);

/// out[n, c, h*r+i, w*r+j] = in[n, c*r*r + i*r + j, h, w]
template <Real T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r);
/// Exact inverse of pixel_shuffle (space-to-depth).
template <Real T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r);

template <Real T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b);

/// Mean over H and W, producing (N, C, 1, 1).
template <Real T>
Tensor<T> global_avg_pool(const Tensor<T>& input);

}  // namespace hdrunet::ops
