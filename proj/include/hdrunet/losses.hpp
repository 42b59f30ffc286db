#pragma once

#include <string_view>

#include "hdrunet/tensor.hpp"

namespace hdrunet {

enum class LossKind { L1, L2, TanhL1, TanhL2 };

std::string_view to_string(LossKind kind);
/// Accepts l1 | l2 | tanh_l1 | tanh_l2.
LossKind parse_loss(std::string_view text);

// All losses reduce by the mean over every element and return a (1,1,1,1)
// tensor; shapes must match exactly.

/// mean |tanh(yhat) - tanh(target)|
template <Real T>
Tensor<T> tanh_l1(const Tensor<T>& yhat, const Tensor<T>& target);
template <Real T>
Tensor<T> tanh_l2(const Tensor<T>& yhat, const Tensor<T>& target);
template <Real T>
Tensor<T> l1(const Tensor<T>& yhat, const Tensor<T>& target);
template <Real T>
Tensor<T> l2(const Tensor<T>& yhat, const Tensor<T>& target);

template <Real T>
Tensor<T> compute_loss(LossKind kind, const Tensor<T>& yhat, const Tensor<T>& target);

}  // namespace hdrunet
