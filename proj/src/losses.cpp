#include "hdrunet/losses.hpp"

#include "hdrunet/ops.hpp"

namespace hdrunet {

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::L1:
      return "l1";
    case LossKind::L2:
      return "l2";
    case LossKind::TanhL1:
      return "tanh_l1";
    case LossKind::TanhL2:
      return "tanh_l2";
  }
  return "unknown";
}

LossKind parse_loss(std::string_view text) {
  for (LossKind k : {LossKind::L1, LossKind::L2, LossKind::TanhL1, LossKind::TanhL2}) {
    if (text == to_string(k)) {
      return k;
    }
  }
  throw ConfigError("unknown loss '" + std::string(text) + "' (expected l1|l2|tanh_l1|tanh_l2)");
}

namespace {

template <Real T>
void check(const char* name, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(name) + ": prediction " + a.shape().str() + " vs target " + b.shape().str());
  }
}

}  // namespace

template <Real T>
Tensor<T> tanh_l1(const Tensor<T>& yhat, const Tensor<T>& target) {
  check("tanh_l1", yhat, target);
  return ops::mean_all(ops::abs(ops::sub(ops::tanh(yhat), ops::tanh(target))));
}

template <Real T>
Tensor<T> tanh_l2(const Tensor<T>& yhat, const Tensor<T>& target) {
  check("tanh_l2", yhat, target);
  const Tensor<T> d = ops::sub(ops::tanh(yhat), ops::tanh(target));
  return ops::mean_all(ops::mul(d, d));
}

template <Real T>
Tensor<T> l1(const Tensor<T>& yhat, const Tensor<T>& target) {
  check("l1", yhat, target);
  return ops::mean_all(ops::abs(ops::sub(yhat, target)));
}

template <Real T>
Tensor<T> l2(const Tensor<T>& yhat, const Tensor<T>& target) {
  check("l2", yhat, target);
  const Tensor<T> d = ops::sub(yhat, target);
  return ops::mean_all(ops::mul(d, d));
}

template <Real T>
Tensor<T> compute_loss(LossKind kind, const Tensor<T>& yhat, const Tensor<T>& target) {
  switch (kind) {
    case LossKind::L1:
      return l1(yhat, target);
    case LossKind::L2:
      return l2(yhat, target);
    case LossKind::TanhL1:
      return tanh_l1(yhat, target);
    case LossKind::TanhL2:
      return tanh_l2(yhat, target);
  }
  throw ConfigError("unknown loss kind");
}

#define HDRUNET_INSTANTIATE(T)                                                \
  template Tensor<T> tanh_l1<T>(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> tanh_l2<T>(const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> l1<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> l2<T>(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> compute_loss<T>(LossKind, const Tensor<T>&, const Tensor<T>&);

HDRUNET_INSTANTIATE(float)
HDRUNET_INSTANTIATE(double)
#undef HDRUNET_INSTANTIATE

}  // namespace hdrunet
