#include "hdrunet/layers.hpp"

#include <algorithm>
#include <cmath>

#include "hdrunet/ops.hpp"

namespace hdrunet {

std::string_view to_string(Modulation m) {
  switch (m) {
    case Modulation::None:
      return "none";
    case Modulation::GlobalChannel:
      return "channel";
    case Modulation::SpatialShared:
      return "spatial";
    case Modulation::Full:
      return "full";
  }
  return "unknown";
}

Modulation parse_modulation(std::string_view text) {
  for (Modulation m : {Modulation::None, Modulation::GlobalChannel, Modulation::SpatialShared, Modulation::Full}) {
    if (text == to_string(m)) {
      return m;
    }
  }
  throw ConfigError("unknown modulation strategy '" + std::string(text) + "' (expected none|channel|spatial|full)");
}

template <Real T>
void ParamRegistry<T>::add(std::string name, Tensor<T>& tensor, std::vector<std::uint32_t> dims) {
  if (find(name) != nullptr) {
    throw ContractError("duplicate parameter name '" + name + "'");
  }
  entries_.push_back({std::move(name), &tensor, std::move(dims)});
}

template <Real T>
std::size_t ParamRegistry<T>::element_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) {
    total += e.tensor->numel();
  }
  return total;
}

template <Real T>
Tensor<T>* ParamRegistry<T>::find(std::string_view name) const {
  for (const auto& e : entries_) {
    if (e.name == name) {
      return e.tensor;
    }
  }
  return nullptr;
}

template <Real T>
std::vector<ParamRef<T>> ParamRegistry<T>::refs() const {
  std::vector<ParamRef<T>> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    out.push_back({e.name, e.tensor});
  }
  return out;
}

template <Real T>
void ParamRegistry<T>::watch(Tape<T>& tape) const {
  for (const auto& e : entries_) {
    tape.watch(*e.tensor);
  }
}

template <Real T>
void ParamRegistry<T>::zero_grad() const {
  for (const auto& e : entries_) {
    e.tensor->zero_grad();
  }
}

template <Real T>
ConvLayer<T>::ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride)
    : weight(Shape{out_channels, in_channels, kernel, kernel}),
      bias(Shape{1, out_channels, 1, 1}),
      stride(stride),
      padding(kernel / 2) {
  if (kernel != 1 && kernel != 3) {
    throw ShapeError("ConvLayer: kernel must be 1 or 3, got " + std::to_string(kernel));
  }
}

template <Real T>
Tensor<T> ConvLayer<T>::forward(const Tensor<T>& x) const {
  return ops::conv2d(x, weight, bias, stride, padding);
}

template <Real T>
void ConvLayer<T>::register_params(ParamRegistry<T>& registry, const std::string& prefix) {
  const Shape& s = weight.shape();
  registry.add(prefix + ".weight", weight,
               {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
                static_cast<std::uint32_t>(s.w)});
  registry.add(prefix + ".bias", bias, {static_cast<std::uint32_t>(bias.numel())});
}

template <Real T>
void ConvLayer<T>::fill(T weight_value, T bias_value) {
  std::fill(weight.data().begin(), weight.data().end(), weight_value);
  std::fill(bias.data().begin(), bias.data().end(), bias_value);
}

template <Real T>
void kaiming_init(ConvLayer<T>& layer, std::mt19937_64& rng) {
  const double fan_in = static_cast<double>(layer.in_channels() * layer.kernel() * layer.kernel());
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  for (T& w : layer.weight.data()) {
    w = static_cast<T>(dist(rng));
  }
  std::fill(layer.bias.data().begin(), layer.bias.data().end(), T(0));
}

template <Real T>
void kaiming_init(ConvLayer<T>& layer, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  kaiming_init(layer, rng);
}

template <Real T>
ResidualBlock<T>::ResidualBlock(std::size_t channels) : conv1(channels, channels, 3), conv2(channels, channels, 3) {}

template <Real T>
Tensor<T> ResidualBlock<T>::forward(const Tensor<T>& x) const {
  if (x.shape().c != conv1.in_channels()) {
    throw ShapeError("ResidualBlock: input has " + std::to_string(x.shape().c) + " channels, block expects " +
                     std::to_string(conv1.in_channels()));
  }
  return ops::add(x, conv2.forward(ops::relu(conv1.forward(x))));
}

template <Real T>
void ResidualBlock<T>::register_params(ParamRegistry<T>& registry, const std::string& prefix) {
  conv1.register_params(registry, prefix + ".conv1");
  conv2.register_params(registry, prefix + ".conv2");
}

template <Real T>
SFTLayer<T>::SFTLayer(Modulation strategy, std::size_t cond_channels, std::size_t feature_channels)
    : strategy(strategy) {
  switch (strategy) {
    case Modulation::None:
      break;
    case Modulation::Full:
      alpha0 = ConvLayer<T>(cond_channels, cond_channels, 3);
      alpha1 = ConvLayer<T>(cond_channels, feature_channels, 3);
      beta0 = ConvLayer<T>(cond_channels, cond_channels, 3);
      beta1 = ConvLayer<T>(cond_channels, feature_channels, 3);
      break;
    case Modulation::SpatialShared:
      alpha0 = ConvLayer<T>(cond_channels, cond_channels, 3);
      alpha1 = ConvLayer<T>(cond_channels, 1, 3);
      beta0 = ConvLayer<T>(cond_channels, cond_channels, 3);
      beta1 = ConvLayer<T>(cond_channels, 1, 3);
      break;
    case Modulation::GlobalChannel:
      alpha0 = ConvLayer<T>(cond_channels, cond_channels, 1);
      alpha1 = ConvLayer<T>(cond_channels, feature_channels, 1);
      beta0 = ConvLayer<T>(cond_channels, cond_channels, 1);
      beta1 = ConvLayer<T>(cond_channels, feature_channels, 1);
      break;
  }
}

template <Real T>
typename SFTLayer<T>::Maps SFTLayer<T>::modulation(const Tensor<T>& cond) const {
  if (strategy == Modulation::None) {
    throw ContractError("SFTLayer: strategy none has no modulation maps");
  }
  const Tensor<T> source = strategy == Modulation::GlobalChannel ? ops::global_avg_pool(cond) : cond;
  return {alpha1.forward(ops::relu(alpha0.forward(source))), beta1.forward(ops::relu(beta0.forward(source)))};
}

template <Real T>
Tensor<T> SFTLayer<T>::forward(const Tensor<T>& x, const Tensor<T>& cond) const {
  if (strategy == Modulation::None) {
    return x;
  }
  if (strategy != Modulation::GlobalChannel && (cond.shape().h != x.shape().h || cond.shape().w != x.shape().w)) {
    throw ShapeError("SFTLayer: condition " + cond.shape().str() + " not spatially aligned with features " +
                     x.shape().str());
  }
  const Maps maps = modulation(cond);
  return ops::broadcast_mul_add(x, maps.alpha, maps.beta);
}

template <Real T>
void SFTLayer<T>::register_params(ParamRegistry<T>& registry, const std::string& prefix) {
  if (strategy == Modulation::None) {
    return;
  }
  alpha0.register_params(registry, prefix + ".alpha0");
  alpha1.register_params(registry, prefix + ".alpha1");
  beta0.register_params(registry, prefix + ".beta0");
  beta1.register_params(registry, prefix + ".beta1");
}

template <Real T>
std::size_t SFTLayer<T>::param_count() const {
  if (strategy == Modulation::None) {
    return 0;
  }
  return alpha0.param_count() + alpha1.param_count() + beta0.param_count() + beta1.param_count();
}

template <Real T>
void SFTLayer<T>::init(std::mt19937_64& rng) {
  if (strategy == Modulation::None) {
    return;
  }
  kaiming_init(alpha0, rng);
  kaiming_init(alpha1, rng);
  kaiming_init(beta0, rng);
  kaiming_init(beta1, rng);
  std::fill(alpha1.bias.data().begin(), alpha1.bias.data().end(), T(1));
}

template class ParamRegistry<float>;
template class ParamRegistry<double>;
template struct ConvLayer<float>;
template struct ConvLayer<double>;
template struct ResidualBlock<float>;
template struct ResidualBlock<double>;
template struct SFTLayer<float>;
template struct SFTLayer<double>;
template void kaiming_init<float>(ConvLayer<float>&, std::mt19937_64&);
template void kaiming_init<double>(ConvLayer<double>&, std::mt19937_64&);
template void kaiming_init<float>(ConvLayer<float>&, std::uint64_t);
template void kaiming_init<double>(ConvLayer<double>&, std::uint64_t);

}  // namespace hdrunet
