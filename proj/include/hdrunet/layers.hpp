#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hdrunet/gradcheck.hpp"
#include "hdrunet/tensor.hpp"

namespace hdrunet {

/// Shape of the SFT modulation maps: C x H x W, 1 x H x W, C x 1 x 1, or none.
enum class Modulation { None, GlobalChannel, SpatialShared, Full };

std::string_view to_string(Modulation m);
/// Accepts none | channel | spatial | full. Throws ConfigError otherwise.
Modulation parse_modulation(std::string_view text);

template <Real T>
class ParamRegistry {
 public:
  struct Entry {
    std::string name;
    Tensor<T>* tensor = nullptr;
    std::vector<std::uint32_t> dims;  // logical dims, used by checkpoints
  };

  /// Throws ContractError on a duplicate name.
  void add(std::string name, Tensor<T>& tensor, std::vector<std::uint32_t> dims);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t element_count() const;
  Tensor<T>* find(std::string_view name) const;
  std::vector<ParamRef<T>> refs() const;

  void watch(Tape<T>& tape) const;
  void zero_grad() const;

 private:
  std::vector<Entry> entries_;
};

template <Real T>
struct ConvLayer {
  Tensor<T> weight;  // (Cout, Cin, k, k)
  Tensor<T> bias;    // (1, Cout, 1, 1)
  std::size_t stride = 1;
  std::size_t padding = 0;

  ConvLayer() = default;
  /// Zero weights; padding is k / 2, which keeps spatial size at stride 1.
  ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel, std::size_t stride = 1);

  std::size_t in_channels() const { return weight.shape().c; }
  std::size_t out_channels() const { return weight.shape().n; }
  std::size_t kernel() const { return weight.shape().h; }
  std::size_t param_count() const { return weight.numel() + bias.numel(); }

  Tensor<T> forward(const Tensor<T>& x) const;
  void register_params(ParamRegistry<T>& registry, const std::string& prefix);
  void fill(T weight_value, T bias_value);
};

/// Weights ~ N(0, 2 / (Cin * k * k)), bias = 0.
template <Real T>
void kaiming_init(ConvLayer<T>& layer, std::mt19937_64& rng);
template <Real T>
void kaiming_init(ConvLayer<T>& layer, std::uint64_t seed);

/// x + conv2(relu(conv1(x)))
template <Real T>
struct ResidualBlock {
  ConvLayer<T> conv1;
  ConvLayer<T> conv2;

  ResidualBlock() = default;
  explicit ResidualBlock(std::size_t channels);

  Tensor<T> forward(const Tensor<T>& x) const;
  void register_params(ParamRegistry<T>& registry, const std::string& prefix);
  std::size_t param_count() const { return conv1.param_count() + conv2.param_count(); }
};

/// alpha(cond) * x + beta(cond), each head being conv -> relu -> conv.
/// GlobalChannel heads run 1x1 convs on the spatially pooled condition.
template <Real T>
struct SFTLayer {
  Modulation strategy = Modulation::Full;
  ConvLayer<T> alpha0, alpha1;
  ConvLayer<T> beta0, beta1;

  SFTLayer() = default;
  SFTLayer(Modulation strategy, std::size_t cond_channels, std::size_t feature_channels);

  struct Maps {
    Tensor<T> alpha;
    Tensor<T> beta;
  };
  Maps modulation(const Tensor<T>& cond) const;
  Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond) const;

  void register_params(ParamRegistry<T>& registry, const std::string& prefix);
  std::size_t param_count() const;
  /// Kaiming init for all heads, then the alpha output bias is set to 1.
  void init(std::mt19937_64& rng);
};

}  // namespace hdrunet
