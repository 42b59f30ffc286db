#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hdrunet/layers.hpp"

namespace hdrunet {

enum class Precision { F32, F64 };

struct ModelConfig {
  std::size_t base_channels = 64;
  std::size_t n_res_blocks = 8;
  std::size_t n_scales = 3;  // full resolution plus n_scales - 1 stride-2 levels
  Modulation modulation = Modulation::Full;
  bool weighting_enabled = true;
  Precision precision = Precision::F32;

  /// Throws ConfigError.
  void validate() const;
  /// Input height and width must be multiples of this.
  std::size_t divisor() const { return std::size_t{1} << (n_scales - 1); }
  bool condition_enabled() const { return modulation != Modulation::None; }
};

/// Encoder-decoder with SFT-modulated bottleneck residual blocks, a condition
/// network feeding the modulation heads, and a sigmoid weighting branch:
///
///   output = W(I) * I + G(I, condition(I))
///
/// Registry order (also the initialization draw order): base.*, cond.*, weight.*
template <Real T>
class HDRUNet {
 public:
  struct Base {
    ConvLayer<T> head;                   // 3 -> C
    std::vector<ConvLayer<T>> down;      // C -> C, stride 2, one per extra scale
    std::vector<ResidualBlock<T>> blocks;
    std::vector<ConvLayer<T>> up;        // C -> 4C, followed by pixel shuffle x2
    std::vector<ConvLayer<T>> fuse;      // 2C -> C after skip concatenation
    ConvLayer<T> hr;                     // C -> C
    ConvLayer<T> tail;                   // C -> 3, no activation
  };
  struct Condition {
    ConvLayer<T> head;                   // 3 -> C
    std::vector<ConvLayer<T>> down;      // C -> C, stride 2
    std::vector<SFTLayer<T>> sft;        // one per residual block
  };
  struct Weighting {
    ConvLayer<T> conv0;                  // 3 -> C
    ConvLayer<T> conv1;                  // C -> C
    ConvLayer<T> out;                    // C -> 3 (1x1), then sigmoid
  };

  /// Kaiming initialization from a generator seeded with `seed`.
  explicit HDRUNet(const ModelConfig& config, std::uint64_t seed = 0);

  const ModelConfig& config() const { return config_; }

  /// Throws ShapeError unless input is (N, 3, H, W) with H, W multiples of divisor().
  Tensor<T> forward(const Tensor<T>& input) const;
  Tensor<T> base_forward(const Tensor<T>& input, std::span<const Tensor<T>> cond_maps) const;
  /// One map per SFT site, at bottleneck resolution. Empty when modulation is none.
  std::vector<Tensor<T>> condition_forward(const Tensor<T>& input) const;
  Tensor<T> weighting_forward(const Tensor<T>& input) const;

  ParamRegistry<T> parameters();
  std::size_t parameter_count() const;
  std::size_t base_parameter_count() const;
  std::size_t condition_parameter_count() const;
  std::size_t weighting_parameter_count() const;

  void initialize(std::uint64_t seed);

  Base base;
  Condition condition;
  Weighting weighting;

 private:
  void check_input(const Tensor<T>& input) const;

  ModelConfig config_;
};

/// Forward on arbitrary H, W: reflect-pads bottom/right up to the next multiple
/// of config().divisor(), runs the model, and crops back.
template <Real T>
Tensor<T> predict(const HDRUNet<T>& model, const Tensor<T>& input);

/// Reflect padding (edge pixel not repeated) on the bottom and right.
template <Real T>
Tensor<T> reflect_pad(const Tensor<T>& input, std::size_t pad_h, std::size_t pad_w);

template <Real T>
Tensor<T> crop(const Tensor<T>& input, std::size_t y, std::size_t x, std::size_t h, std::size_t w);

}  // namespace hdrunet
