#include "hdrunet/model.hpp"

#include <random>

#include "hdrunet/ops.hpp"

namespace hdrunet {

void ModelConfig::validate() const {
  if (base_channels == 0 || base_channels % 4 != 0) {
    throw ConfigError("base_channels must be a positive multiple of 4, got " + std::to_string(base_channels));
  }
  if (n_scales < 2 || n_scales > 8) {
    throw ConfigError("n_scales must be in [2, 8], got " + std::to_string(n_scales));
  }
}

template <Real T>
HDRUNet<T>::HDRUNet(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t c = config_.base_channels;
  const std::size_t levels = config_.n_scales - 1;

  base.head = ConvLayer<T>(3, c, 3);
  for (std::size_t s = 0; s < levels; ++s) {
    base.down.emplace_back(c, c, 3, 2);
    base.up.emplace_back(c, 4 * c, 3);
    base.fuse.emplace_back(2 * c, c, 3);
  }
  for (std::size_t b = 0; b < config_.n_res_blocks; ++b) {
    base.blocks.emplace_back(c);
  }
  base.hr = ConvLayer<T>(c, c, 3);
  base.tail = ConvLayer<T>(c, 3, 3);

  if (config_.condition_enabled()) {
    condition.head = ConvLayer<T>(3, c, 3);
    for (std::size_t s = 0; s < levels; ++s) {
      condition.down.emplace_back(c, c, 3, 2);
    }
    for (std::size_t b = 0; b < config_.n_res_blocks; ++b) {
      condition.sft.emplace_back(config_.modulation, c, c);
    }
  }
  if (config_.weighting_enabled) {
    weighting.conv0 = ConvLayer<T>(3, c, 3);
    weighting.conv1 = ConvLayer<T>(c, c, 3);
    weighting.out = ConvLayer<T>(c, 3, 1);
  }
  initialize(seed);
}

template <Real T>
void HDRUNet<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  kaiming_init(base.head, rng);
  for (std::size_t s = 0; s < base.down.size(); ++s) {
    kaiming_init(base.down[s], rng);
  }
  for (auto& block : base.blocks) {
    kaiming_init(block.conv1, rng);
    kaiming_init(block.conv2, rng);
  }
  for (std::size_t s = 0; s < base.up.size(); ++s) {
    kaiming_init(base.up[s], rng);
    kaiming_init(base.fuse[s], rng);
  }
  kaiming_init(base.hr, rng);
  kaiming_init(base.tail, rng);
  if (config_.condition_enabled()) {
    kaiming_init(condition.head, rng);
    for (auto& d : condition.down) {
      kaiming_init(d, rng);
    }
    for (auto& sft : condition.sft) {
      sft.init(rng);
    }
  }
  if (config_.weighting_enabled) {
    kaiming_init(weighting.conv0, rng);
    kaiming_init(weighting.conv1, rng);
    kaiming_init(weighting.out, rng);
  }
}

template <Real T>
ParamRegistry<T> HDRUNet<T>::parameters() {
  ParamRegistry<T> reg;
  base.head.register_params(reg, "base.head");
  for (std::size_t s = 0; s < base.down.size(); ++s) {
    base.down[s].register_params(reg, "base.down" + std::to_string(s));
  }
  for (std::size_t b = 0; b < base.blocks.size(); ++b) {
    base.blocks[b].register_params(reg, "base.block" + std::to_string(b));
  }
  for (std::size_t s = 0; s < base.up.size(); ++s) {
    base.up[s].register_params(reg, "base.up" + std::to_string(s));
    base.fuse[s].register_params(reg, "base.fuse" + std::to_string(s));
  }
  base.hr.register_params(reg, "base.hr");
  base.tail.register_params(reg, "base.tail");
  if (config_.condition_enabled()) {
    condition.head.register_params(reg, "cond.head");
    for (std::size_t s = 0; s < condition.down.size(); ++s) {
      condition.down[s].register_params(reg, "cond.down" + std::to_string(s));
    }
    for (std::size_t b = 0; b < condition.sft.size(); ++b) {
      condition.sft[b].register_params(reg, "cond.sft" + std::to_string(b));
    }
  }
  if (config_.weighting_enabled) {
    weighting.conv0.register_params(reg, "weight.conv0");
    weighting.conv1.register_params(reg, "weight.conv1");
    weighting.out.register_params(reg, "weight.out");
  }
  return reg;
}

template <Real T>
std::size_t HDRUNet<T>::base_parameter_count() const {
  std::size_t n = base.head.param_count() + base.hr.param_count() + base.tail.param_count();
  for (std::size_t s = 0; s < base.down.size(); ++s) {
    n += base.down[s].param_count() + base.up[s].param_count() + base.fuse[s].param_count();
  }
  for (const auto& b : base.blocks) {
    n += b.param_count();
  }
  return n;
}

template <Real T>
std::size_t HDRUNet<T>::condition_parameter_count() const {
  if (!config_.condition_enabled()) {
    return 0;
  }
  std::size_t n = condition.head.param_count();
  for (const auto& d : condition.down) {
    n += d.param_count();
  }
  for (const auto& s : condition.sft) {
    n += s.param_count();
  }
  return n;
}

template <Real T>
std::size_t HDRUNet<T>::weighting_parameter_count() const {
  if (!config_.weighting_enabled) {
    return 0;
  }
  return weighting.conv0.param_count() + weighting.conv1.param_count() + weighting.out.param_count();
}

template <Real T>
std::size_t HDRUNet<T>::parameter_count() const {
  return base_parameter_count() + condition_parameter_count() + weighting_parameter_count();
}

template <Real T>
void HDRUNet<T>::check_input(const Tensor<T>& input) const {
  const Shape& s = input.shape();
  if (s.c != 3) {
    throw ShapeError("HDRUNet: expected 3 input channels, got " + s.str());
  }
  const std::size_t d = config_.divisor();
  if (s.h == 0 || s.w == 0 || s.h % d != 0 || s.w % d != 0) {
    throw ShapeError("HDRUNet: input height and width must be multiples of " + std::to_string(d) + ", got " +
                     s.str());
  }
}

template <Real T>
std::vector<Tensor<T>> HDRUNet<T>::condition_forward(const Tensor<T>& input) const {
  check_input(input);
  if (!config_.condition_enabled()) {
    return {};
  }
  Tensor<T> f = ops::relu(condition.head.forward(input));
  for (const auto& d : condition.down) {
    f = ops::relu(d.forward(f));
  }
  return std::vector<Tensor<T>>(config_.n_res_blocks, f);
}

template <Real T>
Tensor<T> HDRUNet<T>::base_forward(const Tensor<T>& input, std::span<const Tensor<T>> cond_maps) const {
  check_input(input);
  if (config_.condition_enabled() && cond_maps.size() != base.blocks.size()) {
    throw ShapeError("HDRUNet: " + std::to_string(cond_maps.size()) + " condition maps for " +
                     std::to_string(base.blocks.size()) + " SFT sites");
  }
  std::vector<Tensor<T>> skips;
  Tensor<T> f = ops::relu(base.head.forward(input));
  for (const auto& d : base.down) {
    skips.push_back(f);
    f = ops::relu(d.forward(f));
  }
  for (std::size_t b = 0; b < base.blocks.size(); ++b) {
    if (config_.condition_enabled()) {
      f = condition.sft[b].forward(f, cond_maps[b]);
    }
    f = base.blocks[b].forward(f);
  }
  for (std::size_t s = base.up.size(); s-- > 0;) {
    const Tensor<T> up = ops::relu(ops::pixel_shuffle(base.up[s].forward(f), 2));
    f = ops::relu(base.fuse[s].forward(ops::concat_channels(up, skips[s])));
  }
  f = ops::relu(base.hr.forward(f));
  return base.tail.forward(f);
}

template <Real T>
Tensor<T> HDRUNet<T>::weighting_forward(const Tensor<T>& input) const {
  check_input(input);
  if (!config_.weighting_enabled) {
    throw ContractError("HDRUNet: weighting network is disabled");
  }
  const Tensor<T> h = ops::relu(weighting.conv1.forward(ops::relu(weighting.conv0.forward(input))));
  return ops::sigmoid(weighting.out.forward(h));
}

template <Real T>
Tensor<T> HDRUNet<T>::forward(const Tensor<T>& input) const {
  check_input(input);
  const std::vector<Tensor<T>> cond = condition_forward(input);
  Tensor<T> g = base_forward(input, cond);
  if (!config_.weighting_enabled) {
    return g;
  }
  return ops::add(ops::mul(weighting_forward(input), input), g);
}

template <Real T>
Tensor<T> reflect_pad(const Tensor<T>& input, std::size_t pad_h, std::size_t pad_w) {
  const Shape& s = input.shape();
  if ((pad_h > 0 && pad_h >= s.h) || (pad_w > 0 && pad_w >= s.w)) {
    throw ShapeError("reflect_pad: padding exceeds image extent " + s.str());
  }
  const Shape os{s.n, s.c, s.h + pad_h, s.w + pad_w};
  Tensor<T> out(os);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < os.h; ++y) {
        const std::size_t sy = y < s.h ? y : 2 * (s.h - 1) - y;
        for (std::size_t x = 0; x < os.w; ++x) {
          const std::size_t sx = x < s.w ? x : 2 * (s.w - 1) - x;
          out.at(n, c, y, x) = input.at(n, c, sy, sx);
        }
      }
    }
  }
  return out;
}

template <Real T>
Tensor<T> crop(const Tensor<T>& input, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  const Shape& s = input.shape();
  if (y0 + h > s.h || x0 + w > s.w) {
    throw ShapeError("crop: window exceeds " + s.str());
  }
  Tensor<T> out(Shape{s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          out.at(n, c, y, x) = input.at(n, c, y0 + y, x0 + x);
        }
      }
    }
  }
  return out;
}

template <Real T>
Tensor<T> predict(const HDRUNet<T>& model, const Tensor<T>& input) {
  const Shape& s = input.shape();
  const std::size_t d = model.config().divisor();
  const std::size_t pad_h = (d - s.h % d) % d;
  const std::size_t pad_w = (d - s.w % d) % d;
  if (pad_h == 0 && pad_w == 0) {
    return model.forward(input);
  }
  const Tensor<T> out = model.forward(reflect_pad(input, pad_h, pad_w));
  return crop(out, 0, 0, s.h, s.w);
}

template class HDRUNet<float>;
template class HDRUNet<double>;
template Tensor<float> predict<float>(const HDRUNet<float>&, const Tensor<float>&);
template Tensor<double> predict<double>(const HDRUNet<double>&, const Tensor<double>&);
template Tensor<float> reflect_pad<float>(const Tensor<float>&, std::size_t, std::size_t);
template Tensor<double> reflect_pad<double>(const Tensor<double>&, std::size_t, std::size_t);
template Tensor<float> crop<float>(const Tensor<float>&, std::size_t, std::size_t, std::size_t, std::size_t);
template Tensor<double> crop<double>(const Tensor<double>&, std::size_t, std::size_t, std::size_t, std::size_t);

}  // namespace hdrunet
