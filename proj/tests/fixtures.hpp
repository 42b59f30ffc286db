#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "hdrunet/data.hpp"
#include "hdrunet/model.hpp"
#include "hdrunet/trainer.hpp"

namespace fixtures {

/// Scenes snapped to the 8-bit lattice; with sigma = 0 the LDR is lossless.
inline std::vector<hdrunet::ImagePair> lattice_pairs(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<hdrunet::ImagePair> pairs;
  hdrunet::DegradationParams p;
  p.noise_sigma = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    hdrunet::HdrImage hdr = hdrunet::generate_scene(size, size, rng);
    for (auto& v : hdr.pixels) v = static_cast<float>(std::round(v * 255.0) / 255.0);
    pairs.push_back({hdrunet::synthesize_ldr(hdr, p), hdr});
  }
  return pairs;
}

inline std::vector<hdrunet::ImagePair> noisy_pairs(std::size_t count, std::size_t size, std::uint64_t seed,
                                                   double sigma) {
  std::mt19937_64 rng(seed);
  std::vector<hdrunet::ImagePair> pairs;
  for (std::size_t i = 0; i < count; ++i) {
    hdrunet::HdrImage hdr = hdrunet::generate_scene(size, size, rng);
    hdrunet::DegradationParams p;
    p.noise_sigma = sigma;
    p.seed = 100 + i;
    pairs.push_back({hdrunet::synthesize_ldr(hdr, p), hdr});
  }
  return pairs;
}

inline hdrunet::ModelConfig tiny_model(hdrunet::Precision precision = hdrunet::Precision::F32) {
  hdrunet::ModelConfig mc;
  mc.base_channels = 8;
  mc.n_res_blocks = 2;
  mc.n_scales = 2;
  mc.precision = precision;
  return mc;
}

inline hdrunet::ModelConfig desk_model() {
  hdrunet::ModelConfig mc;
  mc.base_channels = 16;
  mc.n_res_blocks = 4;
  mc.n_scales = 3;
  return mc;
}

inline hdrunet::TrainConfig quick_train(std::size_t iters, std::uint64_t seed) {
  hdrunet::TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.patch_size = 16;
  cfg.total_iters = iters;
  cfg.seed = seed;
  cfg.eval_every = 0;
  cfg.schedule.decay_every = std::max<std::size_t>(1, iters / 2);
  return cfg;
}

template <hdrunet::Real T>
std::vector<std::vector<T>> snapshot(hdrunet::HDRUNet<T>& model) {
  std::vector<std::vector<T>> out;
  const auto registry = model.parameters();
  for (const auto& e : registry.entries()) {
    out.emplace_back(e.tensor->data().begin(), e.tensor->data().end());
  }
  return out;
}

}  // namespace fixtures
