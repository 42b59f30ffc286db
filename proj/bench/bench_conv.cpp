#include <benchmark/benchmark.h>

#include <omp.h>

#include <random>
#include <vector>

#include "hdrunet/kernels.hpp"

namespace k = hdrunet::kernels;

namespace {

struct Case {
  k::ConvGeometry g;
  std::vector<float> input, weight, bias, output, grad_input, grad_weight, grad_bias;
};

// batch 4, C -> C, 3x3, pad 1, square input of side `size`
Case make_case(std::size_t channels, std::size_t size) {
  Case c;
  c.g = k::ConvGeometry::make({4, channels, size, size}, {channels, channels, 3, 3}, 1, 1);
  std::mt19937 rng(1);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  auto fill = [&](std::vector<float>& v, std::size_t n) {
    v.resize(n);
    for (auto& x : v) x = u(rng);
  };
  fill(c.input, 4 * channels * size * size);
  fill(c.weight, channels * channels * 9);
  fill(c.bias, channels);
  c.output.assign(c.input.size(), 0.f);
  c.grad_input.assign(c.input.size(), 0.f);
  c.grad_weight.assign(c.weight.size(), 0.f);
  c.grad_bias.assign(channels, 0.f);
  return c;
}

void set_counters(benchmark::State& state, const Case& c) {
  const double macs = static_cast<double>(c.g.batch * c.g.out_channels * c.g.out_h * c.g.out_w) *
                      static_cast<double>(c.g.in_channels * 9);
  state.counters["GMAC/s"] =
      benchmark::Counter(macs * 1e-9, benchmark::Counter::kIsIterationInvariantRate);
  state.counters["threads"] = omp_get_max_threads();
}

template <bool Parallel>
void BM_Forward(benchmark::State& state) {
  Case c = make_case(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_forward<float>(c.g, c.input, c.weight, c.bias, c.output);
    } else {
      k::reference::conv2d_forward<float>(c.g, c.input, c.weight, c.bias, c.output);
    }
    benchmark::DoNotOptimize(c.output.data());
  }
  set_counters(state, c);
}

template <bool Parallel>
void BM_BackwardInput(benchmark::State& state) {
  Case c = make_case(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_backward_input<float>(c.g, c.output, c.weight, c.grad_input);
    } else {
      k::reference::conv2d_backward_input<float>(c.g, c.output, c.weight, c.grad_input);
    }
    benchmark::DoNotOptimize(c.grad_input.data());
  }
  set_counters(state, c);
}

template <bool Parallel>
void BM_BackwardParams(benchmark::State& state) {
  Case c = make_case(state.range(0), state.range(1));
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_backward_params<float>(c.g, c.output, c.input, c.grad_weight, c.grad_bias);
    } else {
      k::reference::conv2d_backward_params<float>(c.g, c.output, c.input, c.grad_weight, c.grad_bias);
    }
    benchmark::DoNotOptimize(c.grad_weight.data());
  }
  set_counters(state, c);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({16, 32})->Args({16, 64})->Args({64, 32})->Args({64, 64})->Unit(benchmark::kMillisecond)->UseRealTime();
}

}  // namespace

BENCHMARK(BM_Forward<false>)->Name("forward/reference")->Apply(shapes);
BENCHMARK(BM_Forward<true>)->Name("forward/openmp")->Apply(shapes);
BENCHMARK(BM_BackwardInput<false>)->Name("backward_input/reference")->Apply(shapes);
BENCHMARK(BM_BackwardInput<true>)->Name("backward_input/openmp")->Apply(shapes);
BENCHMARK(BM_BackwardParams<false>)->Name("backward_params/reference")->Apply(shapes);
BENCHMARK(BM_BackwardParams<true>)->Name("backward_params/openmp")->Apply(shapes);

BENCHMARK_MAIN();
