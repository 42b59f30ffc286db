#include <algorithm>
#include <cstddef>

#include "hdrunet/kernels.hpp"

namespace hdrunet::kernels {

namespace {

struct Range {
  std::size_t begin;
  std::size_t end;
};

// Output positions o in [0, out_dim) whose tap o*stride + tap - padding lands
// inside [0, in_dim).
Range valid_outputs(std::size_t tap, std::size_t padding, std::size_t stride, std::size_t in_dim,
                    std::size_t out_dim) {
  const long t = static_cast<long>(tap) - static_cast<long>(padding);
  const long s = static_cast<long>(stride);
  long lo = 0;
  if (t < 0) {
    lo = (-t + s - 1) / s;
  }
  const long last_in = static_cast<long>(in_dim) - 1 - t;
  long hi = last_in < 0 ? 0 : last_in / s + 1;
  hi = std::min<long>(hi, static_cast<long>(out_dim));
  if (lo > hi) {
    lo = hi;
  }
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

template <Real T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const std::size_t k = g.kernel;
  const std::size_t s = g.stride;
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const long planes = static_cast<long>(g.batch * g.out_channels);

#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / g.out_channels;
    const std::size_t co = static_cast<std::size_t>(p) % g.out_channels;
    T* out = output.data() + static_cast<std::size_t>(p) * out_plane;
    std::fill(out, out + out_plane, bias.empty() ? T(0) : bias[co]);
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      const T* src = input.data() + (n * g.in_channels + ci) * in_plane;
      const T* wk = weight.data() + (co * g.in_channels + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(ky, g.padding, s, g.in_h, g.out_h);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range rx = valid_outputs(kx, g.padding, s, g.in_w, g.out_w);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = ry.begin; oy < ry.end; ++oy) {
            const T* row = src + (oy * s + ky - g.padding) * g.in_w;
            T* orow = out + oy * g.out_w;
            const std::size_t ix0 = rx.begin * s + kx - g.padding;
            if (s == 1) {
              const T* r = row + ix0;
              const std::size_t len = rx.end - rx.begin;
              T* o = orow + rx.begin;
              for (std::size_t i = 0; i < len; ++i) {
                o[i] += wv * r[i];
              }
            } else {
              for (std::size_t ox = rx.begin; ox < rx.end; ++ox) {
                orow[ox] += wv * row[ox * s + kx - g.padding];
              }
            }
          }
        }
      }
    }
  }
}

template <Real T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> weight,
                           std::span<T> grad_input) {
  const std::size_t k = g.kernel;
  const std::size_t s = g.stride;
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const long planes = static_cast<long>(g.batch * g.in_channels);

#pragma omp parallel for schedule(static)
  for (long p = 0; p < planes; ++p) {
    const std::size_t n = static_cast<std::size_t>(p) / g.in_channels;
    const std::size_t ci = static_cast<std::size_t>(p) % g.in_channels;
    T* gin = grad_input.data() + static_cast<std::size_t>(p) * in_plane;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      const T* gout = grad_output.data() + (n * g.out_channels + co) * out_plane;
      const T* wk = weight.data() + (co * g.in_channels + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(ky, g.padding, s, g.in_h, g.out_h);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range rx = valid_outputs(kx, g.padding, s, g.in_w, g.out_w);
          const T wv = wk[ky * k + kx];
          for (std::size_t oy = ry.begin; oy < ry.end; ++oy) {
            T* row = gin + (oy * s + ky - g.padding) * g.in_w;
            const T* grow = gout + oy * g.out_w;
            if (s == 1) {
              T* r = row + (rx.begin + kx - g.padding);
              const T* go = grow + rx.begin;
              const std::size_t len = rx.end - rx.begin;
              for (std::size_t i = 0; i < len; ++i) {
                r[i] += wv * go[i];
              }
            } else {
              for (std::size_t ox = rx.begin; ox < rx.end; ++ox) {
                row[ox * s + kx - g.padding] += wv * grow[ox];
              }
            }
          }
        }
      }
    }
  }
}

template <Real T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> input,
                            std::span<T> grad_weight, std::span<T> grad_bias) {
  const std::size_t k = g.kernel;
  const std::size_t s = g.stride;
  const std::size_t in_plane = g.in_h * g.in_w;
  const std::size_t out_plane = g.out_h * g.out_w;
  const long outs = static_cast<long>(g.out_channels);

#pragma omp parallel for schedule(static)
  for (long co_l = 0; co_l < outs; ++co_l) {
    const std::size_t co = static_cast<std::size_t>(co_l);
    if (!grad_bias.empty()) {
      T acc = T(0);
      for (std::size_t n = 0; n < g.batch; ++n) {
        const T* gout = grad_output.data() + (n * g.out_channels + co) * out_plane;
        for (std::size_t i = 0; i < out_plane; ++i) {
          acc += gout[i];
        }
      }
      grad_bias[co] += acc;
    }
    if (grad_weight.empty()) {
      continue;
    }
    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
      T* gw = grad_weight.data() + (co * g.in_channels + ci) * k * k;
      for (std::size_t ky = 0; ky < k; ++ky) {
        const Range ry = valid_outputs(ky, g.padding, s, g.in_h, g.out_h);
        for (std::size_t kx = 0; kx < k; ++kx) {
          const Range rx = valid_outputs(kx, g.padding, s, g.in_w, g.out_w);
          T acc = T(0);
          for (std::size_t n = 0; n < g.batch; ++n) {
            const T* src = input.data() + (n * g.in_channels + ci) * in_plane;
            const T* gout = grad_output.data() + (n * g.out_channels + co) * out_plane;
            for (std::size_t oy = ry.begin; oy < ry.end; ++oy) {
              const T* row = src + (oy * s + ky - g.padding) * g.in_w;
              const T* grow = gout + oy * g.out_w;
              if (s == 1) {
                const T* r = row + (rx.begin + kx - g.padding);
                const T* go = grow + rx.begin;
                const std::size_t len = rx.end - rx.begin;
                for (std::size_t i = 0; i < len; ++i) {
                  acc += go[i] * r[i];
                }
              } else {
                for (std::size_t ox = rx.begin; ox < rx.end; ++ox) {
                  acc += grow[ox] * row[ox * s + kx - g.padding];
                }
              }
            }
          }
          gw[ky * k + kx] += acc;
        }
      }
    }
  }
}

#define HDRUNET_INSTANTIATE(T)                                                                                 \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,                 \
                                  std::span<const T>, std::span<T>);                                          \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,          \
                                         std::span<T>);                                                       \
  template void conv2d_backward_params<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,         \
                                          std::span<T>, std::span<T>);

HDRUNET_INSTANTIATE(float)
HDRUNET_INSTANTIATE(double)
#undef HDRUNET_INSTANTIATE

}  // namespace hdrunet::kernels
