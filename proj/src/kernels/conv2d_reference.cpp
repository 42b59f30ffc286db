#include "hdrunet/kernels.hpp"

namespace hdrunet::kernels::reference {

template <Real T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output) {
  const long k = static_cast<long>(g.kernel);
  const long pad = static_cast<long>(g.padding);
  const long s = static_cast<long>(g.stride);
  const long h = static_cast<long>(g.in_h);
  const long w = static_cast<long>(g.in_w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          T acc = bias.empty() ? T(0) : bias[co];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (long ky = 0; ky < k; ++ky) {
              for (long kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy) * s + ky - pad;
                const long ix = static_cast<long>(ox) * s + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                  continue;
                }
                acc += weight[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] *
                       input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
          output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox] = acc;
        }
      }
    }
  }
}

template <Real T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> weight,
                           std::span<T> grad_input) {
  const long k = static_cast<long>(g.kernel);
  const long pad = static_cast<long>(g.padding);
  const long s = static_cast<long>(g.stride);
  const long h = static_cast<long>(g.in_h);
  const long w = static_cast<long>(g.in_w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (long ky = 0; ky < k; ++ky) {
              for (long kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy) * s + ky - pad;
                const long ix = static_cast<long>(ox) * s + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                  continue;
                }
                grad_input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix] +=
                    go * weight[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx];
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
  const long k = static_cast<long>(g.kernel);
  const long pad = static_cast<long>(g.padding);
  const long s = static_cast<long>(g.stride);
  const long h = static_cast<long>(g.in_h);
  const long w = static_cast<long>(g.in_w);
  for (std::size_t n = 0; n < g.batch; ++n) {
    for (std::size_t co = 0; co < g.out_channels; ++co) {
      for (std::size_t oy = 0; oy < g.out_h; ++oy) {
        for (std::size_t ox = 0; ox < g.out_w; ++ox) {
          const T go = grad_output[((n * g.out_channels + co) * g.out_h + oy) * g.out_w + ox];
          if (!grad_bias.empty()) {
            grad_bias[co] += go;
          }
          if (grad_weight.empty()) {
            continue;
          }
          for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (long ky = 0; ky < k; ++ky) {
              for (long kx = 0; kx < k; ++kx) {
                const long iy = static_cast<long>(oy) * s + ky - pad;
                const long ix = static_cast<long>(ox) * s + kx - pad;
                if (iy < 0 || iy >= h || ix < 0 || ix >= w) {
                  continue;
                }
                grad_weight[((co * g.in_channels + ci) * g.kernel + ky) * g.kernel + kx] +=
                    go * input[((n * g.in_channels + ci) * g.in_h + iy) * g.in_w + ix];
              }
            }
          }
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

}  // namespace hdrunet::kernels::reference
