#include "hdrunet/kernels.hpp"

namespace hdrunet::kernels {

ConvGeometry ConvGeometry::make(const Shape& input, const Shape& weight, std::size_t stride, std::size_t padding) {
  if (stride == 0) {
    throw ShapeError("conv2d: stride must be positive");
  }
  if (weight.c != input.c) {
    throw ShapeError("conv2d: weight " + weight.str() + " expects " + std::to_string(weight.c) +
                     " input channels, input is " + input.str());
  }
  if (weight.h != weight.w || (weight.h != 1 && weight.h != 3)) {
    throw ShapeError("conv2d: only 1x1 and 3x3 kernels are supported, got " + weight.str());
  }
  ConvGeometry g;
  g.batch = input.n;
  g.in_channels = input.c;
  g.in_h = input.h;
  g.in_w = input.w;
  g.out_channels = weight.n;
  g.kernel = weight.h;
  g.stride = stride;
  g.padding = padding;
  const long span_h = static_cast<long>(input.h + 2 * padding) - static_cast<long>(g.kernel);
  const long span_w = static_cast<long>(input.w + 2 * padding) - static_cast<long>(g.kernel);
  if (span_h < 0 || span_w < 0 || input.h == 0 || input.w == 0) {
    throw ShapeError("conv2d: input " + input.str() + " too small for kernel " + std::to_string(g.kernel) +
                     " with padding " + std::to_string(padding));
  }
  g.out_h = static_cast<std::size_t>(span_h) / stride + 1;
  g.out_w = static_cast<std::size_t>(span_w) / stride + 1;
  return g;
}

}  // namespace hdrunet::kernels
