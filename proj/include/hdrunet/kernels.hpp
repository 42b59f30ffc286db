#pragma once

#include <cstddef>
#include <span>

#include "hdrunet/tensor.hpp"

namespace hdrunet::kernels {

struct ConvGeometry {
  std::size_t batch = 0;
  std::size_t in_channels = 0;
  std::size_t in_h = 0;
  std::size_t in_w = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t out_h = 0;
  std::size_t out_w = 0;

  /// Throws ShapeError on channel mismatch, non-square kernels or empty output.
  static ConvGeometry make(const Shape& input, const Shape& weight, std::size_t stride, std::size_t padding);
  Shape output_shape() const { return {batch, out_channels, out_h, out_w}; }
};

// OpenMP-parallel kernels. Work is split over output planes (forward),
// input planes (input gradient) and output channels (weight gradient), so every
// output element is produced by one thread with a fixed summation order and the
// result does not depend on the thread count.

template <Real T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

/// grad_input += conv2d_transpose(grad_output, weight)
template <Real T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> weight,
                           std::span<T> grad_input);

/// grad_weight += correlate(input, grad_output); grad_bias += sum(grad_output)
/// Either destination may be empty to skip it.
template <Real T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> input,
                            std::span<T> grad_weight, std::span<T> grad_bias);

namespace reference {

// Serial nested-loop versions, kept as the oracle for the parallel kernels.

template <Real T>
void conv2d_forward(const ConvGeometry& g, std::span<const T> input, std::span<const T> weight,
                    std::span<const T> bias, std::span<T> output);

template <Real T>
void conv2d_backward_input(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> weight,
                           std::span<T> grad_input);

template <Real T>
void conv2d_backward_params(const ConvGeometry& g, std::span<const T> grad_output, std::span<const T> input,
                            std::span<T> grad_weight, std::span<T> grad_bias);

}  // namespace reference

}  // namespace hdrunet::kernels
