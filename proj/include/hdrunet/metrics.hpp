#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hdrunet/tensor.hpp"

namespace hdrunet {

struct MetricConfig {
  double mu = 5000.0;
  double percentile = 99.0;
  double psnr_cap_db = 100.0;

  /// Throws ConfigError.
  void validate() const;
};

/// log(1 + mu x) / log(1 + mu). Throws ConfigError for mu <= 0.
double mu_law(double x, double mu);
double inverse_mu_law(double y, double mu);
template <Real T>
Tensor<T> mu_law(const Tensor<T>& x, double mu);

/// Linear interpolation between order statistics at rank p/100 * (n - 1).
/// Throws DegenerateInputError on empty input, ConfigError for p outside [0, 100].
template <Real T>
double percentile(std::span<const T> values, double p);

/// 10 log10(1 / MSE) after dividing both images by max(gt); cap when MSE is 0.
/// Throws ShapeError on size mismatch, DegenerateInputError when max(gt) <= 0.
template <Real T>
double psnr_l(std::span<const T> yhat, std::span<const T> gt, const MetricConfig& cfg = {});

/// Both images are divided by the gt percentile, bounded with tanh, clamped
/// at 0, mu-law tone-mapped, then compared at peak 1. Normalization uses gt
/// statistics only.
template <Real T>
double psnr_mu(std::span<const T> yhat, std::span<const T> gt, const MetricConfig& cfg = {});

/// Single-channel image in row-major order.
struct Plane {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// sqrt(Gx^2 + Gy^2) with the 3x3 Scharr stencils (weights 3, 10, 3), zero
/// padded. Throws ShapeError when either side is below 3.
Plane scharr_gradient_map(const Plane& image);

/// "name=<metric> value=<dB> file=<path>"
std::string format_metric_record(std::string_view metric, double value, std::string_view file);

}  // namespace hdrunet
