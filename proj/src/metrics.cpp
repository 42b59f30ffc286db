#include "hdrunet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace hdrunet {

void MetricConfig::validate() const {
  if (!(mu > 0.0)) {
    throw ConfigError("mu must be positive");
  }
  if (!(percentile > 0.0 && percentile <= 100.0)) {
    throw ConfigError("percentile must be in (0, 100]");
  }
}

double mu_law(double x, double mu) {
  if (!(mu > 0.0)) {
    throw ConfigError("mu_law: mu must be positive");
  }
  return std::log1p(mu * x) / std::log1p(mu);
}

double inverse_mu_law(double y, double mu) {
  if (!(mu > 0.0)) {
    throw ConfigError("inverse_mu_law: mu must be positive");
  }
  return std::expm1(y * std::log1p(mu)) / mu;
}

template <Real T>
Tensor<T> mu_law(const Tensor<T>& x, double mu) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    out[i] = static_cast<T>(mu_law(static_cast<double>(x[i]), mu));
  }
  return out;
}

template <Real T>
double percentile(std::span<const T> values, double p) {
  if (values.empty()) {
    throw DegenerateInputError("percentile: empty input");
  }
  if (!(p >= 0.0 && p <= 100.0)) {
    throw ConfigError("percentile: p must be in [0, 100]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

template <Real T>
void check_sizes(const char* name, std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeError(std::string(name) + ": size mismatch (" + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()) + ")");
  }
}

double psnr_from_mse(double mse, double cap) {
  if (mse == 0.0) {
    return cap;
  }
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace

template <Real T>
double psnr_l(std::span<const T> yhat, std::span<const T> gt, const MetricConfig& cfg) {
  check_sizes("psnr_l", yhat, gt);
  const double peak = static_cast<double>(*std::max_element(gt.begin(), gt.end()));
  if (!(peak > 0.0)) {
    throw DegenerateInputError("psnr_l: ground truth peak must be positive");
  }
  double sse = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = static_cast<double>(yhat[i]) / peak - static_cast<double>(gt[i]) / peak;
    sse += d * d;
  }
  return psnr_from_mse(sse / static_cast<double>(gt.size()), cfg.psnr_cap_db);
}

template <Real T>
double psnr_mu(std::span<const T> yhat, std::span<const T> gt, const MetricConfig& cfg) {
  check_sizes("psnr_mu", yhat, gt);
  cfg.validate();
  const double norm = percentile(gt, cfg.percentile);
  if (!(norm > 0.0)) {
    throw DegenerateInputError("psnr_mu: ground truth percentile must be positive");
  }
  auto tone = [&](double v) { return mu_law(std::max(0.0, std::tanh(v / norm)), cfg.mu); };
  double sse = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const double d = tone(static_cast<double>(yhat[i])) - tone(static_cast<double>(gt[i]));
    sse += d * d;
  }
  return psnr_from_mse(sse / static_cast<double>(gt.size()), cfg.psnr_cap_db);
}

Plane scharr_gradient_map(const Plane& image) {
  if (image.height < 3 || image.width < 3) {
    throw ShapeError("scharr_gradient_map: image must be at least 3x3");
  }
  if (image.values.size() != image.height * image.width) {
    throw ShapeError("scharr_gradient_map: value count does not match dimensions");
  }
  static constexpr double kx[3][3] = {{-3, 0, 3}, {-10, 0, 10}, {-3, 0, 3}};
  static constexpr double ky[3][3] = {{-3, -10, -3}, {0, 0, 0}, {3, 10, 3}};
  const long h = static_cast<long>(image.height);
  const long w = static_cast<long>(image.width);
  Plane out{image.height, image.width, std::vector<double>(image.values.size())};
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      double gx = 0.0;
      double gy = 0.0;
      for (long dy = -1; dy <= 1; ++dy) {
        for (long dx = -1; dx <= 1; ++dx) {
          const long yy = y + dy;
          const long xx = x + dx;
          if (yy < 0 || yy >= h || xx < 0 || xx >= w) {
            continue;
          }
          const double v = image.values[static_cast<std::size_t>(yy * w + xx)];
          gx += kx[dy + 1][dx + 1] * v;
          gy += ky[dy + 1][dx + 1] * v;
        }
      }
      out.values[static_cast<std::size_t>(y * w + x)] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

std::string format_metric_record(std::string_view metric, double value, std::string_view file) {
  std::ostringstream os;
  os << "name=" << metric << " value=" << std::fixed << std::setprecision(6) << value << " file=" << file;
  return os.str();
}

#define HDRUNET_INSTANTIATE(T)                                                                     \
  template Tensor<T> mu_law<T>(const Tensor<T>&, double);                                          \
  template double percentile<T>(std::span<const T>, double);                                       \
  template double psnr_l<T>(std::span<const T>, std::span<const T>, const MetricConfig&);          \
  template double psnr_mu<T>(std::span<const T>, std::span<const T>, const MetricConfig&);

HDRUNET_INSTANTIATE(float)
HDRUNET_INSTANTIATE(double)
#undef HDRUNET_INSTANTIATE

}  // namespace hdrunet
