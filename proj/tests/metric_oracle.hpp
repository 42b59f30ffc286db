#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

// Independent reference for the evaluation metrics. Written from the metric
// definitions without reusing library code: sort-based percentile,
// log(1 + mu x) / log(1 + mu) tone curve, long double accumulation.
namespace oracle {

inline double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const long double rank = static_cast<long double>(p) / 100.0L * static_cast<long double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  const long double frac = rank - static_cast<long double>(lo);
  return static_cast<double>(v[lo] + frac * (v[hi] - v[lo]));
}

inline double psnr(long double mse, double cap) {
  if (mse == 0.0L) return cap;
  return static_cast<double>(-10.0L * std::log10(mse));
}

inline double psnr_l(const std::vector<double>& pred, const std::vector<double>& gt, double cap = 100.0) {
  const double peak = *std::max_element(gt.begin(), gt.end());
  long double acc = 0.0L;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const long double d = static_cast<long double>(pred[i]) / peak - static_cast<long double>(gt[i]) / peak;
    acc += d * d;
  }
  return psnr(acc / gt.size(), cap);
}

inline double psnr_mu(const std::vector<double>& pred, const std::vector<double>& gt, double mu = 5000.0,
                      double pct = 99.0, double cap = 100.0) {
  const double norm = percentile(gt, pct);
  auto tone = [&](double x) {
    double t = std::tanh(x / norm);
    if (t < 0.0) t = 0.0;
    return std::log(1.0 + mu * t) / std::log(1.0 + mu);
  };
  long double acc = 0.0L;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    const long double d = static_cast<long double>(tone(pred[i])) - tone(gt[i]);
    acc += d * d;
  }
  return psnr(acc / gt.size(), cap);
}

}  // namespace oracle
