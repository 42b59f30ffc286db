#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hdrunet/tensor.hpp"

namespace hdrunet {

template <Real T>
struct ParamRef {
  std::string name;
  Tensor<T>* tensor = nullptr;
};

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  // Denominator floor of the relative error; groups whose gradients are all
  // below it are effectively compared absolutely.
  double scale_floor = 1e-3;
  // When a +/- perturbation flips the sign pattern of a ReLU or |x| input, the
  // step is divided by 10 up to this many times.
  int max_step_shrinks = 4;
};

/// max_rel_error = max |a - n| / max(grad_scale, scale_floor), where
/// grad_scale is the largest gradient magnitude in the group.
struct GradCheckEntry {
  std::string name;
  std::size_t count = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  double grad_scale = 0.0;
  // Worst per-element gradient_error(); elements with tiny gradients sit at
  // the rounding-noise level of the difference quotient.
  double max_elementwise_error = 0.0;
  std::size_t worst_index = 0;  // index of max_abs_error
  std::size_t kink_shrinks = 0;
  std::size_t kinked = 0;  // entries still straddling a kink at the smallest step
  bool passed = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double tolerance = 0.0;
  bool passed() const;
  double max_rel_error() const;
};

/// Relative error used by grad_check: |a - n| / max(|a|, |n|, floor).
double gradient_error(double analytic, double numeric, double scale_floor);

/// Compares reverse-mode gradients of the scalar `objective` with respect to
/// every element of `params` against central differences. The objective is
/// evaluated once on a tape and then 2 * (total elements) times without one.
/// Parameter values are restored on return; their grad buffers are overwritten
/// with the analytic gradient.
template <Real T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& objective, const std::vector<ParamRef<T>>& params,
                           const GradCheckOptions& options = {});

}  // namespace hdrunet
