#include "hdrunet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace hdrunet {

bool GradCheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.passed; });
}

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) {
    worst = std::max(worst, e.max_rel_error);
  }
  return worst;
}

double gradient_error(double analytic, double numeric, double scale_floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), scale_floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

template <Real T>
struct Evaluation {
  double value;
  std::uint64_t pattern;
};

template <Real T>
Evaluation<T> evaluate(const std::function<Tensor<T>()>& objective) {
  KinkProbe probe;
  const Tensor<T> out = objective();
  if (out.numel() != 1) {
    throw ContractError("grad_check: objective must return a single element");
  }
  return {static_cast<double>(out[0]), probe.hash()};
}

}  // namespace

template <Real T>
GradCheckReport grad_check(const std::function<Tensor<T>()>& objective, const std::vector<ParamRef<T>>& params,
                           const GradCheckOptions& options) {
  {
    Tape<T> tape;
    TapeScope scope(tape);
    for (const auto& p : params) {
      tape.watch(*p.tensor);
      p.tensor->zero_grad();
    }
    const Tensor<T> loss = objective();
    tape.backward(loss);
    for (const auto& p : params) {
      p.tensor->detach();
    }
  }

  const std::uint64_t base_pattern = evaluate<T>(objective).pattern;

  GradCheckReport report;
  report.tolerance = options.tolerance;
  for (const auto& p : params) {
    GradCheckEntry entry;
    entry.name = p.name;
    entry.count = p.tensor->numel();
    auto data = p.tensor->data();
    const auto grad = p.tensor->grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const T original = data[i];
      double h = options.step;
      double numeric = 0.0;
      bool clean = false;
      for (int attempt = 0; attempt <= options.max_step_shrinks; ++attempt) {
        const T up = static_cast<T>(static_cast<double>(original) + h);
        const T down = static_cast<T>(static_cast<double>(original) - h);
        data[i] = up;
        const auto plus = evaluate<T>(objective);
        data[i] = down;
        const auto minus = evaluate<T>(objective);
        data[i] = original;
        numeric = (plus.value - minus.value) / (static_cast<double>(up) - static_cast<double>(down));
        if (plus.pattern == base_pattern && minus.pattern == base_pattern) {
          clean = true;
          break;
        }
        if (attempt < options.max_step_shrinks) {
          ++entry.kink_shrinks;
          h /= 10.0;
        }
      }
      if (!clean) {
        ++entry.kinked;
      }
      const double analytic = static_cast<double>(grad[i]);
      const double abs_err = std::abs(analytic - numeric);
      if (abs_err > entry.max_abs_error) {
        entry.max_abs_error = abs_err;
        entry.worst_index = i;
      }
      entry.max_elementwise_error =
          std::max(entry.max_elementwise_error, gradient_error(analytic, numeric, options.scale_floor));
      entry.grad_scale = std::max({entry.grad_scale, std::abs(analytic), std::abs(numeric)});
    }
    entry.max_rel_error = entry.max_abs_error / std::max(entry.grad_scale, options.scale_floor);
    entry.passed = entry.max_rel_error < options.tolerance;
    report.entries.push_back(std::move(entry));
  }
  return report;
}

template GradCheckReport grad_check<float>(const std::function<Tensor<float>()>&, const std::vector<ParamRef<float>>&,
                                           const GradCheckOptions&);
template GradCheckReport grad_check<double>(const std::function<Tensor<double>()>&,
                                            const std::vector<ParamRef<double>>&, const GradCheckOptions&);

}  // namespace hdrunet
