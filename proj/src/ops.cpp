#include "hdrunet/ops.hpp"

#include <cmath>

#include "hdrunet/kernels.hpp"

namespace hdrunet::ops {

namespace {

constexpr long kParallelMin = 1L << 15;

template <Real T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) {
    return nullptr;
  }
  for (const Tensor<T>* t : inputs) {
    if (tape->tracks(*t)) {
      return tape;
    }
  }
  return nullptr;
}

template <Real T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

// out[i] = f(a[i]); backward: gin[i] += up[i] * dfdx(a[i], out[i]).
template <Real T, typename F, typename D>
Tensor<T> unary(const Tensor<T>& a, F f, D dfdx) {
  Tensor<T> out(a.shape());
  const long n = static_cast<long>(a.numel());
  const T* x = a.data().data();
  T* y = out.data().data();
#pragma omp parallel for if (n >= kParallelMin)
  for (long i = 0; i < n; ++i) {
    y[i] = f(x[i]);
  }
  if (Tape<T>* tape = recording_tape<T>({&a})) {
    tape->record({&a}, out,
                 [xs = a.values(), ys = out.values(), dfdx](std::span<const T> up, std::span<const std::span<T>> gin) {
                   if (gin[0].empty()) {
                     return;
                   }
                   for (std::size_t i = 0; i < up.size(); ++i) {
                     gin[0][i] += up[i] * dfdx(xs[i], ys[i]);
                   }
                 });
  }
  return out;
}

template <Real T>
void mix_kinks(std::span<const T> values) {
  if (KinkProbe* probe = KinkProbe::current()) {
    for (const T v : values) {
      probe->mix(v > T(0));
      probe->mix(v < T(0));
    }
  }
}

}  // namespace

template <Real T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  Tensor<T> out(a.shape());
  const long n = static_cast<long>(a.numel());
#pragma omp parallel for if (n >= kParallelMin)
  for (long i = 0; i < n; ++i) {
    out[i] = a[i] + b[i];
  }
  if (Tape<T>* tape = recording_tape<T>({&a, &b})) {
    tape->record({&a, &b}, out, [](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (const auto& g : gin) {
        for (std::size_t i = 0; i < g.size(); ++i) {
          g[i] += up[i];
        }
      }
    });
  }
  return out;
}

template <Real T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  Tensor<T> out(a.shape());
  const long n = static_cast<long>(a.numel());
#pragma omp parallel for if (n >= kParallelMin)
  for (long i = 0; i < n; ++i) {
    out[i] = a[i] - b[i];
  }
  if (Tape<T>* tape = recording_tape<T>({&a, &b})) {
    tape->record({&a, &b}, out, [](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (std::size_t i = 0; i < gin[0].size(); ++i) {
        gin[0][i] += up[i];
      }
      for (std::size_t i = 0; i < gin[1].size(); ++i) {
        gin[1][i] -= up[i];
      }
    });
  }
  return out;
}

template <Real T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  Tensor<T> out(a.shape());
  const long n = static_cast<long>(a.numel());
#pragma omp parallel for if (n >= kParallelMin)
  for (long i = 0; i < n; ++i) {
    out[i] = a[i] * b[i];
  }
  if (Tape<T>* tape = recording_tape<T>({&a, &b})) {
    const bool need_a = tape->tracks(a);
    const bool need_b = tape->tracks(b);
    std::vector<T> av = need_b ? a.values() : std::vector<T>{};
    std::vector<T> bv = need_a ? b.values() : std::vector<T>{};
    tape->record({&a, &b}, out,
                 [av = std::move(av), bv = std::move(bv)](std::span<const T> up, std::span<const std::span<T>> gin) {
                   for (std::size_t i = 0; i < gin[0].size(); ++i) {
                     gin[0][i] += up[i] * bv[i];
                   }
                   for (std::size_t i = 0; i < gin[1].size(); ++i) {
                     gin[1][i] += up[i] * av[i];
                   }
                 });
  }
  return out;
}

template <Real T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary<T>(
      a, [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <Real T>
Tensor<T> abs(const Tensor<T>& a) {
  mix_kinks<T>(a.data());
  return unary<T>(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <Real T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary<T>(
      a, [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <Real T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  // Split on sign so exp never overflows.
  return unary<T>(
      a,
      [](T x) {
        if (x >= T(0)) {
          return T(1) / (T(1) + std::exp(-x));
        }
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <Real T>
Tensor<T> relu(const Tensor<T>& a) {
  mix_kinks<T>(a.data());
  return unary<T>(
      a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <Real T>
Tensor<T> sum_all(const Tensor<T>& a) {
  T acc = T(0);
  for (const T v : a.data()) {
    acc += v;
  }
  Tensor<T> out(Shape{1, 1, 1, 1}, acc);
  if (Tape<T>* tape = recording_tape<T>({&a})) {
    tape->record({&a}, out, [](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (auto& g : gin[0]) {
        g += up[0];
      }
    });
  }
  return out;
}

template <Real T>
Tensor<T> mean_all(const Tensor<T>& a) {
  if (a.numel() == 0) {
    throw ShapeError("mean_all: empty tensor");
  }
  T acc = T(0);
  for (const T v : a.data()) {
    acc += v;
  }
  const T inv = T(1) / static_cast<T>(a.numel());
  Tensor<T> out(Shape{1, 1, 1, 1}, acc * inv);
  if (Tape<T>* tape = recording_tape<T>({&a})) {
    tape->record({&a}, out, [inv](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (auto& g : gin[0]) {
        g += up[0] * inv;
      }
    });
  }
  return out;
}

template <Real T>
Tensor<T> broadcast_mul_add(const Tensor<T>& x, const Tensor<T>& alpha, const Tensor<T>& beta) {
  const Shape& xs = x.shape();
  const Shape& as = alpha.shape();
  if (as != beta.shape()) {
    throw ShapeError("broadcast_mul_add: alpha " + as.str() + " and beta " + beta.shape().str() + " differ");
  }
  const bool full = as == xs;
  const bool spatial = as == Shape{xs.n, 1, xs.h, xs.w};
  const bool channel = as == Shape{xs.n, xs.c, 1, 1};
  if (!full && !spatial && !channel) {
    throw ShapeError("broadcast_mul_add: modulation shape " + as.str() + " cannot broadcast to " + xs.str());
  }
  const std::size_t plane = xs.plane();
  // Index of the modulation element paired with x at (n, c, p).
  auto mod_index = [=](std::size_t n, std::size_t c, std::size_t p) -> std::size_t {
    if (full) {
      return (n * xs.c + c) * plane + p;
    }
    if (spatial) {
      return n * plane + p;
    }
    return n * xs.c + c;
  };

  Tensor<T> out(xs);
  const long planes = static_cast<long>(xs.n * xs.c);
#pragma omp parallel for if (static_cast<long>(xs.numel()) >= kParallelMin)
  for (long nc = 0; nc < planes; ++nc) {
    const std::size_t n = static_cast<std::size_t>(nc) / xs.c;
    const std::size_t c = static_cast<std::size_t>(nc) % xs.c;
    for (std::size_t p = 0; p < plane; ++p) {
      const std::size_t i = static_cast<std::size_t>(nc) * plane + p;
      const std::size_t m = mod_index(n, c, p);
      out[i] = alpha[m] * x[i] + beta[m];
    }
  }

  if (Tape<T>* tape = recording_tape<T>({&x, &alpha, &beta})) {
    tape->record({&x, &alpha, &beta}, out,
                 [xv = x.values(), av = alpha.values(), xs, mod_index](std::span<const T> up,
                                                                       std::span<const std::span<T>> gin) {
                   const std::size_t plane = xs.plane();
                   for (std::size_t n = 0; n < xs.n; ++n) {
                     for (std::size_t c = 0; c < xs.c; ++c) {
                       for (std::size_t p = 0; p < plane; ++p) {
                         const std::size_t i = (n * xs.c + c) * plane + p;
                         const std::size_t m = mod_index(n, c, p);
                         if (!gin[0].empty()) {
                           gin[0][i] += up[i] * av[m];
                         }
                         if (!gin[1].empty()) {
                           gin[1][m] += up[i] * xv[i];
                         }
                         if (!gin[2].empty()) {
                           gin[2][m] += up[i];
                         }
                       }
                     }
                   }
                 });
  }
  return out;
}

template <Real T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias, std::size_t stride,
                 std::size_t padding) {
  const auto g = kernels::ConvGeometry::make(input.shape(), weight.shape(), stride, padding);
  if (bias.numel() != 0 && bias.numel() != g.out_channels) {
    throw ShapeError("conv2d: bias has " + std::to_string(bias.numel()) + " elements, expected " +
                     std::to_string(g.out_channels));
  }
  Tensor<T> out(g.output_shape());
  kernels::conv2d_forward<T>(g, input.data(), weight.data(), bias.data(), out.data());

  if (Tape<T>* tape = recording_tape<T>({&input, &weight, &bias})) {
    std::vector<T> in_copy = (tape->tracks(weight)) ? input.values() : std::vector<T>{};
    std::vector<T> w_copy = tape->tracks(input) ? weight.values() : std::vector<T>{};
    tape->record({&input, &weight, &bias}, out,
                 [g, in_copy = std::move(in_copy), w_copy = std::move(w_copy)](std::span<const T> up,
                                                                               std::span<const std::span<T>> gin) {
                   if (!gin[0].empty()) {
                     kernels::conv2d_backward_input<T>(g, up, w_copy, gin[0]);
                   }
                   if (!gin[1].empty() || !gin[2].empty()) {
                     kernels::conv2d_backward_params<T>(g, up, in_copy, gin[1], gin[2]);
                   }
                 });
  }
  return out;
}

template <Real T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r) {
  const Shape& s = input.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw ShapeError("pixel_shuffle: " + std::to_string(s.c) + " channels not divisible by r^2 = " +
                     std::to_string(r * r));
  }
  const Shape os{s.n, s.c / (r * r), s.h * r, s.w * r};
  // src[k] is the input offset feeding output element k.
  std::vector<std::size_t> src(os.numel());
  for (std::size_t n = 0; n < os.n; ++n) {
    for (std::size_t c = 0; c < os.c; ++c) {
      for (std::size_t y = 0; y < os.h; ++y) {
        for (std::size_t x = 0; x < os.w; ++x) {
          const std::size_t i = y % r;
          const std::size_t j = x % r;
          src[((n * os.c + c) * os.h + y) * os.w + x] = input.offset(n, c * r * r + i * r + j, y / r, x / r);
        }
      }
    }
  }
  Tensor<T> out(os);
  for (std::size_t k = 0; k < src.size(); ++k) {
    out[k] = input[src[k]];
  }
  if (Tape<T>* tape = recording_tape<T>({&input})) {
    tape->record({&input}, out, [src = std::move(src)](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (std::size_t k = 0; k < src.size(); ++k) {
        gin[0][src[k]] += up[k];
      }
    });
  }
  return out;
}

template <Real T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r) {
  const Shape& s = input.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw ShapeError("pixel_unshuffle: spatial dims of " + s.str() + " not divisible by " + std::to_string(r));
  }
  const Shape os{s.n, s.c * r * r, s.h / r, s.w / r};
  std::vector<std::size_t> src(os.numel());
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t y = 0; y < s.h; ++y) {
        for (std::size_t x = 0; x < s.w; ++x) {
          const std::size_t oc = c * r * r + (y % r) * r + (x % r);
          src[((n * os.c + oc) * os.h + y / r) * os.w + x / r] = input.offset(n, c, y, x);
        }
      }
    }
  }
  Tensor<T> out(os);
  for (std::size_t k = 0; k < src.size(); ++k) {
    out[k] = input[src[k]];
  }
  if (Tape<T>* tape = recording_tape<T>({&input})) {
    tape->record({&input}, out, [src = std::move(src)](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (std::size_t k = 0; k < src.size(); ++k) {
        gin[0][src[k]] += up[k];
      }
    });
  }
  return out;
}

template <Real T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw ShapeError("concat_channels: " + sa.str() + " and " + sb.str() + " differ outside the channel axis");
  }
  const Shape os{sa.n, sa.c + sb.c, sa.h, sa.w};
  const std::size_t block_a = sa.c * sa.plane();
  const std::size_t block_b = sb.c * sb.plane();
  Tensor<T> out(os);
  for (std::size_t n = 0; n < os.n; ++n) {
    std::copy_n(a.data().begin() + n * block_a, block_a, out.data().begin() + n * (block_a + block_b));
    std::copy_n(b.data().begin() + n * block_b, block_b, out.data().begin() + n * (block_a + block_b) + block_a);
  }
  if (Tape<T>* tape = recording_tape<T>({&a, &b})) {
    tape->record({&a, &b}, out,
                 [block_a, block_b, batch = os.n](std::span<const T> up, std::span<const std::span<T>> gin) {
                   for (std::size_t n = 0; n < batch; ++n) {
                     const std::size_t base = n * (block_a + block_b);
                     for (std::size_t i = 0; i < block_a && !gin[0].empty(); ++i) {
                       gin[0][n * block_a + i] += up[base + i];
                     }
                     for (std::size_t i = 0; i < block_b && !gin[1].empty(); ++i) {
                       gin[1][n * block_b + i] += up[base + block_a + i];
                     }
                   }
                 });
  }
  return out;
}

template <Real T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  const Shape& s = input.shape();
  const std::size_t plane = s.plane();
  if (plane == 0) {
    throw ShapeError("global_avg_pool: empty spatial extent in " + s.str());
  }
  const T inv = T(1) / static_cast<T>(plane);
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  for (std::size_t p = 0; p < s.n * s.c; ++p) {
    T acc = T(0);
    for (std::size_t i = 0; i < plane; ++i) {
      acc += input[p * plane + i];
    }
    out[p] = acc * inv;
  }
  if (Tape<T>* tape = recording_tape<T>({&input})) {
    tape->record({&input}, out, [plane, inv](std::span<const T> up, std::span<const std::span<T>> gin) {
      for (std::size_t p = 0; p < up.size(); ++p) {
        for (std::size_t i = 0; i < plane; ++i) {
          gin[0][p * plane + i] += up[p] * inv;
        }
      }
    });
  }
  return out;
}

#define HDRUNET_INSTANTIATE(T)                                                                               \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> sub<T>(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                                             \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                                          \
  template Tensor<T> abs<T>(const Tensor<T>&);                                                               \
  template Tensor<T> tanh<T>(const Tensor<T>&);                                                              \
  template Tensor<T> sigmoid<T>(const Tensor<T>&);                                                           \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                              \
  template Tensor<T> sum_all<T>(const Tensor<T>&);                                                           \
  template Tensor<T> mean_all<T>(const Tensor<T>&);                                                          \
  template Tensor<T> broadcast_mul_add<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);             \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, std::size_t, std::size_t); \
  template Tensor<T> pixel_shuffle<T>(const Tensor<T>&, std::size_t);                                        \
  template Tensor<T> pixel_unshuffle<T>(const Tensor<T>&, std::size_t);                                      \
  template Tensor<T> concat_channels<T>(const Tensor<T>&, const Tensor<T>&);                                 \
  template Tensor<T> global_avg_pool<T>(const Tensor<T>&);

HDRUNET_INSTANTIATE(float)
HDRUNET_INSTANTIATE(double)
#undef HDRUNET_INSTANTIATE

}  // namespace hdrunet::ops
