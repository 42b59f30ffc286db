#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hdrunet/errors.hpp"

namespace hdrunet {

template <typename T>
concept Real = std::same_as<T, float> || std::same_as<T, double>;

struct Shape {
  std::size_t n = 0;
  std::size_t c = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  std::size_t numel() const { return n * c * h * w; }
  std::size_t plane() const { return h * w; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

// Identifies the node that produced a tensor on a particular tape.
struct TapeLink {
  std::uint64_t tape_serial = 0;
  std::size_t id = 0;
};

template <Real T>
class Tape;

/// Dense NCHW array. Copies are deep; a copy keeps the tape link of its source,
/// so it is treated as the same graph value by subsequent ops.
template <Real T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));

  /// Throws ShapeError when values.size() != shape.numel().
  static Tensor from_data(Shape shape, std::vector<T> values);

  const Shape& shape() const { return shape_; }
  std::size_t numel() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  T operator[](std::size_t i) const { return data_[i]; }

  std::size_t offset(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
    return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) { return data_[offset(n, c, h, w)]; }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const { return data_[offset(n, c, h, w)]; }

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);

  bool has_grad() const { return !grad_.empty(); }
  std::span<T> grad() { return grad_; }
  std::span<const T> grad() const { return grad_; }
  void zero_grad();

  const std::optional<TapeLink>& link() const { return link_; }
  /// Drops graph linkage, turning this into a constant for later ops.
  void detach() { link_.reset(); }

 private:
  friend class Tape<T>;

  Shape shape_;
  std::vector<T> data_;
  bool requires_grad_ = false;
  std::vector<T> grad_;
  std::optional<TapeLink> link_;
};

/// Define-by-run record of differentiable ops. Nodes are appended in execution
/// order, so the node list is already topologically sorted.
///
/// Leaves are registered with watch(); their gradients are written back into
/// Tensor::grad() on backward(), so a watched tensor must outlive the backward
/// call (not the tape).
template <Real T>
class Tape {
 public:
  /// Receives the upstream gradient of the node output and one gradient buffer
  /// per input (empty span for inputs that are not on the tape). Rules must
  /// accumulate (+=) into the input buffers.
  using BackwardFn = std::function<void(std::span<const T> upstream, std::span<const std::span<T>> input_grads)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void watch(Tensor<T>& leaf);
  bool tracks(const Tensor<T>& t) const;

  /// Links `out` to a new node whose inputs are the tracked members of `inputs`.
  void record(std::initializer_list<const Tensor<T>*> inputs, Tensor<T>& out, BackwardFn fn);
  void record(std::span<const Tensor<T>* const> inputs, Tensor<T>& out, BackwardFn fn);

  /// Reverse sweep from a single-element tensor. May be called more than once;
  /// leaf gradients accumulate across calls.
  void backward(const Tensor<T>& loss);

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t value_count() const { return slots_.size(); }
  std::uint64_t serial() const { return serial_; }

 private:
  struct Node {
    std::vector<std::optional<std::size_t>> inputs;
    std::size_t output = 0;
    BackwardFn backward;
  };
  struct Slot {
    std::size_t numel = 0;
    std::vector<T> grad;
    Tensor<T>* leaf = nullptr;
    std::optional<std::size_t> producer;
  };

  std::optional<std::size_t> id_of(const Tensor<T>& t) const;
  std::size_t new_slot(std::size_t numel);

  std::uint64_t serial_;
  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
};

/// The tape recording on the current thread, or nullptr.
template <Real T>
Tape<T>* active_tape();

/// Makes `tape` the active tape of this thread for the scope's lifetime.
template <Real T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <Real T>
TapeScope(Tape<T>&) -> TapeScope<T>;

/// Observes the on/off pattern of every nondifferentiable point (ReLU, |x|)
/// evaluated while it is installed on the current thread. Finite-difference
/// checks use it to detect a perturbation that straddles a kink.
class KinkProbe {
 public:
  KinkProbe();
  ~KinkProbe();
  KinkProbe(const KinkProbe&) = delete;
  KinkProbe& operator=(const KinkProbe&) = delete;

  void reset() { hash_ = 1469598103934665603ULL; }
  std::uint64_t hash() const { return hash_; }
  void mix(bool bit) { hash_ = (hash_ ^ (bit ? 0x9eULL : 0x3cULL)) * 1099511628211ULL; }

  static KinkProbe* current();

 private:
  std::uint64_t hash_;
  KinkProbe* previous_;
};

}  // namespace hdrunet
