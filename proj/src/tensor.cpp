#include "hdrunet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>

namespace hdrunet {

std::string Shape::str() const {
  std::ostringstream os;
  os << '(' << n << ',' << c << ',' << h << ',' << w << ')';
  return os.str();
}

template <Real T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(shape), data_(shape.numel(), fill) {}

template <Real T>
Tensor<T> Tensor<T>::from_data(Shape shape, std::vector<T> values) {
  if (values.size() != shape.numel()) {
    throw ShapeError("from_data: shape " + shape.str() + " needs " + std::to_string(shape.numel()) +
                     " values, got " + std::to_string(values.size()));
  }
  Tensor t;
  t.shape_ = shape;
  t.data_ = std::move(values);
  return t;
}

template <Real T>
void Tensor<T>::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on && grad_.size() != data_.size()) {
    grad_.assign(data_.size(), T(0));
  }
  if (!on) {
    grad_.clear();
  }
}

template <Real T>
void Tensor<T>::zero_grad() {
  std::fill(grad_.begin(), grad_.end(), T(0));
}

namespace {

std::atomic<std::uint64_t> next_tape_serial{1};

template <Real T>
Tape<T>*& active_slot() {
  thread_local Tape<T>* slot = nullptr;
  return slot;
}

thread_local KinkProbe* current_probe = nullptr;

}  // namespace

template <Real T>
Tape<T>::Tape() : serial_(next_tape_serial.fetch_add(1)) {}

template <Real T>
Tape<T>::~Tape() {
  if (active_slot<T>() == this) {
    active_slot<T>() = nullptr;
  }
}

template <Real T>
std::size_t Tape<T>::new_slot(std::size_t numel) {
  Slot s;
  s.numel = numel;
  slots_.push_back(std::move(s));
  return slots_.size() - 1;
}

template <Real T>
std::optional<std::size_t> Tape<T>::id_of(const Tensor<T>& t) const {
  if (t.link_ && t.link_->tape_serial == serial_ && t.link_->id < slots_.size() &&
      slots_[t.link_->id].numel == t.numel()) {
    return t.link_->id;
  }
  return std::nullopt;
}

template <Real T>
bool Tape<T>::tracks(const Tensor<T>& t) const {
  return id_of(t).has_value();
}

template <Real T>
void Tape<T>::watch(Tensor<T>& leaf) {
  if (auto id = id_of(leaf); id && slots_[*id].leaf == &leaf) {
    return;
  }
  const std::size_t id = new_slot(leaf.numel());
  slots_[id].leaf = &leaf;
  leaf.link_ = TapeLink{serial_, id};
  if (!leaf.requires_grad_) {
    leaf.set_requires_grad(true);
  }
}

template <Real T>
void Tape<T>::record(std::initializer_list<const Tensor<T>*> inputs, Tensor<T>& out, BackwardFn fn) {
  record(std::span<const Tensor<T>* const>(inputs.begin(), inputs.size()), out, std::move(fn));
}

template <Real T>
void Tape<T>::record(std::span<const Tensor<T>* const> inputs, Tensor<T>& out, BackwardFn fn) {
  Node node;
  node.inputs.reserve(inputs.size());
  for (const Tensor<T>* in : inputs) {
    node.inputs.push_back(id_of(*in));
  }
  node.output = new_slot(out.numel());
  node.backward = std::move(fn);
  slots_[node.output].producer = nodes_.size();
  out.link_ = TapeLink{serial_, node.output};
  nodes_.push_back(std::move(node));
}

template <Real T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward: loss must have exactly one element, got shape " + loss.shape().str());
  }
  const auto loss_id = id_of(loss);
  if (!loss_id) {
    throw ContractError("backward: loss is not recorded on this tape");
  }

  for (auto& s : slots_) {
    s.grad.clear();
  }
  slots_[*loss_id].grad.assign(1, T(1));

  const std::size_t last = slots_[*loss_id].producer ? *slots_[*loss_id].producer + 1 : 0;
  std::vector<std::span<T>> input_grads;
  for (std::size_t k = last; k-- > 0;) {
    Node& node = nodes_[k];
    Slot& out = slots_[node.output];
    if (out.grad.empty()) {
      continue;
    }
    input_grads.clear();
    for (const auto& in : node.inputs) {
      if (!in) {
        input_grads.emplace_back();
        continue;
      }
      Slot& s = slots_[*in];
      if (s.grad.empty()) {
        s.grad.assign(s.numel, T(0));
      }
      input_grads.emplace_back(s.grad);
    }
    node.backward(out.grad, input_grads);
  }

  for (auto& s : slots_) {
    if (s.leaf == nullptr) {
      continue;
    }
    Tensor<T>& leaf = *s.leaf;
    if (leaf.grad_.size() != leaf.data_.size()) {
      leaf.grad_.assign(leaf.data_.size(), T(0));
    }
    if (!s.grad.empty()) {
      for (std::size_t i = 0; i < s.grad.size(); ++i) {
        leaf.grad_[i] += s.grad[i];
      }
    }
  }
  for (auto& s : slots_) {
    s.grad.clear();
    s.grad.shrink_to_fit();
  }
}

template <Real T>
Tape<T>* active_tape() {
  return active_slot<T>();
}

template <Real T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(active_slot<T>()) {
  active_slot<T>() = &tape;
}

template <Real T>
TapeScope<T>::~TapeScope() {
  active_slot<T>() = previous_;
}

KinkProbe::KinkProbe() : previous_(current_probe) {
  reset();
  current_probe = this;
}

KinkProbe::~KinkProbe() { current_probe = previous_; }

KinkProbe* KinkProbe::current() { return current_probe; }

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;
template class TapeScope<float>;
template class TapeScope<double>;
template Tape<float>* active_tape<float>();
template Tape<double>* active_tape<double>();

}  // namespace hdrunet
