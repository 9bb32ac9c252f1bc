#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fastgan/common.hpp"

namespace fastgan {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array with an optional gradient accumulator.
//
// Tensor is a handle: copies share storage. Use clone() for a deep copy.
// Images and feature-maps use N,C,H,W order.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = 0);
  Tensor(Shape shape, std::vector<Real> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), Real(0)); }
  static Tensor full(Shape shape, Real v) { return Tensor(std::move(shape), v); }
  static Tensor scalar(Real v) { return Tensor(Shape{1}, v); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::int64_t dim(int axis) const;
  int ndim() const { return static_cast<int>(shape().size()); }
  std::int64_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real* ptr() { return data().data(); }
  const Real* ptr() const { return data().data(); }
  Real item() const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);

  // Gradient accumulator, allocated (zeroed) on first access. Accumulation is
  // not a value mutation, so it is available through const handles.
  bool has_grad() const;
  std::span<Real> grad() const;
  void zero_grad() const;

  // Deep copy of values without gradient tracking.
  Tensor clone() const;
  Tensor detach() const { return clone(); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<Real> data;
    std::vector<Real> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

// Tape of recorded differentiable ops.
//
// Constructing a Graph makes it the active recorder for the calling thread;
// destroying it restores the previously active one (graphs nest LIFO).
// Ops record a backward closure only when a graph is active and at least one
// input requires grad. backward() replays closures in reverse recording order
// and consumes the tape.
class Graph {
 public:
  using BackwardFn = std::function<void()>;

  Graph();
  ~Graph();
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  void record(BackwardFn fn);
  void backward(const Tensor& loss);

  std::size_t size() const { return tape_.size(); }
  bool consumed() const { return consumed_; }

  static Graph* active();

 private:
  friend class NoGradGuard;
  std::vector<BackwardFn> tape_;
  Graph* previous_ = nullptr;
  bool consumed_ = false;
};

// Suspends recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Graph* saved_;
};

// Backward pass on the active graph.
void backward(const Tensor& loss);

namespace detail {
// True when an op with these inputs must be recorded.
bool should_record(std::initializer_list<const Tensor*> inputs);
void check_finite(const Tensor& t, const char* op);
}  // namespace detail

}  // namespace fastgan
