#include "fastgan/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace fastgan {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : impl_(std::make_shared<Impl>()) {
  impl_->data.assign(static_cast<std::size_t>(shape_numel(shape)), fill);
  impl_->shape = std::move(shape);
}

Tensor::Tensor(Shape shape, std::vector<Real> values) : impl_(std::make_shared<Impl>()) {
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape)) {
    throw ShapeError("value count " + std::to_string(values.size()) + " does not match shape " +
                     shape_str(shape));
  }
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

const Shape& Tensor::shape() const {
  if (!impl_) throw Error("use of undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::dim(int axis) const {
  const auto& s = shape();
  if (axis < 0) axis += static_cast<int>(s.size());
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data().size()); }

std::span<Real> Tensor::data() {
  if (!impl_) throw Error("use of undefined tensor");
  return impl_->data;
}

std::span<const Real> Tensor::data() const {
  if (!impl_) throw Error("use of undefined tensor");
  return impl_->data;
}

Real Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  if (!impl_) throw Error("use of undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return impl_ && !impl_->grad.empty(); }

std::span<Real> Tensor::grad() const {
  if (!impl_) throw Error("use of undefined tensor");
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), Real(0));
  return impl_->grad;
}

void Tensor::zero_grad() const {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), Real(0));
}

Tensor Tensor::clone() const {
  Tensor t;
  if (!impl_) return t;
  t.impl_ = std::make_shared<Impl>();
  t.impl_->shape = impl_->shape;
  t.impl_->data = impl_->data;
  return t;
}

namespace {
thread_local Graph* t_active = nullptr;
}

Graph::Graph() : previous_(t_active) { t_active = this; }

Graph::~Graph() {
  if (t_active == this) t_active = previous_;
}

Graph* Graph::active() { return t_active; }

void Graph::record(BackwardFn fn) {
  if (consumed_) throw GraphError("recording into a graph that was already consumed by backward");
  tape_.push_back(std::move(fn));
}

void Graph::backward(const Tensor& loss) {
  if (consumed_) throw GraphError("backward called twice on the same graph");
  if (!loss.defined() || loss.numel() != 1) {
    throw GraphError("backward requires a scalar loss, got shape " +
                     (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  }
  if (!loss.requires_grad()) throw GraphError("loss does not depend on any tensor requiring grad");
  loss.grad()[0] = Real(1);
  for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) (*it)();
  consumed_ = true;
  tape_.clear();
  tape_.shrink_to_fit();
}

NoGradGuard::NoGradGuard() : saved_(t_active) { t_active = nullptr; }
NoGradGuard::~NoGradGuard() { t_active = saved_; }

void backward(const Tensor& loss) {
  Graph* g = Graph::active();
  if (!g) throw GraphError("backward called with no active graph");
  g->backward(loss);
}

namespace detail {

bool should_record(std::initializer_list<const Tensor*> inputs) {
  if (!Graph::active()) return false;
  for (const Tensor* t : inputs) {
    if (t && t->requires_grad()) return true;
  }
  return false;
}

void check_finite([[maybe_unused]] const Tensor& t, [[maybe_unused]] const char* op) {
#ifndef NDEBUG
  for (Real v : t.data()) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite output from ") + op);
  }
#endif
}

}  // namespace detail
}  // namespace fastgan
