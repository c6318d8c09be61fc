#include "crnmt/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace crnmt {

namespace {
thread_local bool g_grad_enabled = true;
}  // namespace

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : node_(std::make_shared<detail::Node>()) {
  if (values.size() != shape_numel(shape)) {
    throw ShapeError("tensor of shape " + to_string(shape) + " needs " + std::to_string(shape_numel(shape)) +
                     " values, got " + std::to_string(values.size()));
  }
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double value, bool requires_grad) { return Tensor(Shape{1}, value, requires_grad); }

Tensor Tensor::wrap(detail::NodePtr node) {
  Tensor t;
  t.node_ = std::move(node);
  return t;
}

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= node_->shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + to_string(node_->shape));
  }
  return node_->shape[axis];
}

std::size_t Tensor::numel() const { return node_->data.size(); }

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape()));
  return node_->data[0];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
void Tensor::set_requires_grad(bool on) { node_->requires_grad = on; }

bool Tensor::has_grad() const { return node_->grad.size() == node_->data.size(); }

std::vector<double> Tensor::grad() const {
  if (has_grad()) return node_->grad;
  return std::vector<double>(numel(), 0.0);
}

std::span<double> Tensor::mutable_grad() {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (has_grad()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const { return Tensor(node_->shape, node_->data, false); }

Tape& Tape::current() {
  thread_local Tape tape;
  return tape;
}

void Tape::record(detail::NodePtr output, std::vector<detail::NodePtr> inputs, BackwardFn fn) {
  output->is_leaf = false;
  output->requires_grad = true;
  output->tape_generation = generation_;
  entries_.push_back(Entry{std::move(output), std::move(inputs), std::move(fn)});
}

void Tape::clear() {
  entries_.clear();
  ++generation_;
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  const auto& root = loss.node();
  if (root->is_leaf || root->tape_generation != generation_) {
    throw std::logic_error("backward(): loss was not recorded on the active tape");
  }
  for (auto& e : entries_) {
    e.output->ensure_grad();
    std::fill(e.output->grad.begin(), e.output->grad.end(), 0.0);
  }
  root->grad[0] = 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    for (auto& in : it->inputs) {
      if (in->requires_grad) in->ensure_grad();
    }
    it->fn();
  }
}

void backward(const Tensor& loss) { Tape::current().backward(loss); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

}  // namespace crnmt
