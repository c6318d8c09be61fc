#pragma once

// Dense 64-bit tensors with define-by-run reverse-mode differentiation.
//
// Every op that sees an input requiring gradients appends an entry to the
// calling thread's Tape. Tape::backward walks those entries in reverse
// recording order, so the tape is its own topological order. Leaves
// (parameters) accumulate gradients across backward calls until zero_grad.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace crnmt {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  bool is_leaf = true;
  std::uint64_t tape_generation = 0;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

using NodePtr = std::shared_ptr<Node>;

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  std::span<double> mutable_data();
  double item() const;

  bool requires_grad() const;
  void set_requires_grad(bool on);

  bool has_grad() const;
  /// Gradient values; all zeros when nothing has been accumulated yet.
  std::vector<double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  /// Copy of the values, cut off from any tape.
  Tensor detach() const;

  const detail::NodePtr& node() const { return node_; }
  static Tensor wrap(detail::NodePtr node);

 private:
  detail::NodePtr node_;
};

/// Ordered record of differentiable operations executed on one thread.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  /// The calling thread's tape.
  static Tape& current();

  void record(detail::NodePtr output, std::vector<detail::NodePtr> inputs, BackwardFn fn);

  /// Forget all recorded operations. Call at the start of every forward pass.
  void clear();
  std::size_t size() const { return entries_.size(); }
  std::uint64_t generation() const { return generation_; }

  /// Seed d(loss)=1 and propagate. Intermediate gradients are reset on each
  /// call; leaf gradients accumulate.
  void backward(const Tensor& loss);

 private:
  struct Entry {
    detail::NodePtr output;
    std::vector<detail::NodePtr> inputs;
    BackwardFn fn;
  };
  std::vector<Entry> entries_;
  std::uint64_t generation_ = 1;
};

void backward(const Tensor& loss);

bool grad_enabled();

/// Disables recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---------------------------------------------------------------------------
// Operations. Elementwise binary ops broadcast numpy-style (right-aligned,
// size-1 or missing dims stretch).

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
/// alpha * a + beta
Tensor affine(const Tensor& a, double alpha, double beta);

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);

Tensor softmax(const Tensor& a, std::size_t axis);
/// Softmax over the last axis where mask==0 entries act as -infinity and
/// receive exactly zero weight. Every row needs one unmasked entry.
Tensor masked_softmax(const Tensor& a, std::span<const std::uint8_t> mask);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
inline Tensor concat(const Tensor& a, const Tensor& b, std::size_t axis) { return concat({a, b}, axis); }
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
Tensor reshape(const Tensor& a, Shape shape);

/// Rows of `table` selected by `ids`; result is [ids.size() x d].
Tensor embedding_lookup(const Tensor& table, std::span<const std::int64_t> ids);

/// SAME-padded 1-D convolution over the time axis. `input` is [T x d_in] or
/// [B x T x d_in], `kernel` is [n x d_in x d_out] with odd n.
Tensor conv1d(const Tensor& input, const Tensor& kernel, const Tensor& bias);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps);

/// Masked mean negative log-likelihood of `targets` under softmax(logits).
/// logits is [steps x V]; log-probabilities are valid logits too.
Tensor nll_loss(const Tensor& logits, std::span<const std::int64_t> targets,
                std::span<const std::uint8_t> mask);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

/// out[b, :] = sum_t weights[b, t] * values[b, t, :]
Tensor weighted_sum(const Tensor& weights, const Tensor& values);

/// out[b, :] = x[b, steps[b], :] for x of shape [B x T x C].
Tensor take_steps(const Tensor& x, std::span<const std::size_t> steps);

}  // namespace crnmt
