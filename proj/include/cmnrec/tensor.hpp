#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace cmnrec {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& shape);
std::size_t shape_size(const Shape& shape);

class Tape;
namespace detail {
struct TensorBuilder;
}

/// Dense real tensor. Values are immutable after creation; tensors created
/// through ops on a tape carry a node handle so gradients can be queried
/// after Tape::backward.
class Tensor {
 public:
  Tensor() = default;
  /// Untracked tensor. Rejects NaN/Inf values and shape/size mismatch.
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor vector(std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return values_ ? values_->size() : 0; }
  const std::vector<double>& values() const { return *values_; }
  double operator[](std::size_t flat_index) const { return (*values_)[flat_index]; }
  /// Value of a single-element tensor.
  double item() const;

  bool is_scalar() const { return size() == 1; }
  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::int64_t node() const { return node_; }

 private:
  friend class Tape;
  friend struct detail::TensorBuilder;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> values_;
  Tape* tape_ = nullptr;
  std::int64_t node_ = -1;
};

/// Records one forward pass. Ops whose inputs are on the tape append nodes in
/// topological order; backward() sweeps them exactly once in reverse.
/// Single-threaded; build and discard one tape per forward pass.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers a tensor's buffer as a differentiable leaf on this tape.
  Tensor leaf(const Tensor& t);

  /// Seeds d(loss)/d(loss) = 1 and propagates. `loss` must be a scalar
  /// recorded on this tape.
  void backward(const Tensor& loss);

  /// Gradient of the last backward() loss w.r.t. `t` (zeros if untouched).
  Tensor grad(const Tensor& t) const;

  std::size_t node_count() const { return nodes_.size(); }

  // Op-recording interface (used by the tensor ops, not by callers).
  using BackwardFn = std::function<void(Tape&, const std::vector<double>& out_grad)>;
  std::int64_t emplace(Shape shape, std::shared_ptr<const std::vector<double>> values,
                       BackwardFn backward);
  void accumulate(std::int64_t node, const std::vector<double>& contribution);
  void accumulate_at(std::int64_t node, std::size_t flat_index, double contribution);

 private:
  struct Node {
    Shape shape;
    std::shared_ptr<const std::vector<double>> values;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool swept_ = false;
};

// ---- Differentiable primitives -------------------------------------------
//
// Binary elementwise ops broadcast: equal shapes, either side scalar, or a
// matrix against a row vector of matching width. Shape errors name the op
// and the offending shapes.

Tensor add(const Tensor& a, const Tensor& b);
Tensor subtract(const Tensor& a, const Tensor& b);
Tensor multiply(const Tensor& a, const Tensor& b);
Tensor divide(const Tensor& a, const Tensor& b);

/// (r x c)·(c x k) -> (r x k); (r x c)·(c) -> (r); (r)·(r x c) -> (c).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sqrt(const Tensor& a);

/// Stable softmax (max subtraction) over a nonempty 1-D tensor.
Tensor softmax(const Tensor& a);

Tensor scalar_scale(const Tensor& a, double factor);
/// Sum of all elements, as a scalar tensor.
Tensor sum(const Tensor& a);

/// 1-D concatenation in argument order.
Tensor concat(const std::vector<Tensor>& parts);
/// Stacks equal-length 1-D tensors into a (rows x width) matrix.
Tensor stack_rows(const std::vector<Tensor>& rows);
/// Elements [lo, hi) of a 1-D tensor.
Tensor slice(const Tensor& a, std::size_t lo, std::size_t hi);
/// Row `index` of a 2-D tensor as a 1-D tensor.
Tensor row(const Tensor& a, std::size_t index);
Tensor reshape(const Tensor& a, Shape shape);

/// -log softmax(logits)[target_index], computed via log-sum-exp.
Tensor cross_entropy_with_index(const Tensor& logits, std::size_t target_index);

// ---- Gradient-check oracle ------------------------------------------------

/// Central finite differences, (f(p+eps) - f(p-eps)) / 2eps per coordinate.
/// Independent of the tape: `f` is re-evaluated on perturbed copies.
std::vector<Tensor> finite_difference_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params, double eps);

}  // namespace cmnrec
