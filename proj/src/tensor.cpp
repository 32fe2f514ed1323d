#include "cmnrec/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace cmnrec {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<const MatRM>;
using MapMutMat = Eigen::Map<MatRM>;
using MapVec = Eigen::Map<const Eigen::VectorXd>;
using MapMutVec = Eigen::Map<Eigen::VectorXd>;

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace detail {
struct TensorBuilder {
  static Tensor build(Shape shape, std::shared_ptr<const std::vector<double>> values, Tape* tape,
                      std::int64_t node) {
    Tensor t;
    t.shape_ = std::move(shape);
    t.values_ = std::move(values);
    t.tape_ = tape;
    t.node_ = node;
    return t;
  }
  static const std::shared_ptr<const std::vector<double>>& buffer(const Tensor& t) {
    return t.values_;
  }
};
}  // namespace detail

namespace {

[[noreturn]] void fail(const std::string& op, const std::string& what) {
  throw std::invalid_argument(op + ": " + what);
}

[[noreturn]] void fail_shapes(const std::string& op, const Tensor& a, const Tensor& b) {
  fail(op, "incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

void check_nonempty_shape(const std::string& op, const Shape& shape) {
  if (shape.empty()) fail(op, "empty shape");
  for (std::size_t d : shape)
    if (d == 0) fail(op, "zero dimension in shape " + shape_str(shape));
}

// Fast-path construction for op results: values come from finite arithmetic
// on already-validated inputs, so the NaN scan is skipped.
Tensor make_result(Tape* tape, Shape shape, std::shared_ptr<const std::vector<double>> buf,
                   Tape::BackwardFn backward) {
  std::int64_t node = -1;
  if (tape != nullptr) node = tape->emplace(shape, buf, std::move(backward));
  return detail::TensorBuilder::build(std::move(shape), std::move(buf), tape, node);
}

Tensor make_result(Tape* tape, Shape shape, std::vector<double> values, Tape::BackwardFn backward) {
  return make_result(tape, std::move(shape),
                     std::make_shared<const std::vector<double>>(std::move(values)),
                     std::move(backward));
}

Tensor make_result(Tape* tape, Shape shape, std::shared_ptr<std::vector<double>> values,
                   Tape::BackwardFn backward) {
  return make_result(tape, std::move(shape),
                     std::shared_ptr<const std::vector<double>>(std::move(values)),
                     std::move(backward));
}

// All tracked inputs of one op must live on the same tape.
Tape* joint_tape(const std::string& op, std::initializer_list<const Tensor*> inputs) {
  Tape* tape = nullptr;
  for (const Tensor* t : inputs) {
    if (!t->tracked()) continue;
    if (tape == nullptr) {
      tape = t->tape();
    } else if (tape != t->tape()) {
      fail(op, "inputs recorded on different tapes");
    }
  }
  return tape;
}

Tape* joint_tape(const std::string& op, const std::vector<Tensor>& inputs) {
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    if (!t.tracked()) continue;
    if (tape == nullptr) {
      tape = t.tape();
    } else if (tape != t.tape()) {
      fail(op, "inputs recorded on different tapes");
    }
  }
  return tape;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  check_nonempty_shape("tensor", shape_);
  if (values.size() != shape_size(shape_))
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape_));
  for (double v : values)
    if (!std::isfinite(v)) throw std::invalid_argument("tensor: non-finite value");
  values_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  std::size_t n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({1}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  Shape shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

double Tensor::item() const {
  if (size() != 1) throw std::invalid_argument("item: tensor " + shape_str(shape_) + " is not a scalar");
  return (*values_)[0];
}

// ---- Tape ------------------------------------------------------------------

Tensor Tape::leaf(const Tensor& t) {
  if (t.size() == 0) throw std::invalid_argument("leaf: empty tensor");
  std::int64_t node = emplace(t.shape(), t.values_, nullptr);
  return detail::TensorBuilder::build(t.shape(), t.values_, this, node);
}

std::int64_t Tape::emplace(Shape shape, std::shared_ptr<const std::vector<double>> values,
                           BackwardFn backward) {
  nodes_.push_back(Node{std::move(shape), std::move(values), std::move(backward)});
  return static_cast<std::int64_t>(nodes_.size()) - 1;
}

void Tape::accumulate(std::int64_t node, const std::vector<double>& contribution) {
  if (node < 0) return;  // constant input, no gradient
  auto& g = grads_[static_cast<std::size_t>(node)];
  if (g.empty()) g.assign(contribution.size(), 0.0);
  for (std::size_t i = 0; i < contribution.size(); ++i) g[i] += contribution[i];
}

void Tape::accumulate_at(std::int64_t node, std::size_t flat_index, double contribution) {
  if (node < 0) return;
  auto& g = grads_[static_cast<std::size_t>(node)];
  if (g.empty()) g.assign(shape_size(nodes_[static_cast<std::size_t>(node)].shape), 0.0);
  g[flat_index] += contribution;
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw std::invalid_argument("backward: loss is not on this tape");
  if (!loss.is_scalar())
    throw std::invalid_argument("backward: loss must be scalar, got " + shape_str(loss.shape()));
  grads_.assign(nodes_.size(), {});
  swept_ = true;
  grads_[static_cast<std::size_t>(loss.node())] = {1.0};
  for (std::int64_t id = loss.node(); id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.backward) continue;
    const auto& g = grads_[static_cast<std::size_t>(id)];
    if (g.empty()) continue;  // node does not influence the loss
    n.backward(*this, g);
  }
}

Tensor Tape::grad(const Tensor& t) const {
  if (t.tape() != this) throw std::invalid_argument("grad: tensor is not on this tape");
  if (!swept_) throw std::logic_error("grad: backward() has not run");
  const auto& g = grads_[static_cast<std::size_t>(t.node())];
  if (g.empty()) return Tensor::zeros(t.shape());
  return Tensor(t.shape(), g);
}

// ---- Broadcasting binary ops -----------------------------------------------

namespace {

enum class Bcast { kSame, kLeftScalar, kRightScalar, kLeftRow, kRightRow };

struct BcastPlan {
  Bcast mode;
  Shape out_shape;
};

BcastPlan plan_broadcast(const std::string& op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return {Bcast::kSame, a.shape()};
  if (a.is_scalar()) return {Bcast::kLeftScalar, b.shape()};
  if (b.is_scalar()) return {Bcast::kRightScalar, a.shape()};
  if (a.shape().size() == 1 && b.shape().size() == 2 && a.shape()[0] == b.shape()[1])
    return {Bcast::kLeftRow, b.shape()};
  if (b.shape().size() == 1 && a.shape().size() == 2 && b.shape()[0] == a.shape()[1])
    return {Bcast::kRightRow, a.shape()};
  fail_shapes(op, a, b);
}

// Reduces an out-shaped gradient back to the operand's shape.
std::vector<double> reduce_to(const Shape& operand_shape, const Shape& out_shape,
                              const std::vector<double>& grad) {
  std::size_t n = shape_size(operand_shape);
  if (n == grad.size()) return grad;
  std::vector<double> r(n, 0.0);
  if (n == 1) {
    r[0] = std::accumulate(grad.begin(), grad.end(), 0.0);
  } else {
    // row vector broadcast over matrix rows
    std::size_t cols = operand_shape[0];
    std::size_t rows = out_shape[0];
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) r[j] += grad[i * cols + j];
  }
  return r;
}

template <typename Fwd, typename BwdA, typename BwdB>
Tensor broadcast_op(const std::string& op, const Tensor& a, const Tensor& b, Fwd fwd, BwdA dfda,
                    BwdB dfdb) {
  BcastPlan plan = plan_broadcast(op, a, b);
  const auto& av = a.values();
  const auto& bv = b.values();
  std::size_t n = shape_size(plan.out_shape);
  std::size_t cols = plan.out_shape.size() == 2 ? plan.out_shape[1] : n;

  auto index_a = [mode = plan.mode, cols](std::size_t i) -> std::size_t {
    switch (mode) {
      case Bcast::kLeftScalar: return 0;
      case Bcast::kLeftRow: return i % cols;
      default: return i;
    }
  };
  auto index_b = [mode = plan.mode, cols](std::size_t i) -> std::size_t {
    switch (mode) {
      case Bcast::kRightScalar: return 0;
      case Bcast::kRightRow: return i % cols;
      default: return i;
    }
  };

  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[index_a(i)], bv[index_b(i)]);

  Tape* tape = joint_tape(op, {&a, &b});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    Tensor ca = a, cb = b;  // cheap handles; keep the input buffers alive
    auto out_shape = plan.out_shape;
    backward = [=](Tape& t, const std::vector<double>& g) {
      const auto& xa = ca.values();
      const auto& xb = cb.values();
      if (ca.node() >= 0) {
        std::vector<double> ga(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
          ga[i] = g[i] * dfda(xa[index_a(i)], xb[index_b(i)]);
        t.accumulate(ca.node(), reduce_to(ca.shape(), out_shape, ga));
      }
      if (cb.node() >= 0) {
        std::vector<double> gb(g.size());
        for (std::size_t i = 0; i < g.size(); ++i)
          gb[i] = g[i] * dfdb(xa[index_a(i)], xb[index_b(i)]);
        t.accumulate(cb.node(), reduce_to(cb.shape(), out_shape, gb));
      }
    };
  }
  return make_result(tape, plan.out_shape, std::move(out), std::move(backward));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return broadcast_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor subtract(const Tensor& a, const Tensor& b) {
  return broadcast_op(
      "subtract", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor multiply(const Tensor& a, const Tensor& b) {
  return broadcast_op(
      "multiply", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor divide(const Tensor& a, const Tensor& b) {
  return broadcast_op(
      "divide", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

// ---- matmul ----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  std::size_t ra = sa.size(), rb = sb.size();
  if (ra < 1 || ra > 2 || rb < 1 || rb > 2 || (ra == 1 && rb == 1)) fail_shapes("matmul", a, b);

  std::size_t m, k, n;  // (m x k) · (k x n)
  if (ra == 2 && rb == 2) {
    m = sa[0]; k = sa[1]; n = sb[1];
    if (sb[0] != k) fail_shapes("matmul", a, b);
  } else if (ra == 2) {  // matrix · vector
    m = sa[0]; k = sa[1]; n = 1;
    if (sb[0] != k) fail_shapes("matmul", a, b);
  } else {  // vector · matrix
    m = 1; k = sa[0]; n = sb[1];
    if (sb[0] != k) fail_shapes("matmul", a, b);
  }

  std::vector<double> out(m * n);
  {
    MapMat A(a.values().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    MapMat B(b.values().data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    MapMutMat O(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    O.noalias() = A * B;
  }

  Shape out_shape;
  if (ra == 2 && rb == 2) out_shape = {m, n};
  else if (ra == 2) out_shape = {m};
  else out_shape = {n};

  Tape* tape = joint_tape("matmul", {&a, &b});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    Tensor ca = a, cb = b;
    backward = [=](Tape& t, const std::vector<double>& g) {
      MapMat G(g.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      MapMat A(ca.values().data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
      MapMat B(cb.values().data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
      if (ca.node() >= 0) {
        std::vector<double> ga(m * k);
        MapMutMat GA(ga.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
        GA.noalias() = G * B.transpose();
        t.accumulate(ca.node(), ga);
      }
      if (cb.node() >= 0) {
        std::vector<double> gb(k * n);
        MapMutMat GB(gb.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
        GB.noalias() = A.transpose() * G;
        t.accumulate(cb.node(), gb);
      }
    };
  }
  return make_result(tape, std::move(out_shape), std::move(out), std::move(backward));
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) fail("transpose", "expected 2-D tensor, got " + shape_str(a.shape()));
  std::size_t r = a.shape()[0], c = a.shape()[1];
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a.values()[i * c + j];
  Tape* tape = joint_tape("transpose", {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::int64_t a_node = a.node();
    backward = [=](Tape& t, const std::vector<double>& g) {
      std::vector<double> ga(r * c);
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) ga[i * c + j] = g[j * r + i];
      t.accumulate(a_node, ga);
    };
  }
  return make_result(tape, {c, r}, std::move(out), std::move(backward));
}

// ---- Unary elementwise -------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor unary_op(const std::string& op, const Tensor& a, Fwd fwd, Bwd dfdx) {
  auto out = std::make_shared<std::vector<double>>(a.size());
  for (std::size_t i = 0; i < out->size(); ++i) (*out)[i] = fwd(a.values()[i]);
  Tape* tape = joint_tape(op, {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    Tensor ca = a;
    backward = [=](Tape& t, const std::vector<double>& g) {
      std::vector<double> ga(g.size());
      for (std::size_t i = 0; i < g.size(); ++i)
        ga[i] = g[i] * dfdx(ca.values()[i], (*out)[i]);
      t.accumulate(ca.node(), ga);
    };
  }
  return make_result(tape, a.shape(), out, std::move(backward));
}

double stable_sigmoid(double x) {
  if (x >= 0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  // log(1 + e^x) without overflow
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Tensor tanh(const Tensor& a) {
  return unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double, double y) { return 1.0 - y * y; });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op(
      "sigmoid", a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor softplus(const Tensor& a) {
  return unary_op(
      "softplus", a, [](double x) { return stable_softplus(x); },
      [](double x, double) { return stable_sigmoid(x); });
}

Tensor sqrt(const Tensor& a) {
  for (double v : a.values())
    if (v < 0.0) fail("sqrt", "negative input");
  return unary_op(
      "sqrt", a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Tensor scalar_scale(const Tensor& a, double factor) {
  if (!std::isfinite(factor)) fail("scalar_scale", "non-finite factor");
  return unary_op(
      "scalar_scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

// ---- softmax / reductions ----------------------------------------------------

Tensor softmax(const Tensor& a) {
  if (a.shape().size() != 1 || a.size() == 0)
    fail("softmax", "expected nonempty 1-D tensor, got " + shape_str(a.shape()));
  const auto& x = a.values();
  double mx = *std::max_element(x.begin(), x.end());
  auto out = std::make_shared<std::vector<double>>(x.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    (*out)[i] = std::exp(x[i] - mx);
    denom += (*out)[i];
  }
  for (double& v : *out) v /= denom;

  Tape* tape = joint_tape("softmax", {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::int64_t a_node = a.node();
    backward = [=](Tape& t, const std::vector<double>& g) {
      const auto& y = *out;
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += g[i] * y[i];
      std::vector<double> ga(y.size());
      for (std::size_t i = 0; i < y.size(); ++i) ga[i] = y[i] * (g[i] - dot);
      t.accumulate(a_node, ga);
    };
  }
  return make_result(tape, a.shape(), out, std::move(backward));
}

Tensor sum(const Tensor& a) {
  double s = std::accumulate(a.values().begin(), a.values().end(), 0.0);
  Tape* tape = joint_tape("sum", {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::int64_t a_node = a.node();
    std::size_t n = a.size();
    backward = [=](Tape& t, const std::vector<double>& g) {
      t.accumulate(a_node, std::vector<double>(n, g[0]));
    };
  }
  return make_result(tape, {1}, {s}, std::move(backward));
}

// ---- Structural ops ----------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) fail("concat", "no inputs");
  std::vector<double> out;
  std::vector<std::size_t> offsets;
  for (const Tensor& p : parts) {
    if (p.shape().size() != 1)
      fail("concat", "expected 1-D tensors, got " + shape_str(p.shape()));
    offsets.push_back(out.size());
    out.insert(out.end(), p.values().begin(), p.values().end());
  }
  Tape* tape = joint_tape("concat", parts);
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::vector<std::int64_t> nodes;
    std::vector<std::size_t> sizes;
    for (const Tensor& p : parts) {
      nodes.push_back(p.node());
      sizes.push_back(p.size());
    }
    backward = [=](Tape& t, const std::vector<double>& g) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] < 0) continue;
        std::vector<double> gp(g.begin() + static_cast<std::ptrdiff_t>(offsets[i]),
                               g.begin() + static_cast<std::ptrdiff_t>(offsets[i] + sizes[i]));
        t.accumulate(nodes[i], gp);
      }
    };
  }
  Shape shape{out.size()};
  return make_result(tape, std::move(shape), std::move(out), std::move(backward));
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) fail("stack_rows", "no inputs");
  std::size_t width = rows.front().size();
  std::vector<double> out;
  out.reserve(rows.size() * width);
  for (const Tensor& r : rows) {
    if (r.shape().size() != 1 || r.size() != width)
      fail("stack_rows", "rows must be 1-D of equal length, got " + shape_str(r.shape()));
    out.insert(out.end(), r.values().begin(), r.values().end());
  }
  Tape* tape = joint_tape("stack_rows", rows);
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::vector<std::int64_t> nodes;
    for (const Tensor& r : rows) nodes.push_back(r.node());
    backward = [=](Tape& t, const std::vector<double>& g) {
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i] < 0) continue;
        std::vector<double> gr(g.begin() + static_cast<std::ptrdiff_t>(i * width),
                               g.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
        t.accumulate(nodes[i], gr);
      }
    };
  }
  return make_result(tape, {rows.size(), width}, std::move(out), std::move(backward));
}

Tensor slice(const Tensor& a, std::size_t lo, std::size_t hi) {
  if (a.shape().size() != 1) fail("slice", "expected 1-D tensor, got " + shape_str(a.shape()));
  if (lo >= hi || hi > a.size())
    fail("slice", "range [" + std::to_string(lo) + ", " + std::to_string(hi) +
                      ") out of bounds for " + shape_str(a.shape()));
  std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(lo),
                          a.values().begin() + static_cast<std::ptrdiff_t>(hi));
  Tape* tape = joint_tape("slice", {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::int64_t a_node = a.node();
    backward = [=](Tape& t, const std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) t.accumulate_at(a_node, lo + i, g[i]);
    };
  }
  Shape shape{hi - lo};
  return make_result(tape, std::move(shape), std::move(out), std::move(backward));
}

Tensor row(const Tensor& a, std::size_t index) {
  if (a.shape().size() != 2) fail("row", "expected 2-D tensor, got " + shape_str(a.shape()));
  std::size_t rows = a.shape()[0], cols = a.shape()[1];
  if (index >= rows)
    fail("row", "row " + std::to_string(index) + " out of bounds for " + shape_str(a.shape()));
  std::vector<double> out(a.values().begin() + static_cast<std::ptrdiff_t>(index * cols),
                          a.values().begin() + static_cast<std::ptrdiff_t>((index + 1) * cols));
  Tape* tape = joint_tape("row", {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::int64_t a_node = a.node();
    backward = [=](Tape& t, const std::vector<double>& g) {
      for (std::size_t i = 0; i < g.size(); ++i) t.accumulate_at(a_node, index * cols + i, g[i]);
    };
  }
  Shape shape{cols};
  return make_result(tape, std::move(shape), std::move(out), std::move(backward));
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_nonempty_shape("reshape", shape);
  if (shape_size(shape) != a.size())
    fail("reshape", "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  Tape* tape = joint_tape("reshape", {&a});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    std::int64_t a_node = a.node();
    backward = [=](Tape& t, const std::vector<double>& g) { t.accumulate(a_node, g); };
  }
  return make_result(tape, std::move(shape), detail::TensorBuilder::buffer(a), std::move(backward));
}

// ---- Loss -------------------------------------------------------------------

Tensor cross_entropy_with_index(const Tensor& logits, std::size_t target_index) {
  if (logits.shape().size() != 1 || logits.size() == 0)
    fail("cross_entropy_with_index", "expected nonempty 1-D logits, got " + shape_str(logits.shape()));
  if (target_index >= logits.size())
    fail("cross_entropy_with_index",
         "target index " + std::to_string(target_index) + " out of range for " +
             shape_str(logits.shape()));
  const auto& x = logits.values();
  double mx = *std::max_element(x.begin(), x.end());
  double denom = 0.0;
  for (double v : x) denom += std::exp(v - mx);
  double lse = mx + std::log(denom);
  double loss = lse - x[target_index];

  Tape* tape = joint_tape("cross_entropy_with_index", {&logits});
  Tape::BackwardFn backward;
  if (tape != nullptr) {
    Tensor cx = logits;
    backward = [=](Tape& t, const std::vector<double>& g) {
      const auto& xv = cx.values();
      double m2 = *std::max_element(xv.begin(), xv.end());
      double d2 = 0.0;
      for (double v : xv) d2 += std::exp(v - m2);
      std::vector<double> ga(xv.size());
      for (std::size_t i = 0; i < xv.size(); ++i) ga[i] = g[0] * std::exp(xv[i] - m2) / d2;
      ga[target_index] -= g[0];
      t.accumulate(cx.node(), ga);
    };
  }
  return make_result(tape, {1}, {loss}, std::move(backward));
}

// ---- Finite differences -------------------------------------------------------

std::vector<Tensor> finite_difference_gradient(
    const std::function<double(const std::vector<Tensor>&)>& f,
    const std::vector<Tensor>& params, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("finite_difference_gradient: eps must be positive");
  std::vector<Tensor> grads;
  grads.reserve(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) {
    std::vector<double> g(params[p].size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      std::vector<Tensor> shifted = params;
      std::vector<double> plus = params[p].values();
      plus[i] += eps;
      shifted[p] = Tensor(params[p].shape(), std::move(plus));
      double f_plus = f(shifted);
      std::vector<double> minus = params[p].values();
      minus[i] -= eps;
      shifted[p] = Tensor(params[p].shape(), std::move(minus));
      double f_minus = f(shifted);
      g[i] = (f_plus - f_minus) / (2.0 * eps);
    }
    grads.emplace_back(params[p].shape(), std::move(g));
  }
  return grads;
}

}  // namespace cmnrec
