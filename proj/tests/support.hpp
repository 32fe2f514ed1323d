#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "cmnrec/rng.hpp"
#include "cmnrec/tensor.hpp"

namespace cmnrec::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor(std::move(shape), std::move(v));
}

/// Relative error with denominator max(1, |reference|).
inline double rel_error(double value, double reference) {
  return std::abs(value - reference) / std::max(1.0, std::abs(reference));
}

struct GradCheckResult {
  bool ok = true;
  double worst = 0.0;
  std::string where;
};

/// One differentiable primitive with a generator for valid random inputs.
struct OpCase {
  std::string name;
  std::function<std::vector<Tensor>(Rng&)> gen;
  std::function<Tensor(const std::vector<Tensor>&)> apply;
};

const std::vector<OpCase>& op_cases();

/// Compares tape gradients of loss(params) against central finite
/// differences. `loss` must treat its inputs as the only differentiable
/// leaves (tracked when they carry a tape).
inline GradCheckResult check_gradients(
    const std::function<Tensor(const std::vector<Tensor>&)>& loss,
    const std::vector<Tensor>& params, double eps = 1e-5, double tol = 1e-4) {
  Tape tape;
  std::vector<Tensor> bound;
  bound.reserve(params.size());
  for (const Tensor& p : params) bound.push_back(tape.leaf(p));
  Tensor out = loss(bound);
  tape.backward(out);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : bound) analytic.push_back(tape.grad(p));

  std::vector<Tensor> fd = finite_difference_gradient(
      [&](const std::vector<Tensor>& xs) { return loss(xs).item(); }, params, eps);

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params[p].size(); ++i) {
      double err = rel_error(fd[p][i], analytic[p][i]);
      if (err > result.worst) {
        result.worst = err;
        result.where = "param " + std::to_string(p) + "[" + std::to_string(i) + "]";
      }
    }
  }
  result.ok = result.worst <= tol;
  return result;
}

inline const std::vector<OpCase>& op_cases() {
  static const std::vector<OpCase> cases = {
      {"add",
       [](Rng& rng) { return std::vector<Tensor>{random_tensor({4}, rng), random_tensor({4}, rng)}; },
       [](const std::vector<Tensor>& p) { return add(p[0], p[1]); }},
      {"add scalar broadcast",
       [](Rng& rng) { return std::vector<Tensor>{random_tensor({4}, rng), random_tensor({1}, rng)}; },
       [](const std::vector<Tensor>& p) { return add(p[0], p[1]); }},
      {"add row broadcast",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({3, 4}, rng), random_tensor({4}, rng)};
       },
       [](const std::vector<Tensor>& p) { return add(p[0], p[1]); }},
      {"subtract",
       [](Rng& rng) { return std::vector<Tensor>{random_tensor({4}, rng), random_tensor({4}, rng)}; },
       [](const std::vector<Tensor>& p) { return subtract(p[0], p[1]); }},
      {"multiply",
       [](Rng& rng) { return std::vector<Tensor>{random_tensor({4}, rng), random_tensor({4}, rng)}; },
       [](const std::vector<Tensor>& p) { return multiply(p[0], p[1]); }},
      {"multiply scalar broadcast",
       [](Rng& rng) { return std::vector<Tensor>{random_tensor({1}, rng), random_tensor({5}, rng)}; },
       [](const std::vector<Tensor>& p) { return multiply(p[0], p[1]); }},
      {"divide",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({4}, rng), random_tensor({4}, rng, 0.5, 1.5)};
       },
       [](const std::vector<Tensor>& p) { return divide(p[0], p[1]); }},
      {"matmul",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({2, 3}, rng), random_tensor({3, 4}, rng)};
       },
       [](const std::vector<Tensor>& p) { return matmul(p[0], p[1]); }},
      {"matmul matvec",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({3, 4}, rng), random_tensor({4}, rng)};
       },
       [](const std::vector<Tensor>& p) { return matmul(p[0], p[1]); }},
      {"matmul vecmat",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({3}, rng), random_tensor({3, 4}, rng)};
       },
       [](const std::vector<Tensor>& p) { return matmul(p[0], p[1]); }},
      {"transpose", [](Rng& rng) { return std::vector<Tensor>{random_tensor({3, 2}, rng)}; },
       [](const std::vector<Tensor>& p) { return transpose(p[0]); }},
      {"tanh", [](Rng& rng) { return std::vector<Tensor>{random_tensor({5}, rng, -2, 2)}; },
       [](const std::vector<Tensor>& p) { return tanh(p[0]); }},
      {"sigmoid", [](Rng& rng) { return std::vector<Tensor>{random_tensor({5}, rng, -2, 2)}; },
       [](const std::vector<Tensor>& p) { return sigmoid(p[0]); }},
      {"softplus", [](Rng& rng) { return std::vector<Tensor>{random_tensor({5}, rng, -2, 2)}; },
       [](const std::vector<Tensor>& p) { return softplus(p[0]); }},
      {"sqrt", [](Rng& rng) { return std::vector<Tensor>{random_tensor({5}, rng, 0.1, 2.0)}; },
       [](const std::vector<Tensor>& p) { return sqrt(p[0]); }},
      {"softmax", [](Rng& rng) { return std::vector<Tensor>{random_tensor({6}, rng, -2, 2)}; },
       [](const std::vector<Tensor>& p) { return softmax(p[0]); }},
      {"scalar_scale", [](Rng& rng) { return std::vector<Tensor>{random_tensor({5}, rng)}; },
       [](const std::vector<Tensor>& p) { return scalar_scale(p[0], 1.7); }},
      {"sum", [](Rng& rng) { return std::vector<Tensor>{random_tensor({2, 3}, rng)}; },
       [](const std::vector<Tensor>& p) { return sum(p[0]); }},
      {"concat",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({3}, rng), random_tensor({2}, rng)};
       },
       [](const std::vector<Tensor>& p) { return concat({p[0], p[1]}); }},
      {"stack_rows",
       [](Rng& rng) {
         return std::vector<Tensor>{random_tensor({3}, rng), random_tensor({3}, rng)};
       },
       [](const std::vector<Tensor>& p) { return stack_rows({p[0], p[1]}); }},
      {"slice", [](Rng& rng) { return std::vector<Tensor>{random_tensor({6}, rng)}; },
       [](const std::vector<Tensor>& p) { return slice(p[0], 1, 4); }},
      {"row", [](Rng& rng) { return std::vector<Tensor>{random_tensor({3, 4}, rng)}; },
       [](const std::vector<Tensor>& p) { return row(p[0], 1); }},
      {"reshape", [](Rng& rng) { return std::vector<Tensor>{random_tensor({6}, rng)}; },
       [](const std::vector<Tensor>& p) { return reshape(p[0], {2, 3}); }},
      {"cross_entropy_with_index",
       [](Rng& rng) { return std::vector<Tensor>{random_tensor({6}, rng, -2, 2)}; },
       [](const std::vector<Tensor>& p) { return cross_entropy_with_index(p[0], 2); }},
  };
  return cases;
}

}  // namespace cmnrec::testing
