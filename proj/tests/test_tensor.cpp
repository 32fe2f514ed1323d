#include "cmnrec/tensor.hpp"

#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace cmnrec;
using cmnrec::testing::check_gradients;
using cmnrec::testing::random_tensor;

TEST_CASE("tensor creation validates shape and values") {
  CHECK_THROWS(Tensor({2}, {1.0}));
  CHECK_THROWS(Tensor({2}, {1.0, std::nan("")}));
  CHECK_THROWS(Tensor({0}, {}));
  Tensor t({2, 2}, {1, 2, 3, 4});
  CHECK(t.size() == 4);
  CHECK(t[3] == 4.0);
}

TEST_CASE("forward goldens") {
  SUBCASE("softmax of equal logits is uniform") {
    Tensor s = softmax(Tensor::vector({0, 0}));
    CHECK(s[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(s[1] == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("tanh at zero") {
    Tensor y = tanh(Tensor::vector({0}));
    CHECK(y[0] == 0.0);
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({0}));
    Tensor out = sum(tanh(x));
    tape.backward(out);
    CHECK(tape.grad(x)[0] == doctest::Approx(1.0));
  }
  SUBCASE("matmul hand arithmetic") {
    Tensor y = matmul(Tensor({2, 2}, {1, 2, 3, 4}), Tensor({2, 1}, {1, 1}));
    CHECK(y.shape() == Shape{2, 1});
    CHECK(y[0] == 3.0);
    CHECK(y[1] == 7.0);
  }
  SUBCASE("matvec and vecmat") {
    Tensor A({2, 3}, {1, 2, 3, 4, 5, 6});
    Tensor mv = matmul(A, Tensor::vector({1, 1, 1}));
    CHECK(mv.shape() == Shape{2});
    CHECK(mv[0] == 6.0);
    CHECK(mv[1] == 15.0);
    Tensor vm = matmul(Tensor::vector({1, 1}), A);
    CHECK(vm.shape() == Shape{3});
    CHECK(vm[0] == 5.0);
    CHECK(vm[2] == 9.0);
  }
}

TEST_CASE("shape errors name the op and shapes") {
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({3}, {1, 2, 3});
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("matmul"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(add(b, Tensor::vector({1, 2})), doctest::Contains("add"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(softmax(a), doctest::Contains("softmax"), std::invalid_argument);
}

TEST_CASE("backward basics") {
  SUBCASE("sum of squares") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({1, 2}));
    Tensor loss = sum(multiply(x, x));
    tape.backward(loss);
    Tensor g = tape.grad(x);
    CHECK(g[0] == doctest::Approx(2.0));
    CHECK(g[1] == doctest::Approx(4.0));
  }
  SUBCASE("unreachable leaf gets zero gradient") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({1, 2}));
    Tensor p = tape.leaf(Tensor::vector({3}));
    Tensor loss = sum(x);
    tape.backward(loss);
    CHECK(tape.grad(p)[0] == 0.0);
  }
  SUBCASE("non-scalar loss rejected") {
    Tape tape;
    Tensor x = tape.leaf(Tensor::vector({1, 2}));
    CHECK_THROWS_AS(tape.backward(x), std::invalid_argument);
  }
  SUBCASE("random 3-layer composition matches finite differences") {
    Rng rng(7);
    for (int trial = 0; trial < 10; ++trial) {
      Tensor w1 = random_tensor({3, 4}, rng);
      Tensor w2 = random_tensor({2, 3}, rng);
      Tensor x = random_tensor({4}, rng);
      auto loss = [&](const std::vector<Tensor>& p) {
        Tensor h1 = tanh(matmul(p[0], p[2]));
        Tensor h2 = sigmoid(matmul(p[1], h1));
        return sum(multiply(h2, h2));
      };
      auto r = check_gradients(loss, {w1, w2, x});
      CHECK_MESSAGE(r.ok, "worst rel error ", r.worst, " at ", r.where);
    }
  }
}

TEST_CASE("finite difference oracle sanity") {
  SUBCASE("d/dx x^2 at 3") {
    auto f = [](const std::vector<Tensor>& p) { return p[0].item() * p[0].item(); };
    auto g = finite_difference_gradient(f, {Tensor::scalar(3.0)}, 1e-5);
    CHECK(g[0][0] == doctest::Approx(6.0).epsilon(1e-6));
  }
  SUBCASE("constant function has zero gradient") {
    auto f = [](const std::vector<Tensor>&) { return 42.0; };
    auto g = finite_difference_gradient(f, {Tensor::vector({1, 2, 3})}, 1e-5);
    for (std::size_t i = 0; i < 3; ++i) CHECK(g[0][i] == 0.0);
  }
  SUBCASE("rejects non-positive eps") {
    auto f = [](const std::vector<Tensor>&) { return 0.0; };
    CHECK_THROWS(finite_difference_gradient(f, {Tensor::scalar(1.0)}, 0.0));
  }
}

// Gradient check of every primitive against central finite differences,
// 100 seeds each. Output coordinates are weighted by a fixed random vector so
// no direction is silently unchecked.
TEST_CASE("every primitive matches central finite differences over 100 seeds") {
  for (const cmnrec::testing::OpCase& op : cmnrec::testing::op_cases()) {
    CAPTURE(op.name);
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      Rng rng(seed * 977);
      std::vector<Tensor> inputs = op.gen(rng);
      Tensor probe_shape = op.apply(inputs);
      Tensor weights = random_tensor(probe_shape.shape(), rng);
      auto loss = [&](const std::vector<Tensor>& p) {
        return sum(multiply(op.apply(p), weights));
      };
      auto r = check_gradients(loss, inputs);
      REQUIRE_MESSAGE(r.ok, op.name, " seed ", seed, ": worst rel error ", r.worst, " at ",
                      r.where);
    }
  }
}

TEST_CASE("softmax outputs a probability simplex") {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor s = softmax(random_tensor({7}, rng, -5, 5));
    double total = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      CHECK(s[i] >= 0.0);
      total += s[i];
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("concat then slice round-trips bit-exactly") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor a = random_tensor({4}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor joined = concat({a, b});
    Tensor a2 = slice(joined, 0, 4);
    Tensor b2 = slice(joined, 4, 7);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a2[i] == a[i]);
    for (std::size_t i = 0; i < b.size(); ++i) CHECK(b2[i] == b[i]);
  }
}

TEST_CASE("tapes reject cross-tape inputs") {
  Tape t1, t2;
  Tensor a = t1.leaf(Tensor::vector({1}));
  Tensor b = t2.leaf(Tensor::vector({2}));
  CHECK_THROWS(add(a, b));
}
