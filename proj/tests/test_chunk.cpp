#include "cmnrec/chunk.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "support.hpp"

using namespace cmnrec;
using cmnrec::testing::check_gradients;
using cmnrec::testing::random_tensor;

namespace {

// Independent TSC oracle: build segment lengths g*(M, M-1, ..., 1) from the
// end, dump the remainder into the first segment, emit cumulative ends.
std::vector<std::size_t> tsc_oracle(std::size_t T, std::size_t M) {
  std::size_t g = 2 * T / (M * (M + 1));
  std::vector<std::size_t> lengths(M);
  std::size_t used = 0;
  for (std::size_t r = 0; r < M; ++r) {
    lengths[r] = g * (M - r);  // first segment gets ratio M, last ratio 1
    used += lengths[r];
  }
  lengths[0] += T - used;
  std::vector<std::size_t> ends(M);
  std::size_t acc = 0;
  for (std::size_t r = 0; r < M; ++r) {
    acc += lengths[r];
    ends[r] = acc;
  }
  return ends;
}

}  // namespace

TEST_CASE("schedule goldens") {
  CHECK(make_schedule(20, 4, ChunkRule::kPec).times == std::vector<std::size_t>{5, 10, 15, 20});
  CHECK(make_schedule(20, 4, ChunkRule::kTsc).times == std::vector<std::size_t>{8, 14, 18, 20});
  CHECK(make_schedule(20, 4, ChunkRule::kExc).times ==
        std::vector<std::size_t>{17, 18, 19, 20});
  for (ChunkRule rule : {ChunkRule::kPec, ChunkRule::kTsc, ChunkRule::kExc})
    CHECK(make_schedule(10, 1, rule).times == std::vector<std::size_t>{10});
  CHECK(make_schedule(10, 10, ChunkRule::kPec).times ==
        make_schedule(10, 10, ChunkRule::kEveryStep).times);
  CHECK(make_schedule(50, 9, ChunkRule::kTsc).times == tsc_oracle(50, 9));
  CHECK(make_schedule(50, 9, ChunkRule::kTsc).times ==
        std::vector<std::size_t>{14, 22, 29, 35, 40, 44, 47, 49, 50});
  CHECK(make_schedule(3, 2, ChunkRule::kEveryStep).times == std::vector<std::size_t>{1, 2, 3});
}

TEST_CASE("schedule properties over the full grid") {
  for (std::size_t T = 5; T <= 120; ++T) {
    for (std::size_t M = 1; M <= std::min<std::size_t>(12, T); ++M) {
      for (ChunkRule rule : {ChunkRule::kPec, ChunkRule::kTsc, ChunkRule::kExc}) {
        if (rule == ChunkRule::kTsc && 2 * T < M * (M + 1)) {
          CHECK_THROWS_AS(make_schedule(T, M, rule), std::invalid_argument);
          continue;
        }
        ChunkSchedule s = make_schedule(T, M, rule);
        REQUIRE(s.times.size() == M);
        CHECK(s.times.front() >= 1);
        CHECK(s.times.back() == T);
        for (std::size_t i = 1; i < M; ++i) CHECK(s.times[i] > s.times[i - 1]);

        if (rule == ChunkRule::kPec && M >= 2) {
          std::size_t G = T / M;
          for (std::size_t i = 1; i < M; ++i) CHECK(s.times[i] - s.times[i - 1] == G);
          CHECK(s.times.front() == G + (T - M * G) + 0);  // first chunk absorbs the remainder
        }
        if (rule == ChunkRule::kTsc) {
          std::size_t g = 2 * T / (M * (M + 1));
          // gaps counted back from T are g, 2g, 3g, ...
          for (std::size_t i = M - 1; i >= 1; --i)
            CHECK(s.times[i] - s.times[i - 1] == g * (M - i));
          CHECK(s.times == tsc_oracle(T, M));
        }
        if (rule == ChunkRule::kExc) {
          for (std::size_t i = 1; i < M; ++i) CHECK(s.times[i] - s.times[i - 1] == 1);
        }
      }
    }
  }
}

TEST_CASE("schedule preconditions") {
  CHECK_THROWS_AS(make_schedule(10, 0, ChunkRule::kPec), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(4, 5, ChunkRule::kPec), std::invalid_argument);
  CHECK_THROWS_WITH_AS(make_schedule(5, 4, ChunkRule::kTsc), doctest::Contains("smaller M"),
                       std::invalid_argument);
}

TEST_CASE("rule names round-trip") {
  for (ChunkRule rule :
       {ChunkRule::kPec, ChunkRule::kTsc, ChunkRule::kExc, ChunkRule::kEveryStep})
    CHECK(parse_rule(rule_name(rule)) == rule);
  CHECK_THROWS(parse_rule("sometimes"));
  CHECK(make_schedule(20, 4, ChunkRule::kTsc).csv() == "8,14,18,20");
}

TEST_CASE("chunk area buffering") {
  ChunkArea area;
  CHECK(area.empty());
  area.push(Tensor::vector({1, 2}));
  area.push(Tensor::vector({3, 4}));
  REQUIRE(area.size() == 2);
  CHECK(area.entries()[0][0] == 1.0);
  CHECK(area.entries()[1][0] == 3.0);
  area.clear();
  CHECK(area.size() == 0);
}

TEST_CASE("attention pooling") {
  Rng rng(37);

  SUBCASE("a single buffered state passes through exactly") {
    AttentionParams p = AttentionParams::init(3, 4, 2, rng);
    ChunkArea area;
    Tensor h = random_tensor({4}, rng);
    area.push(h);
    Tensor a = attend(area, random_tensor({2}, rng), p);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == h[i]);
  }

  SUBCASE("identical entries collapse to that entry for any parameters") {
    AttentionParams p = AttentionParams::init(3, 4, 2, rng);
    ChunkArea area;
    Tensor h = random_tensor({4}, rng);
    for (int i = 0; i < 5; ++i) area.push(h);
    Tensor a = attend(area, random_tensor({2}, rng), p);
    for (std::size_t i = 0; i < 4; ++i) CHECK(a[i] == doctest::Approx(h[i]).epsilon(1e-12));
  }

  SUBCASE("two-entry hand example matches the scalar softmax oracle") {
    // b = 1, h = 2, m = 1 keeps the arithmetic readable
    AttentionParams p;
    p.W = Tensor({1, 2}, {0.5, -0.25});
    p.U = Tensor({1, 1}, {0.4});
    p.w = Tensor::vector({1.5});
    ChunkArea area;
    area.push(Tensor::vector({0.6, -0.2}));
    area.push(Tensor::vector({-0.3, 0.8}));
    Tensor r = Tensor::vector({0.5});
    Tensor a = attend(area, r, p);

    double s1 = 1.5 * std::tanh(0.5 * 0.6 - 0.25 * -0.2 + 0.4 * 0.5);
    double s2 = 1.5 * std::tanh(0.5 * -0.3 - 0.25 * 0.8 + 0.4 * 0.5);
    double m = std::max(s1, s2);
    double e1 = std::exp(s1 - m), e2 = std::exp(s2 - m);
    double a1 = e1 / (e1 + e2), a2 = e2 / (e1 + e2);
    CHECK(a[0] == doctest::Approx(a1 * 0.6 + a2 * -0.3).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(a1 * -0.2 + a2 * 0.8).epsilon(1e-14));
  }

  SUBCASE("output lies in the convex hull of the buffered states") {
    for (int trial = 0; trial < 20; ++trial) {
      AttentionParams p = AttentionParams::init(3, 4, 2, rng);
      ChunkArea area;
      std::size_t l = 2 + rng.below(4);
      for (std::size_t i = 0; i < l; ++i) area.push(random_tensor({4}, rng));
      Tensor a = attend(area, random_tensor({2}, rng), p);
      for (std::size_t d = 0; d < 4; ++d) {
        double lo = 1e300, hi = -1e300;
        for (const Tensor& c : area.entries()) {
          lo = std::min(lo, c[d]);
          hi = std::max(hi, c[d]);
        }
        CHECK(a[d] >= lo - 1e-9);
        CHECK(a[d] <= hi + 1e-9);
      }
    }
  }

  SUBCASE("empty area is a scheduler bug") {
    AttentionParams p = AttentionParams::init(3, 4, 2, rng);
    ChunkArea area;
    CHECK_THROWS_AS(attend(area, Tensor::zeros({2}), p), std::logic_error);
  }

  SUBCASE("gradients w.r.t. W, U, w match finite differences") {
    for (std::uint64_t trial = 0; trial < 5; ++trial) {
      AttentionParams init = AttentionParams::init(3, 4, 2, rng);
      std::vector<Tensor> entries = {random_tensor({4}, rng), random_tensor({4}, rng),
                                     random_tensor({4}, rng)};
      Tensor r = random_tensor({2}, rng);
      Tensor weights = random_tensor({4}, rng);
      auto loss = [&](const std::vector<Tensor>& p) {
        AttentionParams ap{p[0], p[1], p[2]};
        ChunkArea area;
        for (std::size_t e = 3; e < p.size(); ++e) area.push(p[e]);
        return sum(multiply(attend(area, r, ap), weights));
      };
      auto result = check_gradients(
          loss, {init.W, init.U, init.w, entries[0], entries[1], entries[2]});
      CHECK_MESSAGE(result.ok, "trial ", trial, ": worst rel error ", result.worst, " at ",
                    result.where);
    }
  }
}
