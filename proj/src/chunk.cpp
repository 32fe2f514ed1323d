#include "cmnrec/chunk.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace cmnrec {

namespace {

constexpr double kInitRange = 0.08;

Tensor uniform_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-kInitRange, kInitRange);
  return Tensor(std::move(shape), std::move(v));
}

void validate_times(const ChunkSchedule& s, ChunkRule rule) {
  if (s.times.size() != s.slot_count)
    throw std::logic_error("make_schedule(" + rule_name(rule) + "): produced " +
                           std::to_string(s.times.size()) + " times for M = " +
                           std::to_string(s.slot_count));
  std::size_t prev = 0;
  for (std::size_t t : s.times) {
    if (t == 0)
      throw std::invalid_argument("make_schedule(" + rule_name(rule) +
                                  "): non-positive chunk time");
    if (t <= prev)
      throw std::invalid_argument("make_schedule(" + rule_name(rule) +
                                  "): duplicate or non-increasing chunk time " +
                                  std::to_string(t));
    prev = t;
  }
  if (s.times.back() != s.sequence_length)
    throw std::logic_error("make_schedule(" + rule_name(rule) + "): last chunk time " +
                           std::to_string(s.times.back()) + " != T");
}

}  // namespace

std::string rule_name(ChunkRule rule) {
  switch (rule) {
    case ChunkRule::kPec: return "pec";
    case ChunkRule::kTsc: return "tsc";
    case ChunkRule::kExc: return "exc";
    case ChunkRule::kEveryStep: return "every-step";
  }
  return "?";
}

ChunkRule parse_rule(const std::string& name) {
  if (name == "pec") return ChunkRule::kPec;
  if (name == "tsc") return ChunkRule::kTsc;
  if (name == "exc") return ChunkRule::kExc;
  if (name == "every-step" || name == "every_step") return ChunkRule::kEveryStep;
  throw std::invalid_argument("unknown chunk rule '" + name +
                              "' (expected pec, tsc, exc or every-step)");
}

bool ChunkSchedule::contains(std::size_t step) const {
  return std::binary_search(times.begin(), times.end(), step);
}

std::string ChunkSchedule::csv() const {
  std::ostringstream os;
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i) os << ',';
    os << times[i];
  }
  return os.str();
}

ChunkSchedule make_schedule(std::size_t sequence_length, std::size_t slot_count, ChunkRule rule) {
  const std::size_t T = sequence_length;
  const std::size_t M = slot_count;
  if (M == 0 || T == 0 || M > T)
    throw std::invalid_argument("make_schedule: need 1 <= M <= T, got M = " + std::to_string(M) +
                                ", T = " + std::to_string(T));

  ChunkSchedule s{T, M, {}};
  switch (rule) {
    case ChunkRule::kEveryStep: {
      s.slot_count = T;
      s.times.resize(T);
      for (std::size_t i = 0; i < T; ++i) s.times[i] = i + 1;
      break;
    }
    case ChunkRule::kPec: {
      // chunk cycle G = floor(T/M); times T-(M-1)G, ..., T-G, T.
      std::size_t G = T / M;
      s.times.resize(M);
      for (std::size_t r = 0; r < M; ++r) s.times[r] = T - (M - 1 - r) * G;
      break;
    }
    case ChunkRule::kTsc: {
      // Proportional step g = floor(2T / (M(M+1))). Counting back from T the
      // gaps are g, 2g, ..., (M-1)g; the first chunk absorbs the remainder.
      std::size_t g = 2 * T / (M * (M + 1));
      if (g == 0)
        throw std::invalid_argument(
            "make_schedule(tsc): degenerate schedule, 2T < M(M+1); use a smaller M (T = " +
            std::to_string(T) + ", M = " + std::to_string(M) + ")");
      s.times.resize(M);
      for (std::size_t r = 0; r < M; ++r) {
        std::size_t back = M - 1 - r;  // T - g * back(back+1)/2
        s.times[r] = T - g * back * (back + 1) / 2;
      }
      break;
    }
    case ChunkRule::kExc: {
      // first T-M+1 items form one chunk, the rest are singletons
      s.times.resize(M);
      for (std::size_t r = 0; r < M; ++r) s.times[r] = T - (M - 1 - r);
      break;
    }
  }
  validate_times(s, rule);
  return s;
}

AttentionParams AttentionParams::init(std::size_t attention_dim, std::size_t hidden,
                                      std::size_t read_width, Rng& rng) {
  if (attention_dim == 0 || hidden == 0 || read_width == 0)
    throw std::invalid_argument("attention: dimensions must be positive");
  AttentionParams p;
  p.W = uniform_tensor({attention_dim, hidden}, rng);
  p.U = uniform_tensor({attention_dim, read_width}, rng);
  p.w = uniform_tensor({attention_dim}, rng);
  return p;
}

Tensor attend(const ChunkArea& area, const Tensor& read_prev, const AttentionParams& params) {
  if (area.empty())
    throw std::logic_error("attend: empty chunk area (chunk time with no buffered states)");
  Tensor C = stack_rows(area.entries());            // l x hidden
  Tensor projected = matmul(C, transpose(params.W));  // l x attention_dim
  Tensor context = matmul(params.U, read_prev);       // attention_dim
  Tensor scores = matmul(tanh(add(projected, context)), params.w);  // l
  Tensor weights = softmax(scores);
  return matmul(weights, C);  // hidden
}

}  // namespace cmnrec
