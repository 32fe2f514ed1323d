#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cmnrec/rng.hpp"
#include "cmnrec/tensor.hpp"

namespace cmnrec {

/// When memory operations happen along a length-T sequence.
///   kPec       periodic chunks of size floor(T/M)
///   kTsc       chunk lengths shrinking toward the end in ratio M:...:2:1
///   kExc       one large prefix chunk, then single-item chunks
///   kEveryStep memory access at every step (the unchunked baseline)
enum class ChunkRule { kPec, kTsc, kExc, kEveryStep };

std::string rule_name(ChunkRule rule);
ChunkRule parse_rule(const std::string& name);

/// Chunk times t_1 < t_2 < ... < t_M with t_M = T.
struct ChunkSchedule {
  std::size_t sequence_length = 0;
  std::size_t slot_count = 0;
  std::vector<std::size_t> times;  // 1-based steps

  bool contains(std::size_t step) const;
  std::string csv() const;  // "8,14,18,20"
};

/// Builds the schedule for (T, M, rule). Requires 1 <= M <= T; TSC further
/// requires proportional step g = floor(2T / (M(M+1))) >= 1 and reports a
/// degenerate-schedule error otherwise.
ChunkSchedule make_schedule(std::size_t sequence_length, std::size_t slot_count, ChunkRule rule);

/// Buffer of controller hidden states between consecutive chunk times.
class ChunkArea {
 public:
  void push(Tensor hidden) { entries_.push_back(std::move(hidden)); }
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<Tensor>& entries() const { return entries_; }

 private:
  std::vector<Tensor> entries_;
};

/// Attention pooling weights: scores_j = w . tanh(W c_j + U r_prev).
struct AttentionParams {
  Tensor W;  // attention_dim x hidden
  Tensor U;  // attention_dim x read_width
  Tensor w;  // attention_dim

  static AttentionParams init(std::size_t attention_dim, std::size_t hidden,
                              std::size_t read_width, Rng& rng);
};

/// Compresses a nonempty chunk area into one hidden-sized vector:
/// a = sum_j softmax(scores)_j * c_j. An empty area is a scheduler bug and
/// throws.
Tensor attend(const ChunkArea& area, const Tensor& read_prev, const AttentionParams& params);

}  // namespace cmnrec
