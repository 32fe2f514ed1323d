#pragma once

#include <cstddef>
#include <optional>

#include "cmnrec/rng.hpp"
#include "cmnrec/tensor.hpp"

namespace cmnrec {

/// Item embeddings, (item_count + 1) x dim. Row 0 is the padding item: always
/// zero and never touched by gradients (lookups of id 0 return a constant).
struct EmbeddingTable {
  std::size_t item_count = 0;
  std::size_t dim = 0;
  Tensor weights;

  static EmbeddingTable init(std::size_t item_count, std::size_t dim, Rng& rng);
};

/// Embedding lookup. id 0 yields an untracked zero vector; other rows come
/// from the (possibly tape-bound) table so gradients land on that row only.
Tensor embed(const EmbeddingTable& table, std::size_t item_id);

/// LSTM cell weights. Recurrent maps are hidden x hidden, input maps are
/// hidden x input_width where the step input is [v ; r_prev].
struct LstmParams {
  Tensor U_f, U_i, U_z, U_o;  // recurrent
  Tensor W_f, W_i, W_z, W_o;  // input
  Tensor b_f, b_i, b_z, b_o;

  static LstmParams init(std::size_t hidden, std::size_t input_width, Rng& rng);
  std::size_t hidden_size() const { return b_f.size(); }
  std::size_t input_width() const { return W_f.shape()[1]; }
};

struct ControllerState {
  Tensor h;
  Tensor c;

  static ControllerState zero(std::size_t hidden);
};

struct ControllerStepResult {
  Tensor output;  // equals the new hidden state
  ControllerState state;
};

/// One LSTM step on input [v ; r_prev] (r_prev omitted for the memoryless
/// baseline). `recurrent_override`, when present, replaces state.h as the
/// recurrent input — the chunk-time substitution of the attention output.
///
///   c' = sigma(U_f h + W_f x + b_f) .* c + sigma(U_i h + W_i x + b_i) .* tanh(U_z h + W_z x + b_z)
///   h' = tanh(U_o h + W_o x + b_o) .* tanh(c')
ControllerStepResult controller_step(const LstmParams& params, const Tensor& item_embedding,
                                     const Tensor* read_prev, const ControllerState& state,
                                     const Tensor* recurrent_override = nullptr);

}  // namespace cmnrec
