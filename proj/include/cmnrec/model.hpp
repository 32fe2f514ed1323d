#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "cmnrec/chunk.hpp"
#include "cmnrec/controller.hpp"
#include "cmnrec/data.hpp"
#include "cmnrec/memory.hpp"
#include "cmnrec/tensor.hpp"

namespace cmnrec {

enum class Variant {
  kCmnRec,        // chunked memory access per the configured rule
  kSrmnBaseline,  // memory access at every step (rule forced to every-step)
  kLstmBaseline   // plain LSTM, no external memory
};

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct ModelConfig {
  std::size_t item_count = 0;       // I
  std::size_t embedding_dim = 128;  // k
  std::size_t hidden_dim = 256;     // h
  std::size_t memory_slots = 4;     // n, one slot per chunk
  std::size_t slot_width = 256;     // m
  std::size_t attention_dim = 64;   // b
  std::size_t sequence_length = 0;  // T
  ChunkRule rule = ChunkRule::kTsc;
  Variant variant = Variant::kCmnRec;

  bool has_memory() const { return variant != Variant::kLstmBaseline; }
  /// True when the chunk machinery (area + attention + recompute) is active.
  bool uses_chunking() const { return has_memory() && rule != ChunkRule::kEveryStep; }
  std::size_t controller_input_width() const {
    return embedding_dim + (has_memory() ? slot_width : 0);
  }
  std::size_t output_input_width() const {
    return hidden_dim + (has_memory() ? slot_width : 0);
  }
  /// Throws on inconsistent combinations (e.g. SRMN with a chunk rule, or a
  /// degenerate TSC schedule).
  void validate() const;
};

struct ModelParams {
  EmbeddingTable embedding;
  LstmParams lstm;
  std::optional<InterfaceParams> interface_map;
  std::optional<AttentionParams> attention;
  Tensor output_weight;  // item_count x output_input_width
  Tensor output_bias;    // item_count

  /// Visits parameters in a fixed order shared by init, checkpointing, Adam
  /// state and gradient collection.
  void for_each(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each(const std::function<void(const std::string&, const Tensor&)>& fn) const;
};

struct StepCounters {
  std::size_t memory_reads = 0;
  std::size_t memory_writes = 0;
  std::size_t attention_calls = 0;
};

/// Test/analysis hook: adds `delta` to the item embedding or to the realized
/// hidden state at one step (1-based), before any downstream use.
struct StateInjection {
  enum class Site { kEmbedding, kHidden };
  Site site = Site::kHidden;
  std::size_t step = 0;
  std::vector<double> delta;
};

struct ForwardResult {
  /// Next-item logits over ids 1..I for steps 1..T-1 (row i predicts x_{i+2}).
  std::vector<Tensor> logits;
  StepCounters counters;
  std::vector<Tensor> step_embeddings;  // v_1..v_T
  std::vector<Tensor> step_hidden;      // realized h_1..h_T
};

struct Model {
  ModelConfig config;
  ModelParams params;

  static Model init(const ModelConfig& config, std::uint64_t seed);
};

/// Parameters re-registered as leaves of `tape` (pass nullptr for an
/// inference-only copy). Buffers are shared, not copied.
ModelParams bind_params(const ModelParams& params, Tape* tape);

/// Runs the full sequence (all T steps; memory ops follow the schedule, which
/// always includes step T). Logits are produced for steps 1..T-1.
ForwardResult forward_sequence(const ModelConfig& config, const ModelParams& bound,
                               const std::vector<std::size_t>& items,
                               const StateInjection* injection = nullptr);

/// Convenience for inference on the model's own (untracked) parameters.
ForwardResult forward_sequence(const Model& model, const std::vector<std::size_t>& items);

/// Argmax item id (1-based) over logits for ids 1..I; ties resolve to the
/// lowest id. Padding (id 0) is not a candidate.
std::size_t predict_next(const Tensor& logits);

void save_checkpoint(const std::string& path, const Model& model);
Model load_checkpoint(const std::string& path);

}  // namespace cmnrec
