#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cmnrec/data.hpp"
#include "cmnrec/model.hpp"
#include "cmnrec/tensor.hpp"

namespace cmnrec {

struct TrainConfig {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t max_epochs = 50;
  std::size_t patience = 5;  // epochs without validation NDCG improvement
  std::uint64_t seed = 1;
  std::size_t threads = 1;  // batch-gradient workers; merge order is fixed
  std::size_t eval_top_n = 5;

  void validate() const;
};

/// Mean cross entropy over the non-padding targets x_{2..T}. logits[i] scores
/// ids 1..I for target targets[i]; targets equal to 0 are masked out. All
/// targets padding is an error.
Tensor masked_xent(const std::vector<Tensor>& logits, const std::vector<std::size_t>& targets);

/// Gradient buffers aligned with ModelParams::for_each order.
using GradAccum = std::vector<std::vector<double>>;

GradAccum zero_grads(const ModelParams& params);

/// Forward + backward for one sequence; adds scale * dLoss/dParam into accum.
/// Returns the sequence loss.
double accumulate_gradients(const ModelConfig& config, const ModelParams& params,
                            const ItemSequence& sequence, double scale, GradAccum& accum);

struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState init(const ModelParams& params);
};

/// Bias-corrected Adam update. Non-finite gradients abort with the parameter
/// name.
void adam_step(ModelParams& params, const GradAccum& grads, AdamState& state,
               const TrainConfig& config);

struct EpochStats {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_mrr = 0, val_hr = 0, val_ndcg = 0;
  double wall_seconds = 0;
};

struct TrainResult {
  Model model;  // best-validation parameters
  std::vector<EpochStats> history;
};

/// Shuffled mini-batch epochs with early stopping on validation NDCG@top_n.
TrainResult train(const Model& initial, const std::vector<ItemSequence>& train_set,
                  const std::vector<ItemSequence>& valid_set, const TrainConfig& config);

/// epoch,train_loss,val_mrr5,val_hr5,val_ndcg5,wall_seconds
void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);

}  // namespace cmnrec
