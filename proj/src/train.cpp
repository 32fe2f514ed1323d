#include "cmnrec/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "cmnrec/eval.hpp"
#include "cmnrec/rng.hpp"

namespace cmnrec {

void TrainConfig::validate() const {
  if (batch_size == 0) throw std::invalid_argument("train: batch_size must be >= 1");
  if (learning_rate < 0) throw std::invalid_argument("train: learning_rate must be >= 0");
  if (beta1 <= 0 || beta1 >= 1 || beta2 <= 0 || beta2 >= 1 || epsilon <= 0)
    throw std::invalid_argument("train: adam parameters out of range");
  if (max_epochs == 0) throw std::invalid_argument("train: max_epochs must be >= 1");
  if (threads == 0) throw std::invalid_argument("train: threads must be >= 1");
}

Tensor masked_xent(const std::vector<Tensor>& logits, const std::vector<std::size_t>& targets) {
  if (logits.size() != targets.size())
    throw std::invalid_argument("masked_xent: " + std::to_string(logits.size()) +
                                " logit rows vs " + std::to_string(targets.size()) + " targets");
  Tensor total;
  std::size_t valid = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    std::size_t target = targets[i];
    if (target == 0) continue;  // padding
    if (target > logits[i].size())
      throw std::invalid_argument("masked_xent: target " + std::to_string(target) +
                                  " outside vocabulary of " + std::to_string(logits[i].size()));
    Tensor term = cross_entropy_with_index(logits[i], target - 1);
    total = valid == 0 ? term : add(total, term);
    ++valid;
  }
  if (valid == 0) throw std::invalid_argument("masked_xent: all targets are padding");
  return scalar_scale(total, 1.0 / static_cast<double>(valid));
}

GradAccum zero_grads(const ModelParams& params) {
  GradAccum accum;
  params.for_each([&](const std::string&, const Tensor& t) {
    accum.emplace_back(t.size(), 0.0);
  });
  return accum;
}

double accumulate_gradients(const ModelConfig& config, const ModelParams& params,
                            const ItemSequence& sequence, double scale, GradAccum& accum) {
  Tape tape;
  ModelParams bound = bind_params(params, &tape);
  ForwardResult fwd = forward_sequence(config, bound, sequence.items);
  std::vector<std::size_t> targets(sequence.items.begin() + 1, sequence.items.end());
  Tensor loss = masked_xent(fwd.logits, targets);
  tape.backward(loss);

  std::size_t slot = 0;
  bound.for_each([&](const std::string&, Tensor& t) {
    Tensor g = tape.grad(t);
    auto& acc = accum[slot++];
    for (std::size_t i = 0; i < g.size(); ++i) acc[i] += scale * g[i];
  });
  return loss.item();
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState s;
  params.for_each([&](const std::string&, const Tensor& t) {
    s.first_moment.emplace_back(t.size(), 0.0);
    s.second_moment.emplace_back(t.size(), 0.0);
  });
  return s;
}

void adam_step(ModelParams& params, const GradAccum& grads, AdamState& state,
               const TrainConfig& config) {
  ++state.step;
  double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  std::size_t slot = 0;
  params.for_each([&](const std::string& name, Tensor& t) {
    const auto& g = grads.at(slot);
    auto& m = state.first_moment.at(slot);
    auto& v = state.second_moment.at(slot);
    ++slot;
    std::vector<double> updated = t.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i]))
        throw std::runtime_error("adam_step: non-finite gradient for parameter " + name);
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      double m_hat = m[i] / bc1;
      double v_hat = v[i] / bc2;
      updated[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
    t = Tensor(t.shape(), std::move(updated));
  });
}

namespace {

// One mini-batch: gradients averaged over the batch, one optimizer step.
// With several workers each accumulates privately; merging in worker order
// keeps results deterministic for a fixed thread count.
double run_batch(const ModelConfig& config, ModelParams& params, AdamState& adam,
                 const std::vector<ItemSequence>& data, const std::vector<std::size_t>& index,
                 std::size_t lo, std::size_t hi, const TrainConfig& tc) {
  std::size_t batch_n = hi - lo;
  double inv = 1.0 / static_cast<double>(batch_n);
  GradAccum accum = zero_grads(params);
  double loss_sum = 0.0;

  if (tc.threads <= 1 || batch_n == 1) {
    for (std::size_t i = lo; i < hi; ++i)
      loss_sum += accumulate_gradients(config, params, data[index[i]], inv, accum);
  } else {
    std::size_t workers = std::min(tc.threads, batch_n);
    std::vector<GradAccum> partial(workers);
    std::vector<double> partial_loss(workers, 0.0);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      partial[w] = zero_grads(params);
      pool.emplace_back([&, w]() {
        for (std::size_t i = lo + w; i < hi; i += workers)
          partial_loss[w] +=
              accumulate_gradients(config, params, data[index[i]], inv, partial[w]);
      });
    }
    for (auto& th : pool) th.join();
    for (std::size_t w = 0; w < workers; ++w) {
      loss_sum += partial_loss[w];
      for (std::size_t p = 0; p < accum.size(); ++p)
        for (std::size_t i = 0; i < accum[p].size(); ++i) accum[p][i] += partial[w][p][i];
    }
  }

  double batch_loss = loss_sum * inv;
  if (!std::isfinite(batch_loss))
    throw std::runtime_error("train: diverged (non-finite loss) at optimizer step " +
                             std::to_string(adam.step + 1));
  adam_step(params, accum, adam, tc);
  return batch_loss;
}

}  // namespace

TrainResult train(const Model& initial, const std::vector<ItemSequence>& train_set,
                  const std::vector<ItemSequence>& valid_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty() || valid_set.empty())
    throw std::invalid_argument("train: train and validation splits must be nonempty");

  Model model = initial;
  AdamState adam = AdamState::init(model.params);
  Rng rng(config.seed);

  TrainResult result;
  result.model = model;
  double best_ndcg = -1.0;
  std::size_t epochs_since_improvement = 0;

  std::vector<std::size_t> index(train_set.size());
  for (std::size_t i = 0; i < index.size(); ++i) index[i] = i;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(index);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t lo = 0; lo < index.size(); lo += config.batch_size) {
      std::size_t hi = std::min(lo + config.batch_size, index.size());
      loss_sum += run_batch(model.config, model.params, adam, train_set, index, lo, hi, config);
      ++batches;
    }

    MetricReport val = evaluate(model, valid_set, config.eval_top_n);
    auto t1 = std::chrono::steady_clock::now();

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(batches);
    stats.val_mrr = val.mrr;
    stats.val_hr = val.hr;
    stats.val_ndcg = val.ndcg;
    stats.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    result.history.push_back(stats);

    if (val.ndcg > best_ndcg) {
      best_ndcg = val.ndcg;
      result.model = model;
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
      if (epochs_since_improvement >= config.patience) break;
    }
  }
  return result;
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history file: " + path);
  out << "epoch,train_loss,val_mrr5,val_hr5,val_ndcg5,wall_seconds\n";
  for (const auto& e : history)
    out << e.epoch << ',' << e.train_loss << ',' << e.val_mrr << ',' << e.val_hr << ','
        << e.val_ndcg << ',' << e.wall_seconds << '\n';
}

}  // namespace cmnrec
