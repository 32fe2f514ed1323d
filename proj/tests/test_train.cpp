#include "cmnrec/train.hpp"

#include <doctest.h>

#include <cmath>

#include "support.hpp"

using namespace cmnrec;
using cmnrec::testing::random_tensor;

namespace {

ModelConfig tiny_config(std::size_t T = 6) {
  ModelConfig c;
  c.item_count = 10;
  c.embedding_dim = 4;
  c.hidden_dim = 8;
  c.memory_slots = 2;
  c.slot_width = 4;
  c.attention_dim = 3;
  c.sequence_length = T;
  c.rule = ChunkRule::kTsc;
  c.variant = Variant::kCmnRec;
  return c;
}

}  // namespace

TEST_CASE("masked cross entropy") {
  SUBCASE("uniform logits over 4 items cost ln 4") {
    std::vector<Tensor> logits = {Tensor::zeros({4})};
    Tensor loss = masked_xent(logits, {3});
    CHECK(loss.item() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }
  SUBCASE("a spike on the target drives the loss to zero") {
    std::vector<Tensor> logits = {Tensor::vector({0, 60.0, 0, 0})};
    Tensor loss = masked_xent(logits, {2});
    CHECK(loss.item() < 1e-9);
  }
  SUBCASE("padded steps are excluded from the mean") {
    // two steps, first target padded: the loss is exactly the second step's
    // cross entropy, worked by hand
    std::vector<Tensor> logits = {Tensor::vector({5.0, -5.0, 0.0}),
                                  Tensor::vector({0.2, 0.7, -0.4})};
    Tensor loss = masked_xent(logits, {0, 2});
    double e1 = std::exp(0.2), e2 = std::exp(0.7), e3 = std::exp(-0.4);
    double expected = -std::log(e2 / (e1 + e2 + e3));
    CHECK(loss.item() == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("all-padding targets are an error") {
    std::vector<Tensor> logits = {Tensor::zeros({4}), Tensor::zeros({4})};
    CHECK_THROWS_AS(masked_xent(logits, {0, 0}), std::invalid_argument);
  }
  SUBCASE("target outside the vocabulary is an error") {
    std::vector<Tensor> logits = {Tensor::zeros({4})};
    CHECK_THROWS_AS(masked_xent(logits, {5}), std::invalid_argument);
  }
}

TEST_CASE("adam updates") {
  TrainConfig tc;
  tc.learning_rate = 0.1;

  SUBCASE("zero gradient leaves parameters unchanged") {
    Model m = Model::init(tiny_config(), 1);
    AdamState state = AdamState::init(m.params);
    GradAccum zeros = zero_grads(m.params);
    std::vector<double> before = m.params.lstm.W_f.values();
    adam_step(m.params, zeros, state, tc);
    adam_step(m.params, zeros, state, tc);
    CHECK(m.params.lstm.W_f.values() == before);
    CHECK(state.step == 2);
  }

  SUBCASE("constant gradient approaches a learning-rate-sized step") {
    Model m = Model::init(tiny_config(), 1);
    AdamState state = AdamState::init(m.params);
    GradAccum grads = zero_grads(m.params);
    for (auto& g : grads)
      for (auto& x : g) x = 0.25;
    double prev = m.params.lstm.b_i[0];
    for (int step = 0; step < 400; ++step) {
      adam_step(m.params, grads, state, tc);
      double cur = m.params.lstm.b_i[0];
      if (step > 300) CHECK(prev - cur == doctest::Approx(tc.learning_rate).epsilon(1e-3));
      prev = cur;
    }
  }

  SUBCASE("two hand-computed scalar steps") {
    // single scalar parameter p = 1, gradient 0.5 both steps
    Model m = Model::init(tiny_config(), 1);
    // drive just one coordinate; everything else keeps zero gradients
    GradAccum grads = zero_grads(m.params);
    std::size_t slot = 0, bias_slot = 0;
    m.params.for_each([&](const std::string& name, Tensor&) {
      if (name == "lstm.b_i") bias_slot = slot;
      ++slot;
    });
    grads[bias_slot][0] = 0.5;
    AdamState state = AdamState::init(m.params);

    double p = m.params.lstm.b_i[0];
    double g = 0.5, m1 = 0, v1 = 0;
    for (int step = 1; step <= 2; ++step) {
      adam_step(m.params, grads, state, tc);
      m1 = 0.9 * m1 + 0.1 * g;
      v1 = 0.999 * v1 + 0.001 * g * g;
      double m_hat = m1 / (1 - std::pow(0.9, step));
      double v_hat = v1 / (1 - std::pow(0.999, step));
      p -= 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8);
      CHECK(m.params.lstm.b_i[0] == doctest::Approx(p).epsilon(1e-14));
    }
  }

  SUBCASE("non-finite gradient aborts with the parameter name") {
    Model m = Model::init(tiny_config(), 1);
    AdamState state = AdamState::init(m.params);
    GradAccum grads = zero_grads(m.params);
    grads[0][0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(adam_step(m.params, grads, state, tc),
                         doctest::Contains("embedding.weights"), std::runtime_error);
  }
}

TEST_CASE("training") {
  ModelConfig cfg = tiny_config(6);
  std::vector<ItemSequence> data;
  for (int i = 0; i < 8; ++i)
    data.push_back(ItemSequence::from_items({1, 2, 3, 4, 5, 6}));  // one pattern, repeated

  SUBCASE("loss strictly decreases on a repeated sequence") {
    TrainConfig tc;
    tc.max_epochs = 5;
    tc.patience = 10;
    tc.seed = 3;
    Model m = Model::init(cfg, 3);
    TrainResult r = train(m, data, data, tc);
    REQUIRE(r.history.size() == 5);
    for (std::size_t e = 1; e < r.history.size(); ++e)
      CHECK(r.history[e].train_loss < r.history[e - 1].train_loss);
  }

  SUBCASE("zero learning rate leaves parameters fixed") {
    TrainConfig tc;
    tc.max_epochs = 2;
    tc.learning_rate = 0.0;
    Model m = Model::init(cfg, 3);
    std::vector<double> before = m.params.output_weight.values();
    TrainResult r = train(m, data, data, tc);
    CHECK(r.model.params.output_weight.values() == before);
  }

  SUBCASE("fixed seed reproduces the history exactly") {
    TrainConfig tc;
    tc.max_epochs = 3;
    tc.seed = 17;
    Model m = Model::init(cfg, 17);
    TrainResult a = train(m, data, data, tc);
    TrainResult b = train(m, data, data, tc);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t e = 0; e < a.history.size(); ++e) {
      CHECK(a.history[e].train_loss == b.history[e].train_loss);
      CHECK(a.history[e].val_ndcg == b.history[e].val_ndcg);
    }
  }

  SUBCASE("untrained loss is near ln(item_count)") {
    Model m = Model::init(cfg, 5);
    GradAccum accum = zero_grads(m.params);
    double loss = accumulate_gradients(cfg, m.params, data[0], 1.0, accum);
    CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(0.05));
  }

  SUBCASE("empty splits rejected") {
    TrainConfig tc;
    Model m = Model::init(cfg, 1);
    CHECK_THROWS(train(m, {}, data, tc));
    CHECK_THROWS(train(m, data, {}, tc));
  }

  SUBCASE("two gradient workers match the single-threaded result") {
    TrainConfig tc;
    tc.max_epochs = 2;
    tc.seed = 9;
    tc.batch_size = 4;
    Model m = Model::init(cfg, 9);
    TrainResult serial = train(m, data, data, tc);
    tc.threads = 2;
    TrainResult parallel = train(m, data, data, tc);
    for (std::size_t e = 0; e < serial.history.size(); ++e)
      CHECK(serial.history[e].train_loss ==
            doctest::Approx(parallel.history[e].train_loss).epsilon(1e-12));
  }
}
