#include "cmnrec/controller.hpp"

#include <stdexcept>
#include <string>

namespace cmnrec {

namespace {

constexpr double kInitRange = 0.08;

Tensor uniform_tensor(Shape shape, Rng& rng) {
  std::vector<double> v(shape_size(shape));
  for (double& x : v) x = rng.uniform(-kInitRange, kInitRange);
  return Tensor(std::move(shape), std::move(v));
}

}  // namespace

EmbeddingTable EmbeddingTable::init(std::size_t item_count, std::size_t dim, Rng& rng) {
  if (item_count == 0 || dim == 0)
    throw std::invalid_argument("embedding: item count and dim must be positive");
  std::vector<double> v((item_count + 1) * dim);
  for (std::size_t i = dim; i < v.size(); ++i) v[i] = rng.uniform(-kInitRange, kInitRange);
  // row 0 (padding) stays zero
  return EmbeddingTable{item_count, dim, Tensor({item_count + 1, dim}, std::move(v))};
}

Tensor embed(const EmbeddingTable& table, std::size_t item_id) {
  if (item_id > table.item_count)
    throw std::out_of_range("embed: item id " + std::to_string(item_id) +
                            " outside vocabulary of " + std::to_string(table.item_count));
  if (item_id == 0) return Tensor::zeros({table.dim});
  return row(table.weights, item_id);
}

LstmParams LstmParams::init(std::size_t hidden, std::size_t input_width, Rng& rng) {
  if (hidden == 0 || input_width == 0)
    throw std::invalid_argument("lstm: hidden and input width must be positive");
  LstmParams p;
  p.U_f = uniform_tensor({hidden, hidden}, rng);
  p.U_i = uniform_tensor({hidden, hidden}, rng);
  p.U_z = uniform_tensor({hidden, hidden}, rng);
  p.U_o = uniform_tensor({hidden, hidden}, rng);
  p.W_f = uniform_tensor({hidden, input_width}, rng);
  p.W_i = uniform_tensor({hidden, input_width}, rng);
  p.W_z = uniform_tensor({hidden, input_width}, rng);
  p.W_o = uniform_tensor({hidden, input_width}, rng);
  p.b_f = Tensor::full({hidden}, 1.0);  // forget gate starts open
  p.b_i = Tensor::zeros({hidden});
  p.b_z = Tensor::zeros({hidden});
  p.b_o = Tensor::zeros({hidden});
  return p;
}

ControllerState ControllerState::zero(std::size_t hidden) {
  return ControllerState{Tensor::zeros({hidden}), Tensor::zeros({hidden})};
}

ControllerStepResult controller_step(const LstmParams& params, const Tensor& item_embedding,
                                     const Tensor* read_prev, const ControllerState& state,
                                     const Tensor* recurrent_override) {
  Tensor x = read_prev != nullptr ? concat({item_embedding, *read_prev}) : item_embedding;
  if (x.size() != params.input_width())
    throw std::invalid_argument("controller_step: input width " + std::to_string(x.size()) +
                                " does not match parameters " +
                                std::to_string(params.input_width()));
  const Tensor& h = recurrent_override != nullptr ? *recurrent_override : state.h;
  if (h.size() != params.hidden_size())
    throw std::invalid_argument("controller_step: recurrent input size " +
                                std::to_string(h.size()) + " does not match hidden size " +
                                std::to_string(params.hidden_size()));

  auto gate = [&](const Tensor& U, const Tensor& W, const Tensor& b) {
    return add(add(matmul(U, h), matmul(W, x)), b);
  };
  Tensor f = sigmoid(gate(params.U_f, params.W_f, params.b_f));
  Tensor i = sigmoid(gate(params.U_i, params.W_i, params.b_i));
  Tensor z = tanh(gate(params.U_z, params.W_z, params.b_z));
  Tensor o = tanh(gate(params.U_o, params.W_o, params.b_o));

  Tensor c_next = add(multiply(f, state.c), multiply(i, z));
  Tensor h_next = multiply(o, tanh(c_next));
  return ControllerStepResult{h_next, ControllerState{h_next, c_next}};
}

}  // namespace cmnrec
