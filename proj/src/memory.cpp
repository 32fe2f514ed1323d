#include "cmnrec/memory.hpp"

#include <stdexcept>
#include <string>

namespace cmnrec {

namespace {

constexpr double kMemoryInitValue = 1e-6;
// Epsilons keep cosine (and its gradient) finite for zero keys or cells.
constexpr double kNormEps = 1e-16;   // inside the sqrt of each norm
constexpr double kDenomEps = 1e-8;   // added to the norm product

constexpr double kInitRange = 0.08;

// sqrt(sum of squares + eps) per row of a matrix, via ones-vector matmul so
// the whole thing stays on the tape.
Tensor row_norms(const Tensor& matrix) {
  std::size_t width = matrix.shape()[1];
  Tensor ones = Tensor::full({width}, 1.0);
  Tensor sq_sums = matmul(multiply(matrix, matrix), ones);
  return sqrt(add(sq_sums, Tensor::scalar(kNormEps)));
}

Tensor vector_norm(const Tensor& v) {
  return sqrt(add(sum(multiply(v, v)), Tensor::scalar(kNormEps)));
}

}  // namespace

Tensor initial_memory(std::size_t slots, std::size_t width) {
  if (slots == 0 || width == 0)
    throw std::invalid_argument("memory: slots and width must be positive");
  return Tensor::full({slots, width}, kMemoryInitValue);
}

InterfaceParams InterfaceParams::init(std::size_t hidden, std::size_t width, Rng& rng) {
  if (hidden == 0 || width == 0)
    throw std::invalid_argument("interface: hidden and width must be positive");
  std::size_t out = 4 * width + 2;
  std::vector<double> w(out * hidden);
  for (double& x : w) x = rng.uniform(-kInitRange, kInitRange);
  return InterfaceParams{Tensor({out, hidden}, std::move(w)), Tensor::zeros({out})};
}

MemoryInterface decode_interface(const InterfaceParams& params, const Tensor& controller_output,
                                 std::size_t width) {
  Tensor packed = add(matmul(params.weight, controller_output), params.bias);
  std::size_t expected = 4 * width + 2;
  if (packed.size() != expected)
    throw std::invalid_argument("decode_interface: packed vector " + shape_str(packed.shape()) +
                                " does not match slot width " + std::to_string(width));
  Tensor one = Tensor::scalar(1.0);
  MemoryInterface iface;
  std::size_t at = 0;
  iface.write_key = slice(packed, at, at + width); at += width;
  iface.write_strength = add(softplus(slice(packed, at, at + 1)), one); at += 1;
  iface.erase = sigmoid(slice(packed, at, at + width)); at += width;
  iface.add = slice(packed, at, at + width); at += width;
  iface.read_key = slice(packed, at, at + width); at += width;
  iface.read_strength = add(softplus(slice(packed, at, at + 1)), one);
  return iface;
}

Tensor content_address(const Tensor& key, const Tensor& strength, const Tensor& memory) {
  if (memory.shape().size() != 2)
    throw std::invalid_argument("content_address: memory must be 2-D, got " +
                                shape_str(memory.shape()));
  if (key.shape().size() != 1 || key.size() != memory.shape()[1])
    throw std::invalid_argument("content_address: key " + shape_str(key.shape()) +
                                " does not match memory " + shape_str(memory.shape()));
  if (strength.item() <= 0.0)
    throw std::invalid_argument("content_address: strength must be positive");
  Tensor dots = matmul(memory, key);  // slots
  Tensor denom = add(multiply(row_norms(memory), vector_norm(key)), Tensor::scalar(kDenomEps));
  Tensor cosine_scores = divide(dots, denom);
  return softmax(multiply(cosine_scores, strength));
}

Tensor memory_write(const MemoryInterface& iface, const Tensor& memory) {
  std::size_t slots = memory.shape()[0];
  std::size_t width = memory.shape()[1];
  Tensor w = content_address(iface.write_key, iface.write_strength, memory);
  Tensor w_col = reshape(w, {slots, 1});
  Tensor erase_outer = matmul(w_col, reshape(iface.erase, {1, width}));
  Tensor add_outer = matmul(w_col, reshape(iface.add, {1, width}));
  Tensor keep = subtract(Tensor::full({slots, width}, 1.0), erase_outer);
  return add(multiply(memory, keep), add_outer);
}

Tensor memory_read(const MemoryInterface& iface, const Tensor& memory) {
  Tensor w = content_address(iface.read_key, iface.read_strength, memory);
  return matmul(w, memory);  // vector · matrix -> width
}

}  // namespace cmnrec
