#pragma once

#include <cstddef>

#include "cmnrec/rng.hpp"
#include "cmnrec/tensor.hpp"

namespace cmnrec {

/// Fresh per-sequence memory matrix (slots x width), filled with a small
/// constant so cosine addressing is well defined from the first access.
Tensor initial_memory(std::size_t slots, std::size_t width);

/// Decoded memory-access commands for one step: one write head, one read head.
struct MemoryInterface {
  Tensor write_key;       // width
  Tensor write_strength;  // scalar > 0 (1 + softplus)
  Tensor erase;           // width, components in (0,1) (sigmoid)
  Tensor add;             // width
  Tensor read_key;        // width
  Tensor read_strength;   // scalar > 0
};

/// Linear map from the controller output to the packed interface vector of
/// 4*width + 2 reals: write key, write strength, erase, add, read key,
/// read strength.
struct InterfaceParams {
  Tensor weight;  // (4*width + 2) x hidden
  Tensor bias;    // 4*width + 2

  static InterfaceParams init(std::size_t hidden, std::size_t width, Rng& rng);
};

MemoryInterface decode_interface(const InterfaceParams& params, const Tensor& controller_output,
                                 std::size_t width);

/// Softmax over strength-scaled cosine similarity between the key and every
/// slot. Returns a probability simplex over slots.
Tensor content_address(const Tensor& key, const Tensor& strength, const Tensor& memory);

/// cells'[j] = cells[j] .* (1 - w_j * erase) + w_j * add, with w addressed by
/// the write key. Returns the new memory matrix.
Tensor memory_write(const MemoryInterface& iface, const Tensor& memory);

/// r = sum_j w_j * cells[j], with w addressed by the read key. Never mutates
/// the memory.
Tensor memory_read(const MemoryInterface& iface, const Tensor& memory);

}  // namespace cmnrec
