#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/diffcore/params.hpp"
#include "flowgrpo/diffcore/rng.hpp"

namespace flowgrpo {

// Per-frame residual MLP with a mean-pooled context vector:
//
//   c      = mean_l x_l
//   h1_l   = tanh(W_in [x_l; c] + b_in)
//   h2_l   = h1_l + tanh(W_hid h1_l + b_hid)
//   out_l  = W_head h2_l + b_head
//
// Weights are shared across frames; the context gives every frame a view of the
// whole sequence (and hence of the prompt).
struct NetShape {
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 64;
  std::size_t output_dim = 0;

  friend bool operator==(const NetShape&, const NetShape&) = default;
};

inline constexpr const char* kInWeight = "in.weight";
inline constexpr const char* kInBias = "in.bias";
inline constexpr const char* kHiddenWeight = "hidden.weight";
inline constexpr const char* kHiddenBias = "hidden.bias";
inline constexpr const char* kHeadWeight = "head.weight";
inline constexpr const char* kHeadBias = "head.bias";

// Scaled-normal init for the body. The head is zero unless head_scale > 0, in which
// case it is drawn like the body and multiplied by head_scale.
ParamSet make_network(const NetShape& shape, RngStream& rng, double head_scale = 0.0);

NetShape network_shape(const ParamSet& params);

// Activations saved by net_forward for the matching net_backward call.
struct NetTape {
  const ParamSet* params = nullptr;
  std::uint64_t params_version = 0;
  DenseArray input;            // L x F
  std::vector<double> context; // F
  DenseArray hidden1;          // L x H, tanh outputs
  DenseArray hidden2_act;      // L x H, tanh(W_hid h1 + b_hid)
  DenseArray hidden2;          // L x H, h1 + hidden2_act
};

struct NetOutput {
  DenseArray head;  // L x output_dim
  NetTape tape;
};

NetOutput net_forward(const ParamSet& params, const DenseArray& input);

// Accumulates d(loss)/d(theta) into params' gradients given d(loss)/d(head) and returns
// d(loss)/d(input). Throws ContractError if params changed since the forward pass.
DenseArray net_backward(ParamSet& params, const NetTape& tape, const DenseArray& out_grad);

}  // namespace flowgrpo
