#pragma once

#include <cstdint>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/diffcore/params.hpp"

namespace flowgrpo {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::vector<DenseArray> first_moment;
  std::vector<DenseArray> second_moment;
  std::uint64_t step = 0;

  // Zero moments shaped like params.
  static AdamState for_params(const ParamSet& params, AdamConfig config);
};

// One bias-corrected Adam step using the gradients stored in params. Throws
// NumericError (and leaves everything untouched) if any gradient is non-finite.
void adam_update(ParamSet& params, AdamState& state);

double global_grad_norm(const ParamSet& params) noexcept;

// Rescales all gradients so their joint L2 norm is at most max_norm. Returns the
// norm before clipping.
double clip_global_norm(ParamSet& params, double max_norm);

}  // namespace flowgrpo
