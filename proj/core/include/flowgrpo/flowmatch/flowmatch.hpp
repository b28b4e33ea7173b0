#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "flowgrpo/diffcore/adam.hpp"
#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/diffcore/network.hpp"
#include "flowgrpo/diffcore/params.hpp"
#include "flowgrpo/diffcore/rng.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

inline constexpr double kLogSigmaMin = -5.0;
inline constexpr double kLogSigmaMax = 2.0;

enum class HeadKind {
  Deterministic,  // head emits the velocity directly; trained with MSE
  Gaussian,       // head emits (mu, log sigma) per element; trained with Gaussian NLL
};

std::string_view to_string(HeadKind kind) noexcept;
HeadKind head_kind_from_string(std::string_view name);
std::size_t head_width(HeadKind kind, std::size_t frame_dim) noexcept;
// Infers the head kind from the network's output width.
HeadKind head_kind_of(const ParamSet& params, std::size_t frame_dim);

struct GaussianField {
  DenseArray mu;         // L x D
  DenseArray sigma;      // L x D, in [exp(-5), exp(2)]
  DenseArray log_sigma;  // L x D, clamped log of sigma
};

// (1 - t) x0 + t x1, elementwise.
DenseArray make_flow_input(const DenseArray& x0, const DenseArray& x1, double t);
// x1 - x0, elementwise.
DenseArray target_velocity(const DenseArray& x0, const DenseArray& x1);

// Splits an L x 2D head into mu (first D channels) and sigma = exp(clamp(raw, -5, 2)).
GaussianField head_split(const DenseArray& raw_head);

// Maps gradients w.r.t. mu and log sigma back onto the raw L x 2D head. The clamp has
// zero gradient outside (-5, 2).
DenseArray head_split_backward(const DenseArray& raw_head, const DenseArray& d_mu,
                               const DenseArray& d_log_sigma);

struct GaussianLoss {
  double value = 0.0;
  DenseArray d_mu;
  DenseArray d_log_sigma;
};

// Mean over masked frames and all dims of (mu - target)^2 / (2 sigma^2) + log sigma.
// The 0.5 log(2 pi) normalizer is deliberately absent.
GaussianLoss gaussian_nll_loss(const GaussianField& field, const DenseArray& target,
                               const FrameMask& mask);

struct MseLoss {
  double value = 0.0;
  DenseArray d_v;
};

// Mean over masked frames and all dims of (v - target)^2.
MseLoss mse_cfm_loss(const DenseArray& v, const DenseArray& target, const FrameMask& mask);

// Uniform flow step in [0, 1).
double sample_t(RngStream& rng);

// Contiguous masked suffix covering round(ratio * L) frames for ratio ~ U[lo, hi],
// clamped so that at least one frame is masked and one is kept.
FrameMask make_infill_mask(RngStream& rng, std::size_t length, double ratio_lo = 0.7,
                           double ratio_hi = 1.0);

// Prompt built from the unmasked prefix of the given mask.
ConditionPrompt prompt_for_mask(const Utterance& utt, const FrameMask& mask);

struct FlowSample {
  ConditionPrompt prompt;
  DenseArray x0;  // L x D standard normal
  DenseArray x1;  // L x D data
  double t = 0.0;
};

struct FlowBatch {
  std::vector<FlowSample> items;

  void validate() const;
};

FlowBatch sample_flow_batch(RngStream& rng, const std::vector<Utterance>& data,
                            std::size_t batch_size, double ratio_lo = 0.7,
                            double ratio_hi = 1.0);

// Network input for a flow sample: the interpolant with prompt frames pinned to x1,
// encoded together with the condition.
DenseArray flow_network_input(const FlowSample& sample);

struct PretrainOptions {
  HeadKind head = HeadKind::Gaussian;
  bool loss_on_all_frames = false;
  double max_grad_norm = 1.0;
};

struct PretrainStepResult {
  double loss = 0.0;
  double grad_norm = 0.0;
};

// Loss and gradient (accumulated into params) averaged over batch items; no update.
double pretrain_loss_and_grad(ParamSet& params, const FlowBatch& batch,
                              const PretrainOptions& options);

// One optimizer step on the flow-matching loss. Throws NumericError before touching
// params when the loss or gradient is non-finite.
PretrainStepResult pretrain_step(ParamSet& params, AdamState& optimizer, const FlowBatch& batch,
                                 const PretrainOptions& options);

}  // namespace flowgrpo
