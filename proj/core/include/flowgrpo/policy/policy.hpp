#pragma once

#include <cstddef>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/diffcore/params.hpp"
#include "flowgrpo/diffcore/rng.hpp"
#include "flowgrpo/flowmatch/flowmatch.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

enum class RolloutMode {
  Stochastic,  // v_k ~ N(mu_k, sigma_k)
  Mean,        // v_k = mu_k
};

struct TrajectoryStep {
  double t = 0.0;
  DenseArray state;     // x_k, L x D
  GaussianField field;  // sigma/log_sigma empty for a deterministic head
  DenseArray action;    // v_k, L x D
  double logprob = 0.0; // mean over masked elements
};

struct Trajectory {
  ConditionPrompt prompt;
  std::vector<TrajectoryStep> steps;
  DenseArray output;          // final state x_N
  double total_logprob = 0.0; // mean of steps[k].logprob
};

// Mean over masked elements of the normalized Gaussian log-density
// -0.5 log(2 pi) - log sigma - (a - mu)^2 / (2 sigma^2).
double gaussian_logprob(const DenseArray& a, const DenseArray& mu, const DenseArray& sigma,
                        const FrameMask& mask);

struct LogprobGrad {
  double value = 0.0;
  DenseArray d_mu;
  DenseArray d_log_sigma;
};

LogprobGrad gaussian_logprob_grad(const DenseArray& a, const GaussianField& field,
                                  const FrameMask& mask);

// Copies the prompt frames into the unmasked rows of x.
void pin_prompt(DenseArray& x, const ConditionPrompt& prompt);

// x + dt * v on masked frames; unmasked frames re-pinned to the prompt.
DenseArray euler_step(const DenseArray& x, const DenseArray& v, double dt,
                      const ConditionPrompt& prompt);

// Left-endpoint Euler integration over t_k = k / n_steps starting from x0 (prompt
// frames pinned). In stochastic mode each velocity is sampled from the Gaussian head.
Trajectory rollout(const ParamSet& params, const ConditionPrompt& prompt, const DenseArray& x0,
                   std::size_t n_steps, RolloutMode mode, RngStream& rng);

// Teacher-forced log-probability of the recorded actions under `params`.
double trajectory_logprob(const ParamSet& params, const Trajectory& traj);

// Same value as trajectory_logprob, and accumulates weight * d(logprob)/d(theta) into
// params' gradients.
double trajectory_logprob_backward(ParamSet& params, const Trajectory& traj, double weight);

}  // namespace flowgrpo
