#include "flowgrpo/policy/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/diffcore/network.hpp"

namespace flowgrpo {

namespace {

const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::size_t masked_elements(const FrameMask& mask, std::size_t rows, std::size_t cols) {
  if (mask.size() != rows) throw DimensionError("gaussian_logprob: mask length != frame count");
  const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  if (n == 0) throw DomainError("gaussian_logprob: mask selects no frames");
  return n * cols;
}

GaussianField field_from_head(const DenseArray& head, std::size_t frame_dim) {
  if (head.cols() == 2 * frame_dim) return head_split(head);
  if (head.cols() == frame_dim) return GaussianField{head, {}, {}};
  throw DimensionError("rollout: head width " + std::to_string(head.cols()) +
                       " incompatible with frame dim " + std::to_string(frame_dim));
}

}  // namespace

double gaussian_logprob(const DenseArray& a, const DenseArray& mu, const DenseArray& sigma,
                        const FrameMask& mask) {
  require_same_shape(a, mu, "gaussian_logprob");
  require_same_shape(a, sigma, "gaussian_logprob");
  require_rank(a, 2, "gaussian_logprob");
  const std::size_t dim = a.cols();
  const double inv = 1.0 / static_cast<double>(masked_elements(mask, a.rows(), dim));
  double sum = 0.0;
  for (std::size_t l = 0; l < a.rows(); ++l) {
    if (!mask[l]) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      const double s = sigma(l, d);
      if (std::isnan(s)) throw NumericError("gaussian_logprob: sigma is NaN");
      if (!(s > 0.0)) throw DomainError("gaussian_logprob: sigma must be positive");
      const double z = (a(l, d) - mu(l, d)) / s;
      sum += -kHalfLog2Pi - std::log(s) - 0.5 * z * z;
    }
  }
  return sum * inv;
}

LogprobGrad gaussian_logprob_grad(const DenseArray& a, const GaussianField& field,
                                  const FrameMask& mask) {
  LogprobGrad out;
  out.value = gaussian_logprob(a, field.mu, field.sigma, mask);
  const std::size_t rows = a.rows();
  const std::size_t dim = a.cols();
  const double inv = 1.0 / static_cast<double>(masked_elements(mask, rows, dim));
  out.d_mu = DenseArray::matrix(rows, dim);
  out.d_log_sigma = DenseArray::matrix(rows, dim);
  for (std::size_t l = 0; l < rows; ++l) {
    if (!mask[l]) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      const double s = field.sigma(l, d);
      const double diff = a(l, d) - field.mu(l, d);
      out.d_mu(l, d) = diff / (s * s) * inv;
      out.d_log_sigma(l, d) = (diff * diff / (s * s) - 1.0) * inv;
    }
  }
  return out;
}

void pin_prompt(DenseArray& x, const ConditionPrompt& prompt) {
  if (x.rows() != prompt.length() || x.cols() != prompt.frame_dim()) {
    throw DimensionError("pin_prompt: state " + x.shape_string() + " does not match prompt");
  }
  for (std::size_t l = 0; l < prompt.prompt_length(); ++l) {
    if (prompt.mask[l]) continue;
    auto src = prompt.prompt_frames.row(l);
    std::copy(src.begin(), src.end(), x.row(l).begin());
  }
}

DenseArray euler_step(const DenseArray& x, const DenseArray& v, double dt,
                      const ConditionPrompt& prompt) {
  require_same_shape(x, v, "euler_step");
  if (!(dt > 0.0)) throw DomainError("euler_step: dt must be positive");
  DenseArray next = x;
  for (std::size_t l = 0; l < x.rows(); ++l) {
    if (!prompt.mask[l]) continue;
    auto dst = next.row(l);
    auto vel = v.row(l);
    for (std::size_t d = 0; d < dst.size(); ++d) dst[d] = x(l, d) + dt * vel[d];
  }
  pin_prompt(next, prompt);
  return next;
}

Trajectory rollout(const ParamSet& params, const ConditionPrompt& prompt, const DenseArray& x0,
                   std::size_t n_steps, RolloutMode mode, RngStream& rng) {
  if (n_steps < 1) throw DomainError("rollout: n_steps must be at least 1");
  if (x0.rank() != 2 || x0.rows() != prompt.length() || x0.cols() != prompt.frame_dim()) {
    throw DimensionError("rollout: x0 " + x0.shape_string() + " does not match prompt");
  }
  const double dt = 1.0 / static_cast<double>(n_steps);

  Trajectory traj;
  traj.prompt = prompt;
  traj.steps.reserve(n_steps);
  DenseArray state = x0;
  pin_prompt(state, prompt);

  double logprob_sum = 0.0;
  for (std::size_t k = 0; k < n_steps; ++k) {
    TrajectoryStep step;
    step.t = static_cast<double>(k) * dt;
    step.field = field_from_head(net_forward(params, condition_encode(prompt, state, step.t)).head,
                                 prompt.frame_dim());
    const bool gaussian = !step.field.sigma.empty();
    if (mode == RolloutMode::Stochastic) {
      if (!gaussian) throw ContractError("rollout: stochastic mode needs a Gaussian head");
      step.action = gaussian_draw(rng, step.field.mu, step.field.sigma);
    } else {
      step.action = step.field.mu;
    }
    step.logprob =
        gaussian ? gaussian_logprob(step.action, step.field.mu, step.field.sigma, prompt.mask) : 0.0;
    logprob_sum += step.logprob;

    DenseArray next = euler_step(state, step.action, dt, prompt);
    if (!next.all_finite()) {
      throw NumericError("rollout: non-finite state after step " + std::to_string(k));
    }
    step.state = std::move(state);
    state = std::move(next);
    traj.steps.push_back(std::move(step));
  }
  traj.output = std::move(state);
  traj.total_logprob = logprob_sum / static_cast<double>(n_steps);
  return traj;
}

double trajectory_logprob(const ParamSet& params, const Trajectory& traj) {
  if (traj.steps.empty()) throw DomainError("trajectory_logprob: empty trajectory");
  double sum = 0.0;
  for (const TrajectoryStep& step : traj.steps) {
    const DenseArray head = net_forward(params, condition_encode(traj.prompt, step.state, step.t)).head;
    if (head.cols() != 2 * traj.prompt.frame_dim()) {
      throw DimensionError("trajectory_logprob: needs a Gaussian head");
    }
    const GaussianField field = head_split(head);
    require_same_shape(step.action, field.mu, "trajectory_logprob(action)");
    sum += gaussian_logprob(step.action, field.mu, field.sigma, traj.prompt.mask);
  }
  return sum / static_cast<double>(traj.steps.size());
}

double trajectory_logprob_backward(ParamSet& params, const Trajectory& traj, double weight) {
  if (traj.steps.empty()) throw DomainError("trajectory_logprob_backward: empty trajectory");
  const double inv_steps = 1.0 / static_cast<double>(traj.steps.size());
  double sum = 0.0;
  for (const TrajectoryStep& step : traj.steps) {
    NetOutput out = net_forward(params, condition_encode(traj.prompt, step.state, step.t));
    if (out.head.cols() != 2 * traj.prompt.frame_dim()) {
      throw DimensionError("trajectory_logprob_backward: needs a Gaussian head");
    }
    const GaussianField field = head_split(out.head);
    LogprobGrad lp = gaussian_logprob_grad(step.action, field, traj.prompt.mask);
    sum += lp.value;
    const double scale = weight * inv_steps;
    for (double& g : lp.d_mu.data()) g *= scale;
    for (double& g : lp.d_log_sigma.data()) g *= scale;
    net_backward(params, out.tape, head_split_backward(out.head, lp.d_mu, lp.d_log_sigma));
  }
  return sum * inv_steps;
}

}  // namespace flowgrpo
