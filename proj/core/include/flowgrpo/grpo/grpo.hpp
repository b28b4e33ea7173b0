#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "flowgrpo/diffcore/adam.hpp"
#include "flowgrpo/diffcore/params.hpp"
#include "flowgrpo/diffcore/rng.hpp"
#include "flowgrpo/policy/policy.hpp"
#include "flowgrpo/rewards/rewards.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

enum class ObjectiveForm {
  Logprob,       // mean_i logprob_i * A_i - beta * mean_i kl_i
  ClippedRatio,  // mean_i min(r_i A_i, clip(r_i, 1 - eps, 1 + eps) A_i) - beta * mean_i kl_i
  Density,       // mean_i exp(logprob_i) * A_i - beta * mean_i kl_i (literal density weighting)
};

std::string_view to_string(ObjectiveForm form) noexcept;
ObjectiveForm objective_form_from_string(std::string_view name);

struct GrpoConfig {
  std::size_t group_size = 8;
  double beta = 0.1;
  double lambda_w = 1.0;
  double lambda_s = 1.0;
  double clip_eps = 0.2;
  double lr = 1e-4;
  std::size_t n_steps = 8;
  std::size_t updates_per_batch = 1;
  ObjectiveForm objective = ObjectiveForm::Logprob;
  double max_grad_norm = 1.0;
  std::size_t threads = 1;

  void validate() const;
};

// One prompt and the utterance it was cut from (rewards compare against it).
struct GrpoTask {
  ConditionPrompt prompt;
  Utterance truth;
};

struct RolloutGroup {
  ConditionPrompt prompt;
  std::vector<Trajectory> members;
  std::vector<double> rewards;
  std::vector<std::vector<double>> reward_parts;  // [member][reward fn]
  std::vector<double> advantages;
  std::vector<double> ref_logprobs;
  std::vector<double> kl_values;
};

struct GrpoMetrics {
  double objective = 0.0;
  double reward_mean = 0.0;
  std::vector<double> reward_part_means;  // aligned with the reward fns
  double kl_mean = 0.0;
  double grad_norm = 0.0;
  std::size_t groups_used = 0;
  std::size_t groups_dropped = 0;
  std::size_t kl_saturations = 0;
  bool update_applied = false;
};

inline constexpr double kMaxLogRatio = 700.0;

// k3 estimator r - log r - 1 with r = exp(logp_ref - logp_pol). The log-ratio is
// clamped at 700; *saturated is set when that happens.
double k3_kl(double logp_pol, double logp_ref, bool* saturated = nullptr) noexcept;
// d k3 / d logp_pol.
double k3_kl_grad(double logp_pol, double logp_ref) noexcept;

// Mean over elements of KL(N(mu_p, s_p) || N(mu_r, s_r)).
double gaussian_kl_closed(const GaussianField& policy, const GaussianField& reference);

// (r - mean) / population std; all zeros when std < 1e-8. Needs at least 2 rewards.
std::vector<double> group_advantage(std::span<const double> rewards);

double grpo_objective(std::span<const double> logprobs, std::span<const double> advantages,
                      std::span<const double> kls, double beta);

double clipped_objective(std::span<const double> logp_new, std::span<const double> logp_old,
                         std::span<const double> advantages, std::span<const double> kls,
                         double clip_eps, double beta);

double density_objective(std::span<const double> logprobs, std::span<const double> advantages,
                         std::span<const double> kls, double beta);

// d objective / d logp_pol[i] for each member, given the current policy log-probs, the
// log-probs at rollout time and under the reference.
std::vector<double> objective_logprob_grad(ObjectiveForm form, std::span<const double> logp_new,
                                           std::span<const double> logp_old,
                                           std::span<const double> logp_ref,
                                           std::span<const double> advantages, double clip_eps,
                                           double beta);

// Stochastic rollouts for one prompt. Member g uses stream rng.split("p<p>/g<g>") for
// both its x0 and its actions, so results do not depend on evaluation order.
RolloutGroup sample_group(const ParamSet& policy, const GrpoTask& task, std::size_t prompt_index,
                          const GrpoConfig& cfg, const RngStream& rng);

// One GRPO update: G rollouts per prompt, rewards, group advantages, k3 KL against the
// frozen reference, gradient ascent on the configured objective. `reference` is never
// written. Groups whose rewards fail (throw or return non-finite) are dropped.
GrpoMetrics grpo_step(ParamSet& policy, AdamState& optimizer, const ParamSet& reference,
                      std::span<const GrpoTask> tasks, std::span<const RewardFn> rewards,
                      const GrpoConfig& cfg, const RngStream& rng);

}  // namespace flowgrpo
