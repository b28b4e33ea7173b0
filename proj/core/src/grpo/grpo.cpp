#include "flowgrpo/grpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/diffcore/parallel.hpp"

namespace flowgrpo {

std::string_view to_string(ObjectiveForm form) noexcept {
  switch (form) {
    case ObjectiveForm::Logprob: return "logprob";
    case ObjectiveForm::ClippedRatio: return "clipped_ratio";
    case ObjectiveForm::Density: return "density";
  }
  return "logprob";
}

ObjectiveForm objective_form_from_string(std::string_view name) {
  if (name == "logprob") return ObjectiveForm::Logprob;
  if (name == "clipped_ratio") return ObjectiveForm::ClippedRatio;
  if (name == "density") return ObjectiveForm::Density;
  throw ConfigError("unknown objective form '" + std::string(name) +
                    "' (expected logprob|clipped_ratio|density)");
}

void GrpoConfig::validate() const {
  if (group_size < 2) throw ConfigError("grpo: group size must be at least 2");
  if (!(beta >= 0.0)) throw ConfigError("grpo: beta must be non-negative");
  if (!(clip_eps > 0.0)) throw ConfigError("grpo: clip_eps must be positive");
  if (!(lr >= 0.0)) throw ConfigError("grpo: lr must be non-negative");
  if (n_steps < 1) throw ConfigError("grpo: n_steps must be at least 1");
  if (updates_per_batch < 1) throw ConfigError("grpo: updates_per_batch must be at least 1");
  if (!(max_grad_norm > 0.0)) throw ConfigError("grpo: max_grad_norm must be positive");
  if (!std::isfinite(lambda_w) || !std::isfinite(lambda_s)) {
    throw ConfigError("grpo: reward weights must be finite");
  }
}

double k3_kl(double logp_pol, double logp_ref, bool* saturated) noexcept {
  double log_ratio = logp_ref - logp_pol;
  if (log_ratio > kMaxLogRatio) {
    log_ratio = kMaxLogRatio;
    if (saturated) *saturated = true;
  }
  // expm1 keeps precision when the two log-densities nearly agree.
  return std::max(0.0, std::expm1(log_ratio) - log_ratio);
}

double k3_kl_grad(double logp_pol, double logp_ref) noexcept {
  const double log_ratio = logp_ref - logp_pol;
  if (log_ratio > kMaxLogRatio) return 0.0;
  return -std::expm1(log_ratio);
}

double gaussian_kl_closed(const GaussianField& policy, const GaussianField& reference) {
  require_same_shape(policy.mu, reference.mu, "gaussian_kl_closed");
  require_same_shape(policy.sigma, reference.sigma, "gaussian_kl_closed");
  require_same_shape(policy.mu, policy.sigma, "gaussian_kl_closed");
  const std::size_t n = policy.mu.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double sp = policy.sigma[i];
    const double sr = reference.sigma[i];
    if (!(sp > 0.0) || !(sr > 0.0)) throw DomainError("gaussian_kl_closed: sigma must be positive");
    const double dm = policy.mu[i] - reference.mu[i];
    sum += std::log(sr / sp) + (sp * sp + dm * dm) / (2.0 * sr * sr) - 0.5;
  }
  return sum / static_cast<double>(n);
}

std::vector<double> group_advantage(std::span<const double> rewards) {
  if (rewards.size() < 2) throw ConfigError("group_advantage: group size must be at least 2");
  const double n = static_cast<double>(rewards.size());
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
  double sq = 0.0;
  for (double r : rewards) sq += (r - mean) * (r - mean);
  const double sd = std::sqrt(sq / n);
  std::vector<double> adv(rewards.size(), 0.0);
  if (sd < 1e-8) return adv;
  for (std::size_t i = 0; i < rewards.size(); ++i) adv[i] = (rewards[i] - mean) / sd;
  return adv;
}

namespace {

void require_lengths(std::size_t n, std::initializer_list<std::size_t> others, const char* what) {
  if (n == 0) throw DomainError(std::string(what) + ": empty group");
  for (std::size_t m : others) {
    if (m != n) throw DimensionError(std::string(what) + ": length mismatch");
  }
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double clamped_ratio(double logp_new, double logp_old) {
  return std::exp(std::clamp(logp_new - logp_old, -kMaxLogRatio, kMaxLogRatio));
}

}  // namespace

double grpo_objective(std::span<const double> logprobs, std::span<const double> advantages,
                      std::span<const double> kls, double beta) {
  require_lengths(logprobs.size(), {advantages.size(), kls.size()}, "grpo_objective");
  double sum = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) sum += logprobs[i] * advantages[i];
  return sum / static_cast<double>(logprobs.size()) - beta * mean_of(kls);
}

double clipped_objective(std::span<const double> logp_new, std::span<const double> logp_old,
                         std::span<const double> advantages, std::span<const double> kls,
                         double clip_eps, double beta) {
  require_lengths(logp_new.size(), {logp_old.size(), advantages.size(), kls.size()},
                  "clipped_objective");
  double sum = 0.0;
  for (std::size_t i = 0; i < logp_new.size(); ++i) {
    const double ratio = clamped_ratio(logp_new[i], logp_old[i]);
    const double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    sum += std::min(ratio * advantages[i], clipped * advantages[i]);
  }
  return sum / static_cast<double>(logp_new.size()) - beta * mean_of(kls);
}

double density_objective(std::span<const double> logprobs, std::span<const double> advantages,
                         std::span<const double> kls, double beta) {
  require_lengths(logprobs.size(), {advantages.size(), kls.size()}, "density_objective");
  double sum = 0.0;
  for (std::size_t i = 0; i < logprobs.size(); ++i) {
    sum += std::exp(std::min(logprobs[i], kMaxLogRatio)) * advantages[i];
  }
  return sum / static_cast<double>(logprobs.size()) - beta * mean_of(kls);
}

std::vector<double> objective_logprob_grad(ObjectiveForm form, std::span<const double> logp_new,
                                           std::span<const double> logp_old,
                                           std::span<const double> logp_ref,
                                           std::span<const double> advantages, double clip_eps,
                                           double beta) {
  const std::size_t n = logp_new.size();
  require_lengths(n, {logp_old.size(), logp_ref.size(), advantages.size()},
                  "objective_logprob_grad");
  const double inv = 1.0 / static_cast<double>(n);
  std::vector<double> grad(n);
  for (std::size_t i = 0; i < n; ++i) {
    double g = 0.0;
    switch (form) {
      case ObjectiveForm::Logprob:
        g = advantages[i];
        break;
      case ObjectiveForm::ClippedRatio: {
        const double ratio = clamped_ratio(logp_new[i], logp_old[i]);
        // The min picks the clipped (constant) branch once the ratio leaves the trust
        // region in the direction the advantage favours.
        const bool clipped = (advantages[i] > 0.0 && ratio > 1.0 + clip_eps) ||
                             (advantages[i] < 0.0 && ratio < 1.0 - clip_eps);
        g = clipped ? 0.0 : ratio * advantages[i];
        break;
      }
      case ObjectiveForm::Density:
        g = std::exp(std::min(logp_new[i], kMaxLogRatio)) * advantages[i];
        break;
    }
    g -= beta * k3_kl_grad(logp_new[i], logp_ref[i]);
    grad[i] = g * inv;
  }
  return grad;
}

RolloutGroup sample_group(const ParamSet& policy, const GrpoTask& task, std::size_t prompt_index,
                          const GrpoConfig& cfg, const RngStream& rng) {
  RolloutGroup group;
  group.prompt = task.prompt;
  group.members.resize(cfg.group_size);
  const std::vector<std::size_t> shape{task.prompt.length(), task.prompt.frame_dim()};
  parallel_for(cfg.group_size, cfg.threads, [&](std::size_t g) {
    RngStream member = rng.split("p" + std::to_string(prompt_index) + "/g" + std::to_string(g));
    const DenseArray x0 = standard_normal(member, shape);
    group.members[g] = rollout(policy, task.prompt, x0, cfg.n_steps, RolloutMode::Stochastic, member);
  });
  return group;
}

namespace {

// Fills rewards/reward_parts; returns false if any reward failed.
bool score_group(RolloutGroup& group, const GrpoTask& task, std::span<const RewardFn> rewards,
                 std::size_t threads) {
  const std::size_t n = group.members.size();
  group.rewards.assign(n, 0.0);
  group.reward_parts.assign(n, std::vector<double>(rewards.size(), 0.0));
  std::vector<std::uint8_t> ok(n, 1);
  parallel_for(n, threads, [&](std::size_t g) {
    try {
      double total = 0.0;
      for (std::size_t r = 0; r < rewards.size(); ++r) {
        const double value = rewards[r].fn(group.members[g].output, task.prompt, task.truth);
        if (!std::isfinite(value)) {
          ok[g] = 0;
          return;
        }
        group.reward_parts[g][r] = value;
        total += rewards[r].weight * value;
      }
      group.rewards[g] = total;
    } catch (const std::exception&) {
      ok[g] = 0;
    }
  });
  return std::all_of(ok.begin(), ok.end(), [](std::uint8_t v) { return v != 0; });
}

}  // namespace

GrpoMetrics grpo_step(ParamSet& policy, AdamState& optimizer, const ParamSet& reference,
                      std::span<const GrpoTask> tasks, std::span<const RewardFn> rewards,
                      const GrpoConfig& cfg, const RngStream& rng) {
  cfg.validate();
  if (tasks.empty()) throw DomainError("grpo_step: no prompts");
  if (rewards.empty()) throw DomainError("grpo_step: no reward functions");
  if (!policy.same_layout(reference)) {
    throw DimensionError("grpo_step: policy and reference layouts differ");
  }

  GrpoMetrics metrics;
  metrics.reward_part_means.assign(rewards.size(), 0.0);

  std::vector<RolloutGroup> groups;
  groups.reserve(tasks.size());
  for (std::size_t p = 0; p < tasks.size(); ++p) {
    RolloutGroup group = sample_group(policy, tasks[p], p, cfg, rng);
    if (!score_group(group, tasks[p], rewards, cfg.threads)) {
      std::cerr << "grpo_step: reward failure on prompt " << p << " (" << rng.label()
                << "), group dropped\n";
      ++metrics.groups_dropped;
      continue;
    }
    group.advantages = group_advantage(group.rewards);
    group.ref_logprobs.assign(cfg.group_size, 0.0);
    parallel_for(cfg.group_size, cfg.threads, [&](std::size_t g) {
      group.ref_logprobs[g] = trajectory_logprob(reference, group.members[g]);
    });
    group.kl_values.resize(cfg.group_size);
    for (std::size_t g = 0; g < cfg.group_size; ++g) {
      bool saturated = false;
      group.kl_values[g] = k3_kl(group.members[g].total_logprob, group.ref_logprobs[g], &saturated);
      if (saturated) ++metrics.kl_saturations;
    }
    groups.push_back(std::move(group));
  }
  metrics.groups_used = groups.size();
  if (groups.empty()) return metrics;

  const double inv_groups = 1.0 / static_cast<double>(groups.size());
  const double inv_members = inv_groups / static_cast<double>(cfg.group_size);
  for (const RolloutGroup& group : groups) {
    std::vector<double> logp_old(cfg.group_size);
    for (std::size_t g = 0; g < cfg.group_size; ++g) {
      logp_old[g] = group.members[g].total_logprob;
      metrics.reward_mean += group.rewards[g] * inv_members;
      metrics.kl_mean += group.kl_values[g] * inv_members;
      for (std::size_t r = 0; r < rewards.size(); ++r) {
        metrics.reward_part_means[r] += group.reward_parts[g][r] * inv_members;
      }
    }
    double objective = 0.0;
    switch (cfg.objective) {
      case ObjectiveForm::Logprob:
        objective = grpo_objective(logp_old, group.advantages, group.kl_values, cfg.beta);
        break;
      case ObjectiveForm::ClippedRatio:
        objective = clipped_objective(logp_old, logp_old, group.advantages, group.kl_values,
                                      cfg.clip_eps, cfg.beta);
        break;
      case ObjectiveForm::Density:
        objective = density_objective(logp_old, group.advantages, group.kl_values, cfg.beta);
        break;
    }
    metrics.objective += objective * inv_groups;
  }
  if (!std::isfinite(metrics.objective)) {
    std::cerr << "grpo_step: non-finite objective, update skipped\n";
    return metrics;
  }

  for (std::size_t inner = 0; inner < cfg.updates_per_batch; ++inner) {
    policy.zero_grad();
    for (const RolloutGroup& group : groups) {
      std::vector<double> logp_old(cfg.group_size), logp_new(cfg.group_size);
      for (std::size_t g = 0; g < cfg.group_size; ++g) {
        logp_old[g] = group.members[g].total_logprob;
        logp_new[g] = inner == 0 ? logp_old[g] : trajectory_logprob(policy, group.members[g]);
      }
      const std::vector<double> d_logp =
          objective_logprob_grad(cfg.objective, logp_new, logp_old, group.ref_logprobs,
                                 group.advantages, cfg.clip_eps, cfg.beta);
      for (std::size_t g = 0; g < cfg.group_size; ++g) {
        if (d_logp[g] == 0.0) continue;
        // Ascent: the optimizer minimizes, so feed it the negated objective gradient.
        trajectory_logprob_backward(policy, group.members[g], -d_logp[g] * inv_groups);
      }
    }
    const double norm = clip_global_norm(policy, cfg.max_grad_norm);
    if (inner == 0) metrics.grad_norm = norm;
    if (!std::isfinite(norm)) {
      std::cerr << "grpo_step: non-finite gradient, update skipped\n";
      return metrics;
    }
    adam_update(policy, optimizer);
    metrics.update_applied = true;
  }
  return metrics;
}

}  // namespace flowgrpo
