#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "flowgrpo/flowmatch/flowmatch.hpp"
#include "flowgrpo/grpo/grpo.hpp"
#include "flowgrpo/rewards/rewards.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

// Everything a run depends on. Serialized as a flat JSON object; see docs/FORMATS.md
// for the key list. `seed` has no default and must always be given.
struct RunConfig {
  std::uint64_t seed = 0;
  ToySpec toy;
  std::size_t n_train = 2048;
  std::size_t n_test = 64;
  std::size_t hidden_dim = 64;

  HeadKind head = HeadKind::Gaussian;
  std::size_t pretrain_steps = 150;
  std::size_t pretrain_batch = 16;
  double pretrain_lr = 1e-3;
  double mask_ratio_min = 0.7;
  double mask_ratio_max = 1.0;
  bool loss_on_all_frames = false;
  double max_grad_norm = 1.0;

  GrpoConfig grpo;
  std::size_t grpo_updates = 1100;
  std::size_t grpo_prompts_per_update = 4;
  SimReference sim_reference = SimReference::SpeakerPrototype;

  std::size_t eval_steps = 32;
  // When false the wall_ms metrics column is written as 0 so reruns are byte-identical.
  bool log_wall_time = false;

  void validate() const;
};

// Throws ConfigError on malformed JSON, unknown keys, wrong types, a missing seed or
// values that fail validation.
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical JSON (sorted keys, every field present).
std::string config_to_json(const RunConfig& config);

std::string_view to_string(SimReference ref) noexcept;

}  // namespace flowgrpo
