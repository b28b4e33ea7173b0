#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "flowgrpo/evalsuite/evalsuite.hpp"
#include "flowgrpo/harness/checkpoint.hpp"
#include "flowgrpo/harness/config.hpp"

namespace flowgrpo {

// Exit codes used by the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitIo = 4;

// Maps the exception currently being handled onto an exit code and prints it.
int exit_code_for_current_exception(std::ostream& err);

// Fresh network for the configured head, initialized from (seed, "init").
ParamSet init_params(const RunConfig& config);

Dataset dataset_for(const RunConfig& config);

struct PretrainResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  double first_loss = 0.0;
  double last_loss = 0.0;
};

// Writes <out>/pretrained.ckpt and <out>/pretrain_metrics.csv (step,loss,wall_ms). On a
// non-finite loss the last good state is checkpointed before NumericError propagates.
PretrainResult cmd_pretrain(const RunConfig& config, const std::filesystem::path& out_dir,
                            std::ostream& log);

struct GrpoResult {
  std::filesystem::path checkpoint;
  std::filesystem::path metrics;
  std::uint64_t reference_hash_before = 0;
  std::uint64_t reference_hash_after = 0;
  double first_reward = 0.0;
  double last_reward = 0.0;
};

// Policy and frozen reference both load from `pretrained`. Writes <out>/grpo.ckpt and
// <out>/grpo_metrics.csv (update,objective,reward_mean,reward_w,reward_s,kl_mean,grad_norm).
GrpoResult cmd_grpo(const RunConfig& config, const std::filesystem::path& pretrained,
                    const std::filesystem::path& out_dir, std::ostream& log);

struct EvalResult {
  std::filesystem::path checkpoint;
  std::filesystem::path eval_csv;
  std::filesystem::path gv_csv;
  EvalReport report;
};

// Evaluates every checkpoint on the same held-out test set regenerated from the config
// seed. Writes eval_<i>_<stem>.csv and gv_<i>_<stem>.csv per checkpoint plus
// eval_summary.csv.
std::vector<EvalResult> cmd_eval(const RunConfig& config,
                                 const std::vector<std::filesystem::path>& checkpoints,
                                 const std::filesystem::path& out_dir, std::ostream& log);

// Mean-mode generation for the given speaker and token sequence, prompted with the first
// P frames of a fresh utterance by that speaker. Writes <out>/sample.csv
// (frame_index,dim_0..dim_{D-1}).
std::filesystem::path cmd_sample(const RunConfig& config, const std::filesystem::path& checkpoint,
                                 int speaker, const std::vector<int>& tokens,
                                 const std::filesystem::path& out_dir, std::ostream& log);

// GV curve of one checkpoint on the test set: <out>/gv.csv (dim_index,gv_gt,gv_model).
std::filesystem::path cmd_gv(const RunConfig& config, const std::filesystem::path& checkpoint,
                             const std::filesystem::path& out_dir, std::ostream& log);

}  // namespace flowgrpo
