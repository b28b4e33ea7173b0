#include "flowgrpo/harness/commands.hpp"

#include <chrono>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/diffcore/format.hpp"
#include "flowgrpo/flowmatch/flowmatch.hpp"
#include "flowgrpo/grpo/grpo.hpp"
#include "flowgrpo/harness/io.hpp"
#include "flowgrpo/policy/policy.hpp"

namespace flowgrpo {

namespace fs = std::filesystem;

int exit_code_for_current_exception(std::ostream& err) {
  try {
    throw;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitIo;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}

namespace {

// Append-only CSV that is flushed after every row.
class CsvLog {
 public:
  CsvLog(const fs::path& path, const std::string& header) : path_(path), out_(path, std::ios::trunc) {
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
    out_ << header << '\n';
    out_.flush();
  }

  template <typename... Fields>
  void row(const Fields&... fields) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << field(fields)), ...);
    out_ << '\n';
    out_.flush();
    if (!out_) throw IoError("write to '" + path_.string() + "' failed");
  }

 private:
  static std::string field(double v) { return format_double(v); }
  template <typename T>
  static std::string field(const T& v) {
    return std::to_string(v);
  }

  fs::path path_;
  std::ofstream out_;
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

void check_compatible(const RunConfig& config, const ParamSet& params) {
  const NetShape shape = network_shape(params);
  const std::size_t expected_in = condition_width(config.toy.frame_dim(), config.toy.num_tokens);
  if (shape.input_dim != expected_in) {
    throw ConfigError("checkpoint network expects " + std::to_string(shape.input_dim) +
                      " input features, config implies " + std::to_string(expected_in));
  }
  head_kind_of(params, config.toy.frame_dim());
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

EvalOptions eval_options(const RunConfig& config) {
  return EvalOptions{config.eval_steps, config.toy.prompt_frames, config.sim_reference};
}

}  // namespace

ParamSet init_params(const RunConfig& config) {
  const std::size_t dim = config.toy.frame_dim();
  RngStream rng(config.seed, "init");
  return make_network(NetShape{condition_width(dim, config.toy.num_tokens), config.hidden_dim,
                               head_width(config.head, dim)},
                      rng);
}

Dataset dataset_for(const RunConfig& config) {
  return gen_dataset(config.seed, config.toy, config.n_train, config.n_test);
}

PretrainResult cmd_pretrain(const RunConfig& config, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  ensure_dir(out_dir);
  const Dataset data = dataset_for(config);

  Checkpoint ckpt;
  ckpt.phase = Phase::Pretrained;
  ckpt.config = config;
  ckpt.params = init_params(config);
  ckpt.optimizer = AdamState::for_params(ckpt.params, AdamConfig{config.pretrain_lr});

  PretrainResult result;
  result.checkpoint = out_dir / "pretrained.ckpt";
  result.metrics = out_dir / "pretrain_metrics.csv";
  CsvLog csv(result.metrics, "step,loss,wall_ms");

  const PretrainOptions options{config.head, config.loss_on_all_frames, config.max_grad_norm};
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t step = 0; step < config.pretrain_steps; ++step) {
    RngStream rng(config.seed, "pretrain/step" + std::to_string(step));
    const FlowBatch batch = sample_flow_batch(rng, data.train, config.pretrain_batch,
                                              config.mask_ratio_min, config.mask_ratio_max);
    PretrainStepResult r;
    try {
      r = pretrain_step(ckpt.params, ckpt.optimizer, batch, options);
    } catch (const NumericError&) {
      save_checkpoint(ckpt, result.checkpoint);
      log << "pretrain: numeric failure at step " << step << ", last good state saved to "
          << result.checkpoint << '\n';
      throw;
    }
    ckpt.step = step + 1;
    const double wall_ms =
        config.log_wall_time
            ? std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count()
            : 0.0;
    csv.row(step, r.loss, wall_ms);
    if (step == 0) result.first_loss = r.loss;
    result.last_loss = r.loss;
    if ((step + 1) % 500 == 0) log << "pretrain step " << step + 1 << " loss " << r.loss << '\n';
  }
  save_checkpoint(ckpt, result.checkpoint);
  log << "pretrain: wrote " << result.checkpoint << '\n';
  return result;
}

GrpoResult cmd_grpo(const RunConfig& config, const fs::path& pretrained, const fs::path& out_dir,
                    std::ostream& log) {
  config.validate();
  const Checkpoint source = load_checkpoint(pretrained);
  if (source.phase != Phase::Pretrained) {
    throw ContractError("grpo: checkpoint '" + pretrained.string() + "' has phase '" +
                        std::string(to_string(source.phase)) + "', expected 'pretrained'");
  }
  check_compatible(config, source.params);
  if (head_kind_of(source.params, config.toy.frame_dim()) != HeadKind::Gaussian) {
    throw ContractError("grpo: needs a Gaussian-head checkpoint");
  }
  ensure_dir(out_dir);
  const Dataset data = dataset_for(config);
  auto prototypes = std::make_shared<const Prototypes>(data.prototypes);
  const std::vector<RewardFn> rewards = {
      make_content_reward(prototypes, config.grpo.lambda_w),
      make_similarity_reward(prototypes, config.grpo.lambda_s, config.sim_reference)};

  const ParamSet reference = source.params;
  Checkpoint ckpt;
  ckpt.phase = Phase::Grpo;
  ckpt.config = config;
  ckpt.params = source.params;
  ckpt.optimizer = AdamState::for_params(ckpt.params, AdamConfig{config.grpo.lr});

  GrpoResult result;
  result.reference_hash_before = reference.value_hash();
  log << "grpo: reference params hash " << hex(result.reference_hash_before) << '\n';
  result.checkpoint = out_dir / "grpo.ckpt";
  result.metrics = out_dir / "grpo_metrics.csv";
  CsvLog csv(result.metrics, "update,objective,reward_mean,reward_w,reward_s,kl_mean,grad_norm");

  for (std::size_t update = 0; update < config.grpo_updates; ++update) {
    RngStream pick(config.seed, "grpo/batch" + std::to_string(update));
    std::vector<GrpoTask> tasks;
    tasks.reserve(config.grpo_prompts_per_update);
    for (std::size_t p = 0; p < config.grpo_prompts_per_update; ++p) {
      const Utterance& utt = data.train[pick.next_u64() % data.train.size()];
      tasks.push_back(GrpoTask{make_prompt(utt, config.toy.prompt_frames), utt});
    }
    const RngStream rng(config.seed, "grpo/u" + std::to_string(update));
    const GrpoMetrics m = grpo_step(ckpt.params, ckpt.optimizer, reference, tasks, rewards,
                                    config.grpo, rng);
    if (2 * m.groups_dropped > tasks.size()) {
      save_checkpoint(ckpt, out_dir / "grpo_aborted.ckpt");
      throw NumericError("grpo: reward failures on " + std::to_string(m.groups_dropped) + " of " +
                         std::to_string(tasks.size()) + " prompts at update " +
                         std::to_string(update));
    }
    ckpt.step = update + 1;
    csv.row(update, m.objective, m.reward_mean, m.reward_part_means[0], m.reward_part_means[1],
            m.kl_mean, m.grad_norm);
    if (update == 0) result.first_reward = m.reward_mean;
    result.last_reward = m.reward_mean;
    if ((update + 1) % 50 == 0) {
      log << "grpo update " << update + 1 << " reward " << m.reward_mean << " kl " << m.kl_mean
          << '\n';
    }
  }

  result.reference_hash_after = reference.value_hash();
  log << "grpo: reference params hash after run " << hex(result.reference_hash_after) << '\n';
  if (result.reference_hash_after != result.reference_hash_before) {
    throw ContractError("grpo: reference parameters changed during the run");
  }
  save_checkpoint(ckpt, result.checkpoint);
  log << "grpo: wrote " << result.checkpoint << '\n';
  return result;
}

std::vector<EvalResult> cmd_eval(const RunConfig& config, const std::vector<fs::path>& checkpoints,
                                 const fs::path& out_dir, std::ostream& log) {
  config.validate();
  if (checkpoints.empty()) throw ConfigError("eval: no checkpoints given");
  // Load everything first so a missing file fails before any output is written.
  std::vector<Checkpoint> loaded;
  for (const fs::path& p : checkpoints) {
    loaded.push_back(load_checkpoint(p));
    check_compatible(config, loaded.back().params);
  }
  ensure_dir(out_dir);
  const Dataset data = dataset_for(config);
  const RngStream rng(config.seed, "eval");

  std::vector<EvalResult> results;
  std::ostringstream summary;
  summary << "index,checkpoint,mean_wer,mean_sim,gv_mad,count,failures\n";
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EvalResult r;
    r.checkpoint = checkpoints[i];
    r.report = eval_model(loaded[i].params, data.test, data.prototypes, eval_options(config), rng);
    const std::string tag = std::to_string(i) + "_" + checkpoints[i].stem().string();
    r.eval_csv = out_dir / ("eval_" + tag + ".csv");
    r.gv_csv = out_dir / ("gv_" + tag + ".csv");
    std::ostringstream eval_text, gv_text;
    write_eval_csv(eval_text, r.report);
    write_gv_csv(gv_text, r.report);
    write_file(r.eval_csv, eval_text.str());
    write_file(r.gv_csv, gv_text.str());
    const double mad = r.report.gv_truth.empty() ? 0.0 : gv_distance(r.report.gv_truth, r.report.gv_model);
    summary << i << ',' << checkpoints[i].string() << ',' << format_double(r.report.mean_wer) << ','
            << format_double(r.report.mean_sim) << ',' << format_double(mad) << ','
            << r.report.count << ',' << r.report.failures << '\n';
    log << "eval " << checkpoints[i] << ": wer " << r.report.mean_wer << " sim "
        << r.report.mean_sim << " (" << r.report.count << " samples, " << r.report.failures
        << " failures)\n";
    results.push_back(std::move(r));
  }
  write_file(out_dir / "eval_summary.csv", summary.str());
  return results;
}

fs::path cmd_sample(const RunConfig& config, const fs::path& checkpoint, int speaker,
                    const std::vector<int>& tokens, const fs::path& out_dir, std::ostream& log) {
  config.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  check_compatible(config, ckpt.params);
  const Dataset data = dataset_for(config);
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= config.toy.num_speakers) {
    throw DomainError("sample: speaker id " + std::to_string(speaker) + " out of range");
  }
  if (tokens.size() != config.toy.frames) {
    throw DomainError("sample: expected " + std::to_string(config.toy.frames) + " tokens, got " +
                      std::to_string(tokens.size()));
  }
  RngStream rng(config.seed, "sample/s" + std::to_string(speaker));
  const Utterance reference = gen_utterance(rng, speaker, TokenSeq{tokens, config.toy.num_tokens},
                                            config.toy, data.prototypes);
  const ConditionPrompt prompt = make_prompt(reference, config.toy.prompt_frames);
  const DenseArray x0 = standard_normal(rng, reference.frames.shape());
  const Trajectory traj =
      rollout(ckpt.params, prompt, x0, config.eval_steps, RolloutMode::Mean, rng);

  ensure_dir(out_dir);
  std::ostringstream out;
  out << "frame_index";
  for (std::size_t d = 0; d < traj.output.cols(); ++d) out << ",dim_" << d;
  out << '\n';
  for (std::size_t l = 0; l < traj.output.rows(); ++l) {
    out << l;
    for (double v : traj.output.row(l)) out << ',' << format_double(v);
    out << '\n';
  }
  const fs::path path = out_dir / "sample.csv";
  write_file(path, out.str());
  log << "sample: wrote " << path << '\n';
  return path;
}

fs::path cmd_gv(const RunConfig& config, const fs::path& checkpoint, const fs::path& out_dir,
                std::ostream& log) {
  config.validate();
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  check_compatible(config, ckpt.params);
  const Dataset data = dataset_for(config);
  const EvalReport report = eval_model(ckpt.params, data.test, data.prototypes,
                                       eval_options(config), RngStream(config.seed, "eval"));
  ensure_dir(out_dir);
  std::ostringstream out;
  write_gv_csv(out, report);
  const fs::path path = out_dir / "gv.csv";
  write_file(path, out.str());
  log << "gv: mean abs deviation from ground truth "
      << gv_distance(report.gv_truth, report.gv_model) << ", wrote " << path << '\n';
  return path;
}

}  // namespace flowgrpo
