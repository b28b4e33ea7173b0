#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/harness/checkpoint.hpp"
#include "flowgrpo/harness/commands.hpp"
#include "flowgrpo/harness/config.hpp"
#include "flowgrpo/harness/io.hpp"

namespace fs = std::filesystem;
using namespace flowgrpo;

namespace {

std::vector<int> parse_token_list(const std::string& text) {
  std::vector<int> ids;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      ids.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("--tokens: '" + item + "' is not an integer");
    }
  }
  return ids;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Flow-matching pretraining and GRPO fine-tuning on a synthetic cloning task"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON run configuration")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed", seed, "overrides the seed in the config");
  };

  auto* pretrain = app.add_subcommand("pretrain", "flow-matching pretraining from scratch");
  add_common(pretrain);

  std::string ckpt;
  auto* grpo = app.add_subcommand("grpo", "GRPO fine-tuning of a pretrained checkpoint");
  add_common(grpo);
  grpo->add_option("--ckpt", ckpt, "pretrained checkpoint")->required();

  std::vector<std::string> eval_ckpts;
  auto* eval = app.add_subcommand("eval", "WER/SIM/GV evaluation on the held-out test set");
  add_common(eval);
  eval->add_option("--ckpt", eval_ckpts, "checkpoints to compare")->required();

  int speaker = 0;
  std::string tokens;
  auto* sample = app.add_subcommand("sample", "mean-mode generation for one speaker and token sequence");
  add_common(sample);
  sample->add_option("--ckpt", ckpt, "checkpoint")->required();
  sample->add_option("--speaker", speaker, "speaker id")->required();
  sample->add_option("--tokens", tokens, "comma separated token ids, one per frame")->required();

  auto* gv = app.add_subcommand("gv", "global variance curve of one checkpoint");
  add_common(gv);
  gv->add_option("--ckpt", ckpt, "checkpoint")->required();

  auto* dataset = app.add_subcommand("dataset", "dump the generated dataset as JSON");
  add_common(dataset);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    RunConfig config = load_config(config_path);
    if (seed) config.seed = *seed;
    config.validate();
    const fs::path out(out_dir);

    if (*pretrain) {
      const PretrainResult r = cmd_pretrain(config, out, std::cerr);
      std::cout << "loss " << r.first_loss << " -> " << r.last_loss << '\n';
    } else if (*grpo) {
      const GrpoResult r = cmd_grpo(config, ckpt, out, std::cerr);
      std::cout << "reward " << r.first_reward << " -> " << r.last_reward << '\n';
    } else if (*eval) {
      std::vector<fs::path> paths(eval_ckpts.begin(), eval_ckpts.end());
      for (const EvalResult& r : cmd_eval(config, paths, out, std::cerr)) {
        std::cout << r.checkpoint.string() << " wer " << r.report.mean_wer << " sim "
                  << r.report.mean_sim << '\n';
      }
    } else if (*sample) {
      std::cout << cmd_sample(config, ckpt, speaker, parse_token_list(tokens), out, std::cerr).string()
                << '\n';
    } else if (*gv) {
      std::cout << cmd_gv(config, ckpt, out, std::cerr).string() << '\n';
    } else if (*dataset) {
      fs::create_directories(out);
      write_file(out / "dataset.json", serialize_dataset(dataset_for(config)));
      std::cout << (out / "dataset.json").string() << '\n';
    }
  } catch (...) {
    return exit_code_for_current_exception(std::cerr);
  }
  return kExitOk;
}
