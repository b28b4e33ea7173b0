#include "flowgrpo/harness/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <nlohmann/json.hpp>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/harness/io.hpp"

namespace flowgrpo {

using nlohmann::json;

std::string_view to_string(SimReference ref) noexcept {
  return ref == SimReference::PromptFrames ? "prompt" : "prototype";
}

namespace {

SimReference sim_reference_from_string(std::string_view name) {
  if (name == "prototype") return SimReference::SpeakerPrototype;
  if (name == "prompt") return SimReference::PromptFrames;
  throw ConfigError("unknown sim_reference '" + std::string(name) + "' (expected prototype|prompt)");
}

template <typename T>
T value_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_unsigned()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has the wrong type (got " +
                      std::string(v.type_name()) + ")");
  }
}

using Setter = std::function<void(RunConfig&, const json&, const std::string&)>;

template <typename T, typename Fn>
Setter bind(Fn&& assign) {
  return [assign](RunConfig& c, const json& v, const std::string& key) {
    assign(c, value_as<T>(v, key));
  };
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", bind<std::uint64_t>([](RunConfig& c, std::uint64_t v) { c.seed = v; })},
      {"num_speakers", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.toy.num_speakers = v; })},
      {"num_tokens", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.toy.num_tokens = v; })},
      {"speaker_dims", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.toy.speaker_dims = v; })},
      {"token_dims", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.toy.token_dims = v; })},
      {"frames", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.toy.frames = v; })},
      {"prompt_frames", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.toy.prompt_frames = v; })},
      {"data_noise", bind<double>([](RunConfig& c, double v) { c.toy.data_noise = v; })},
      {"min_separation", bind<double>([](RunConfig& c, double v) { c.toy.min_separation = v; })},
      {"n_train", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.n_train = v; })},
      {"n_test", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.n_test = v; })},
      {"hidden_dim", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.hidden_dim = v; })},
      {"head", bind<std::string>([](RunConfig& c, const std::string& v) { c.head = head_kind_from_string(v); })},
      {"pretrain_steps", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.pretrain_steps = v; })},
      {"pretrain_batch", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.pretrain_batch = v; })},
      {"pretrain_lr", bind<double>([](RunConfig& c, double v) { c.pretrain_lr = v; })},
      {"mask_ratio_min", bind<double>([](RunConfig& c, double v) { c.mask_ratio_min = v; })},
      {"mask_ratio_max", bind<double>([](RunConfig& c, double v) { c.mask_ratio_max = v; })},
      {"loss_on_all_frames", bind<bool>([](RunConfig& c, bool v) { c.loss_on_all_frames = v; })},
      {"max_grad_norm", bind<double>([](RunConfig& c, double v) { c.max_grad_norm = v; c.grpo.max_grad_norm = v; })},
      {"grpo_updates", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.grpo_updates = v; })},
      {"grpo_prompts_per_update", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.grpo_prompts_per_update = v; })},
      {"grpo_group_size", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.grpo.group_size = v; })},
      {"grpo_beta", bind<double>([](RunConfig& c, double v) { c.grpo.beta = v; })},
      {"grpo_lambda_w", bind<double>([](RunConfig& c, double v) { c.grpo.lambda_w = v; })},
      {"grpo_lambda_s", bind<double>([](RunConfig& c, double v) { c.grpo.lambda_s = v; })},
      {"grpo_clip_eps", bind<double>([](RunConfig& c, double v) { c.grpo.clip_eps = v; })},
      {"grpo_lr", bind<double>([](RunConfig& c, double v) { c.grpo.lr = v; })},
      {"grpo_steps", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.grpo.n_steps = v; })},
      {"grpo_updates_per_batch", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.grpo.updates_per_batch = v; })},
      {"grpo_objective", bind<std::string>([](RunConfig& c, const std::string& v) { c.grpo.objective = objective_form_from_string(v); })},
      {"sim_reference", bind<std::string>([](RunConfig& c, const std::string& v) { c.sim_reference = sim_reference_from_string(v); })},
      {"eval_steps", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.eval_steps = v; })},
      {"log_wall_time", bind<bool>([](RunConfig& c, bool v) { c.log_wall_time = v; })},
      {"threads", bind<std::size_t>([](RunConfig& c, std::size_t v) { c.grpo.threads = v; })},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  toy.validate();
  grpo.validate();
  if (n_train == 0 || n_test == 0) throw ConfigError("n_train and n_test must be positive");
  if (hidden_dim == 0) throw ConfigError("hidden_dim must be positive");
  if (pretrain_batch == 0) throw ConfigError("pretrain_batch must be positive");
  if (!(pretrain_lr >= 0.0)) throw ConfigError("pretrain_lr must be non-negative");
  if (!(mask_ratio_min >= 0.0 && mask_ratio_min <= mask_ratio_max && mask_ratio_max <= 1.0)) {
    throw ConfigError("mask ratios must satisfy 0 <= min <= max <= 1");
  }
  if (!(max_grad_norm > 0.0)) throw ConfigError("max_grad_norm must be positive");
  if (grpo_prompts_per_update == 0) throw ConfigError("grpo_prompts_per_update must be positive");
  if (eval_steps == 0) throw ConfigError("eval_steps must be positive");
  if (grpo.threads == 0) throw ConfigError("threads must be positive");
}

RunConfig parse_config(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  if (!doc.contains("seed")) throw ConfigError("config key 'seed' is required");

  RunConfig config;
  const auto& table = setters();
  for (const auto& [key, value] : doc.items()) {
    auto it = table.find(key);
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(config, value, key);
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

std::string config_to_json(const RunConfig& c) {
  json doc = {
      {"seed", c.seed},
      {"num_speakers", c.toy.num_speakers},
      {"num_tokens", c.toy.num_tokens},
      {"speaker_dims", c.toy.speaker_dims},
      {"token_dims", c.toy.token_dims},
      {"frames", c.toy.frames},
      {"prompt_frames", c.toy.prompt_frames},
      {"data_noise", c.toy.data_noise},
      {"min_separation", c.toy.min_separation},
      {"n_train", c.n_train},
      {"n_test", c.n_test},
      {"hidden_dim", c.hidden_dim},
      {"head", std::string(to_string(c.head))},
      {"pretrain_steps", c.pretrain_steps},
      {"pretrain_batch", c.pretrain_batch},
      {"pretrain_lr", c.pretrain_lr},
      {"mask_ratio_min", c.mask_ratio_min},
      {"mask_ratio_max", c.mask_ratio_max},
      {"loss_on_all_frames", c.loss_on_all_frames},
      {"max_grad_norm", c.max_grad_norm},
      {"grpo_updates", c.grpo_updates},
      {"grpo_prompts_per_update", c.grpo_prompts_per_update},
      {"grpo_group_size", c.grpo.group_size},
      {"grpo_beta", c.grpo.beta},
      {"grpo_lambda_w", c.grpo.lambda_w},
      {"grpo_lambda_s", c.grpo.lambda_s},
      {"grpo_clip_eps", c.grpo.clip_eps},
      {"grpo_lr", c.grpo.lr},
      {"grpo_steps", c.grpo.n_steps},
      {"grpo_updates_per_batch", c.grpo.updates_per_batch},
      {"grpo_objective", std::string(to_string(c.grpo.objective))},
      {"sim_reference", std::string(to_string(c.sim_reference))},
      {"eval_steps", c.eval_steps},
      {"log_wall_time", c.log_wall_time},
      {"threads", c.grpo.threads},
  };
  return doc.dump(2);
}

}  // namespace flowgrpo
