#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/harness/checkpoint.hpp"
#include "flowgrpo/harness/commands.hpp"
#include "flowgrpo/harness/config.hpp"
#include "flowgrpo/harness/io.hpp"

using namespace flowgrpo;
namespace fs = std::filesystem;

namespace {

constexpr const char* kTinyConfig = R"({
  "seed": 7, "num_speakers": 4, "num_tokens": 3, "speaker_dims": 1, "token_dims": 1,
  "frames": 4, "prompt_frames": 1, "min_separation": 0.5, "n_train": 8, "n_test": 4,
  "hidden_dim": 6, "pretrain_steps": 5, "pretrain_batch": 2, "grpo_updates": 2,
  "grpo_prompts_per_update": 2, "grpo_group_size": 2, "grpo_steps": 2, "eval_steps": 2
})";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("flowgrpo_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

RunConfig tiny() { return parse_config(kTinyConfig); }

}  // namespace

TEST_CASE("config parsing is strict") {
  const RunConfig c = tiny();
  CHECK(c.seed == 7);
  CHECK(c.toy.frames == 4);
  CHECK(c.grpo.group_size == 2);
  CHECK(c.grpo.lr == 1e-4);

  CHECK_THROWS_AS(parse_config(R"({"num_tokens": 3})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "sead": 2})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": "1"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": -1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "grpo_group_size": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"seed": 1, "head": "laplace"})"), ConfigError);
  CHECK_THROWS_AS(parse_config("{\"seed\": 1"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);

  // The canonical form parses back to the same canonical form.
  const std::string canon = config_to_json(c);
  CHECK(config_to_json(parse_config(canon)) == canon);
}

TEST_CASE("checkpoint round trip is exact") {
  const RunConfig cfg = tiny();
  Checkpoint ckpt;
  ckpt.config = cfg;
  ckpt.step = 3;
  ckpt.params = init_params(cfg);
  // Values that stress decimal round-tripping.
  Param& p = ckpt.params.entries()[0];
  p.value[0] = 0.1 + 0.2;
  p.value[1] = std::nextafter(1.0, 2.0);
  p.value[2] = -4.9406564584124654e-324;
  p.value[3] = 1.7976931348623157e308;
  ckpt.optimizer = AdamState::for_params(ckpt.params, AdamConfig{});

  const std::string bytes = serialize_checkpoint(ckpt);
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(serialize_checkpoint(back) == bytes);
  CHECK(back.params.values_equal(ckpt.params));
  CHECK(back.params.value_hash() == ckpt.params.value_hash());
  CHECK(back.step == 3);
  CHECK(back.phase == Phase::Pretrained);

  TempDir dir("ckpt");
  save_checkpoint(ckpt, dir.path / "a.ckpt");
  CHECK(read_file(dir.path / "a.ckpt") == bytes);
  CHECK(load_checkpoint(dir.path / "a.ckpt").params.values_equal(ckpt.params));

  for (std::size_t cut : {std::size_t{0}, std::size_t{10}, bytes.size() / 2, bytes.size() - 2}) {
    INFO("cut at " << cut);
    CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, cut)), ParseError);
  }
  try {
    parse_checkpoint(bytes.substr(0, bytes.size() / 2));
  } catch (const ParseError& e) {
    CHECK(e.byte_offset() > 0);
  }

  std::string bumped = bytes;
  const std::size_t at = bumped.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  bumped.replace(at, 11, "\"version\":2");
  CHECK_THROWS_AS(parse_checkpoint(bumped), ContractError);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "missing.ckpt"), IoError);
}

TEST_CASE("dataset serialization round trip") {
  const Dataset ds = dataset_for(tiny());
  const std::string bytes = serialize_dataset(ds);
  const Dataset back = parse_dataset(bytes);
  CHECK(serialize_dataset(back) == bytes);
  REQUIRE(back.test.size() == ds.test.size());
  for (std::size_t i = 0; i < ds.test.size(); ++i) CHECK(back.test[i].frames == ds.test[i].frames);
  CHECK(back.prototypes.token_patterns == ds.prototypes.token_patterns);
  CHECK(back.spec == ds.spec);
}

TEST_CASE("commands: zero steps, reruns and phase checks") {
  TempDir a("cmd_a"), b("cmd_b");
  std::ostringstream log;
  RunConfig zero = tiny();
  zero.pretrain_steps = 0;
  const PretrainResult z = cmd_pretrain(zero, a.path / "zero", log);
  CHECK(load_checkpoint(z.checkpoint).params.values_equal(init_params(zero)));

  const RunConfig cfg = tiny();
  const PretrainResult p1 = cmd_pretrain(cfg, a.path, log);
  const PretrainResult p2 = cmd_pretrain(cfg, b.path, log);
  CHECK(read_file(p1.checkpoint) == read_file(p2.checkpoint));
  CHECK(read_file(p1.metrics) == read_file(p2.metrics));
  CHECK(read_file(p1.metrics).rfind("step,loss,wall_ms\n", 0) == 0);

  const GrpoResult g1 = cmd_grpo(cfg, p1.checkpoint, a.path, log);
  const GrpoResult g2 = cmd_grpo(cfg, p2.checkpoint, b.path, log);
  CHECK(g1.reference_hash_before == g1.reference_hash_after);
  CHECK(read_file(g1.checkpoint) == read_file(g2.checkpoint));
  CHECK(read_file(g1.metrics) == read_file(g2.metrics));
  CHECK(read_file(g1.metrics).rfind("update,objective,reward_mean,reward_w,reward_s,kl_mean,grad_norm\n", 0) == 0);
  CHECK(load_checkpoint(g1.checkpoint).phase == Phase::Grpo);

  CHECK_THROWS_AS(cmd_grpo(cfg, g1.checkpoint, a.path / "again", log), ContractError);
  CHECK_THROWS_AS(cmd_grpo(cfg, a.path / "nope.ckpt", a.path, log), IoError);

  const std::vector<fs::path> ckpts{p1.checkpoint, g1.checkpoint};
  const auto e1 = cmd_eval(cfg, ckpts, a.path / "eval1", log);
  const auto e2 = cmd_eval(cfg, ckpts, a.path / "eval2", log);
  REQUIRE(e1.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(read_file(e1[i].eval_csv) == read_file(e2[i].eval_csv));
    CHECK(read_file(e1[i].gv_csv) == read_file(e2[i].gv_csv));
  }
  CHECK(read_file(a.path / "eval1" / "eval_summary.csv") == read_file(a.path / "eval2" / "eval_summary.csv"));
  CHECK_THROWS_AS(cmd_eval(cfg, {a.path / "nope.ckpt"}, a.path / "eval3", log), IoError);

  const fs::path sample = cmd_sample(cfg, p1.checkpoint, 0, {0, 1, 2, 1}, a.path / "s1", log);
  const std::string text = read_file(sample);
  CHECK(text.rfind("frame_index,dim_0,dim_1\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 5);
  CHECK(read_file(cmd_sample(cfg, p1.checkpoint, 0, {0, 1, 2, 1}, a.path / "s2", log)) == text);
  CHECK_THROWS_AS(cmd_sample(cfg, p1.checkpoint, 9, {0, 1, 2, 1}, a.path / "s3", log), DomainError);
  CHECK_THROWS_AS(cmd_sample(cfg, p1.checkpoint, 0, {0, 1}, a.path / "s3", log), DomainError);
  CHECK_THROWS_AS(cmd_sample(cfg, p1.checkpoint, 0, {0, 1, 7, 1}, a.path / "s3", log), DomainError);

  CHECK(read_file(cmd_gv(cfg, g1.checkpoint, a.path / "gv", log)).rfind("dim_index,gv_gt,gv_model\n", 0) == 0);
}

TEST_CASE("exit codes") {
  std::ostringstream err;
  auto code_for = [&](auto thrower) {
    try {
      thrower();
    } catch (...) {
      return exit_code_for_current_exception(err);
    }
    return -1;
  };
  CHECK(code_for([] { throw ConfigError("x"); }) == kExitConfig);
  CHECK(code_for([] { throw NumericError("x"); }) == kExitNumeric);
  CHECK(code_for([] { throw IoError("x"); }) == kExitIo);
  CHECK(code_for([] { throw ParseError("x", 3); }) == kExitIo);
  CHECK(code_for([] { throw DomainError("x"); }) == kExitConfig);
  CHECK(code_for([] { throw std::runtime_error("x"); }) == 1);
}
