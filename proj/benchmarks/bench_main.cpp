#include <benchmark/benchmark.h>

#include "flowgrpo/diffcore/network.hpp"
#include "flowgrpo/flowmatch/flowmatch.hpp"
#include "flowgrpo/grpo/grpo.hpp"
#include "flowgrpo/policy/policy.hpp"
#include "flowgrpo/rewards/rewards.hpp"

using namespace flowgrpo;

namespace {

struct Setup {
  ToySpec spec;
  Dataset ds = gen_dataset(1, spec, 64, 8);
  ParamSet params;

  explicit Setup(std::size_t hidden) {
    RngStream rng(1, "bench");
    params = make_network(NetShape{condition_width(spec.frame_dim(), spec.num_tokens), hidden,
                                   head_width(HeadKind::Gaussian, spec.frame_dim())},
                          rng, 0.1);
  }
};

void BM_NetForward(benchmark::State& state) {
  Setup s(static_cast<std::size_t>(state.range(0)));
  const ConditionPrompt prompt = make_prompt(s.ds.train[0], s.spec.prompt_frames);
  const DenseArray input = condition_encode(prompt, s.ds.train[0].frames, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(net_forward(s.params, input));
}
BENCHMARK(BM_NetForward)->Arg(32)->Arg(64)->Arg(128);

void BM_PretrainStep(benchmark::State& state) {
  Setup s(64);
  AdamState opt = AdamState::for_params(s.params, AdamConfig{});
  std::size_t i = 0;
  for (auto _ : state) {
    RngStream rng(2, "b" + std::to_string(i++));
    const FlowBatch batch = sample_flow_batch(rng, s.ds.train, 16);
    benchmark::DoNotOptimize(pretrain_step(s.params, opt, batch, PretrainOptions{}));
  }
}
BENCHMARK(BM_PretrainStep);

void BM_Rollout(benchmark::State& state) {
  Setup s(64);
  const ConditionPrompt prompt = make_prompt(s.ds.train[0], s.spec.prompt_frames);
  RngStream rng(3, "x0");
  const DenseArray x0 = standard_normal(rng, s.ds.train[0].frames.shape());
  const std::size_t steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    RngStream r(3, "roll");
    benchmark::DoNotOptimize(rollout(s.params, prompt, x0, steps, RolloutMode::Stochastic, r));
  }
}
BENCHMARK(BM_Rollout)->Arg(8)->Arg(32);

void BM_GrpoStep(benchmark::State& state) {
  Setup s(64);
  const ParamSet reference = s.params;
  GrpoConfig cfg;
  AdamState opt = AdamState::for_params(s.params, AdamConfig{cfg.lr});
  std::vector<GrpoTask> tasks;
  for (std::size_t i = 0; i < 4; ++i) tasks.push_back({make_prompt(s.ds.train[i], s.spec.prompt_frames), s.ds.train[i]});
  const auto protos = std::make_shared<const Prototypes>(s.ds.prototypes);
  const std::vector<RewardFn> rewards{make_content_reward(protos, 1.0), make_similarity_reward(protos, 1.0)};
  std::size_t u = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(grpo_step(s.params, opt, reference, tasks, rewards, cfg, RngStream(4, "u" + std::to_string(u++))));
  }
}
BENCHMARK(BM_GrpoStep)->Unit(benchmark::kMillisecond);

void BM_Wer(benchmark::State& state) {
  RngStream rng(5, "wer");
  std::vector<int> a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = static_cast<int>(rng.next_u64() % 8);
    b[i] = static_cast<int>(rng.next_u64() % 8);
  }
  for (auto _ : state) benchmark::DoNotOptimize(wer(a, b));
}
BENCHMARK(BM_Wer)->Arg(24)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
