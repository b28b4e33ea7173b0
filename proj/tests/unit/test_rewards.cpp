#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <memory>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/rewards/rewards.hpp"

using namespace flowgrpo;

namespace {

struct Fixture {
  ToySpec spec;
  Dataset ds = gen_dataset(77, spec, 16, 16);
};

double min_pattern_separation(const Prototypes& p) {
  double best = 1e300;
  for (std::size_t i = 0; i < p.num_tokens(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double s = 0.0;
      for (std::size_t d = 0; d < p.token_dims(); ++d) {
        const double diff = p.token_patterns(i, d) - p.token_patterns(j, d);
        s += diff * diff;
      }
      best = std::min(best, std::sqrt(s));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("wer examples") {
  const std::vector<int> abcd{0, 1, 2, 3};
  CHECK(wer(abcd, abcd) == 0.0);
  CHECK(wer(abcd, std::vector<int>{0, 9, 2, 3}) == 0.25);
  CHECK(wer(std::vector<int>{0}, std::vector<int>{0, 1, 2}) == 2.0);
  CHECK(wer(abcd, std::vector<int>{}) == 1.0);
  CHECK(wer(abcd, std::vector<int>{1, 2, 3}) == 0.25);
  CHECK_THROWS_AS(wer(std::vector<int>{}, abcd), DomainError);
  // Same edit distance both ways, different normalization.
  const std::vector<int> ab{0, 1};
  CHECK(wer(ab, abcd) * 2 == wer(abcd, ab) * 4);
}

TEST_CASE("decode_tokens: exactness, noise margin and speaker invariance") {
  Fixture f;
  const Prototypes& p = f.ds.prototypes;
  const std::size_t ds = f.spec.speaker_dims;
  ToySpec clean = f.spec;
  clean.data_noise = 0.0;
  RngStream rng(1, "dec");
  TokenSeq tokens{std::vector<int>(clean.frames), clean.num_tokens};
  for (std::size_t l = 0; l < clean.frames; ++l) tokens.ids[l] = static_cast<int>(l % clean.num_tokens);
  const Utterance u = gen_utterance(rng, 0, tokens, clean, p);
  CHECK(decode_tokens(u.frames, p).ids == tokens.ids);

  // Perturbations shorter than half the closest pattern distance cannot flip a frame.
  const double margin = 0.49 * min_pattern_separation(p);
  DenseArray noisy = u.frames;
  for (std::size_t l = 0; l < clean.frames; ++l) {
    std::vector<double> dir(f.spec.token_dims);
    double norm = 0.0;
    for (double& v : dir) {
      v = rng.normal();
      norm += v * v;
    }
    for (std::size_t d = 0; d < dir.size(); ++d) noisy(l, ds + d) += margin * dir[d] / std::sqrt(norm);
  }
  CHECK(decode_tokens(noisy, p).ids == tokens.ids);

  DenseArray shifted = noisy;
  for (std::size_t l = 0; l < clean.frames; ++l)
    for (std::size_t d = 0; d < ds; ++d) shifted(l, d) += 10.0 * rng.normal();
  CHECK(decode_tokens(shifted, p).ids == tokens.ids);
  CHECK_THROWS_AS(decode_tokens(DenseArray::matrix(2, 3), p), DimensionError);
}

TEST_CASE("speaker_embed and cosine_sim") {
  DenseArray frames = DenseArray::matrix(3, 4);
  for (std::size_t l = 0; l < 3; ++l) {
    frames(l, 0) = 3.0;
    frames(l, 1) = 4.0;
    frames(l, 2) = static_cast<double>(l);  // content dims
  }
  const Embedding e = speaker_embed(frames, 2);
  CHECK(e.values[0] == doctest::Approx(0.6));
  CHECK(e.values[1] == doctest::Approx(0.8));

  DenseArray other = frames;
  other(0, 3) = 100.0;
  std::swap_ranges(other.row(0).begin(), other.row(0).end(), other.row(2).begin());
  const Embedding e2 = speaker_embed(other, 2);
  CHECK(e2.values == e.values);

  CHECK(cosine_sim(e, e) == doctest::Approx(1.0));
  CHECK(cosine_sim(Embedding{{1.0, 0.0}}, Embedding{{0.0, 1.0}}) == 0.0);
  CHECK(cosine_sim(e, normalized(std::vector<double>{-3.0, -4.0})) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(speaker_embed(DenseArray::matrix(2, 4), 2), DomainError);
  const Embedding n = normalized(std::vector<double>{1e-3, 2e-3, 2e-3});
  double sq = 0.0;
  for (double v : n.values) sq += v * v;
  CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-9);
}

TEST_CASE("combine_reward is linear") {
  CHECK(combine_reward(0.9, 0.7, 1.0, 1.0) == doctest::Approx(1.6));
  CHECK(combine_reward(0.9, 0.7, 2.0, 0.0) == doctest::Approx(1.8));
  CHECK(combine_reward(0.9 + 0.1, 0.7, 2.0, 3.0) - combine_reward(0.9, 0.7, 2.0, 3.0) == doctest::Approx(0.2));
  CHECK(combine_reward(0.9, 0.7 + 0.1, 2.0, 3.0) - combine_reward(0.9, 0.7, 2.0, 3.0) == doctest::Approx(0.3));
}

TEST_CASE("content and similarity rewards on ground truth and corrupted output") {
  Fixture f;
  const Prototypes& p = f.ds.prototypes;
  for (const Utterance& u : f.ds.test) {
    const ConditionPrompt prompt = make_prompt(u, 8);
    CHECK(content_reward(u.frames, prompt, u, p) == 1.0);
    CHECK(similarity_reward(u.frames, prompt, u, p) >= 0.999);
    CHECK(similarity_reward(u.frames, prompt, u, p, SimReference::PromptFrames) >= 0.99);
  }

  // Replace exactly 2 of the last 8 generated frames with a different token's pattern.
  const Utterance& u = f.ds.test[0];
  const ConditionPrompt prompt = make_prompt(u, 24);
  DenseArray out = u.frames;
  for (std::size_t l : {25u, 30u}) {
    const int wrong = (u.tokens.ids[l] + 1) % static_cast<int>(f.spec.num_tokens);
    for (std::size_t d = 0; d < f.spec.token_dims; ++d) {
      out(l, f.spec.speaker_dims + d) = p.token_patterns(static_cast<std::size_t>(wrong), d);
    }
  }
  CHECK(content_reward(out, prompt, u, p) == 0.75);

  // A constant token absent from the generated region costs one edit per frame.
  for (const Utterance& v : f.ds.test) {
    const ConditionPrompt vp = make_prompt(v, 24);
    const std::vector<int> region(v.tokens.ids.begin() + 24, v.tokens.ids.end());
    int absent = -1;
    for (int c = 0; c < static_cast<int>(f.spec.num_tokens) && absent < 0; ++c) {
      if (std::find(region.begin(), region.end(), c) == region.end()) absent = c;
    }
    if (absent < 0) continue;
    DenseArray garbage = v.frames;
    for (std::size_t l = 24; l < 32; ++l) {
      for (std::size_t d = 0; d < f.spec.token_dims; ++d) {
        garbage(l, f.spec.speaker_dims + d) = p.token_patterns(static_cast<std::size_t>(absent), d);
      }
    }
    CHECK(content_wer(garbage, vp, v, p) == 1.0);
    CHECK(content_reward(garbage, vp, v, p) == 0.0);
  }

  const auto shared = std::make_shared<const Prototypes>(p);
  const RewardFn cw = make_content_reward(shared, 2.0);
  const RewardFn sw = make_similarity_reward(shared, 0.5);
  CHECK(cw.weight == 2.0);
  CHECK(cw.fn(out, prompt, u) == 0.75);
  CHECK(sw.fn(u.frames, prompt, u) == similarity_reward(u.frames, prompt, u, p));
}
