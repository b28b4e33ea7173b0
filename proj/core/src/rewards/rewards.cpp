#include "flowgrpo/rewards/rewards.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

double wer(std::span<const int> ref, std::span<const int> hyp) {
  if (ref.empty()) throw DomainError("wer: reference sequence is empty");
  // Single-row dynamic program over hyp.
  std::vector<std::size_t> row(hyp.size() + 1);
  for (std::size_t j = 0; j <= hyp.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= ref.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= hyp.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return static_cast<double>(row[hyp.size()]) / static_cast<double>(ref.size());
}

TokenSeq decode_tokens(const DenseArray& frames, const Prototypes& prototypes) {
  require_rank(frames, 2, "decode_tokens");
  const std::size_t ds = prototypes.speaker_dims();
  const std::size_t dt = prototypes.token_dims();
  if (frames.cols() != ds + dt) {
    throw DimensionError("decode_tokens: frame width " + std::to_string(frames.cols()) +
                         " != " + std::to_string(ds + dt));
  }
  TokenSeq out{std::vector<int>(frames.rows()), prototypes.num_tokens()};
  for (std::size_t l = 0; l < frames.rows(); ++l) {
    auto content = frames.row(l).subspan(ds);
    double best = std::numeric_limits<double>::infinity();
    int best_id = 0;
    for (std::size_t k = 0; k < prototypes.num_tokens(); ++k) {
      auto pattern = prototypes.token_patterns.row(k);
      double sq = 0.0;
      for (std::size_t d = 0; d < dt; ++d) sq += (content[d] - pattern[d]) * (content[d] - pattern[d]);
      if (sq < best) {
        best = sq;
        best_id = static_cast<int>(k);
      }
    }
    out.ids[l] = best_id;
  }
  return out;
}

Embedding normalized(std::span<const double> v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw DomainError("speaker embedding: vector has zero (or non-finite) norm");
  }
  Embedding e{std::vector<double>(v.begin(), v.end())};
  for (double& x : e.values) x /= norm;
  return e;
}

Embedding speaker_embed(const DenseArray& frames, std::size_t speaker_dims) {
  require_rank(frames, 2, "speaker_embed");
  if (frames.rows() == 0) throw DomainError("speaker_embed: need at least one frame");
  if (speaker_dims == 0 || speaker_dims > frames.cols()) {
    throw DimensionError("speaker_embed: invalid speaker_dims");
  }
  std::vector<double> mean(speaker_dims, 0.0);
  for (std::size_t l = 0; l < frames.rows(); ++l) {
    auto row = frames.row(l);
    for (std::size_t d = 0; d < speaker_dims; ++d) mean[d] += row[d];
  }
  for (double& m : mean) m /= static_cast<double>(frames.rows());
  return normalized(mean);
}

double cosine_sim(const Embedding& a, const Embedding& b) {
  if (a.values.size() != b.values.size()) throw DimensionError("cosine_sim: length mismatch");
  double dot = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) dot += a.values[i] * b.values[i];
  return std::clamp(dot, -1.0, 1.0);
}

double combine_reward(double reward_w, double reward_s, double lambda_w, double lambda_s) noexcept {
  return lambda_w * reward_w + lambda_s * reward_s;
}

DenseArray masked_rows(const DenseArray& frames, const FrameMask& mask) {
  require_rank(frames, 2, "masked_rows");
  if (mask.size() != frames.rows()) throw DimensionError("masked_rows: mask length mismatch");
  const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  if (n == 0) throw DomainError("masked_rows: mask selects no frames");
  DenseArray out = DenseArray::matrix(n, frames.cols());
  std::size_t r = 0;
  for (std::size_t l = 0; l < frames.rows(); ++l) {
    if (!mask[l]) continue;
    auto src = frames.row(l);
    std::copy(src.begin(), src.end(), out.row(r++).begin());
  }
  return out;
}

std::vector<int> masked_ids(const TokenSeq& tokens, const FrameMask& mask) {
  if (mask.size() != tokens.ids.size()) throw DimensionError("masked_ids: mask length mismatch");
  std::vector<int> out;
  for (std::size_t l = 0; l < mask.size(); ++l) {
    if (mask[l]) out.push_back(tokens.ids[l]);
  }
  return out;
}

double content_wer(const DenseArray& output, const ConditionPrompt& prompt,
                   const Utterance& truth, const Prototypes& prototypes) {
  const TokenSeq decoded = decode_tokens(masked_rows(output, prompt.mask), prototypes);
  const std::vector<int> ref = masked_ids(truth.tokens, prompt.mask);
  return wer(ref, decoded.ids);
}

double content_reward(const DenseArray& output, const ConditionPrompt& prompt,
                      const Utterance& truth, const Prototypes& prototypes) {
  return std::max(0.0, 1.0 - content_wer(output, prompt, truth, prototypes));
}

double similarity_reward(const DenseArray& output, const ConditionPrompt& prompt,
                         const Utterance& truth, const Prototypes& prototypes,
                         SimReference reference) {
  const std::size_t ds = prototypes.speaker_dims();
  const Embedding generated = speaker_embed(masked_rows(output, prompt.mask), ds);
  if (reference == SimReference::PromptFrames) {
    return cosine_sim(generated, speaker_embed(prompt.prompt_frames, ds));
  }
  if (truth.speaker < 0 || static_cast<std::size_t>(truth.speaker) >= prototypes.num_speakers()) {
    throw DomainError("similarity_reward: invalid speaker id");
  }
  const Embedding target =
      normalized(prototypes.speaker_offsets.row(static_cast<std::size_t>(truth.speaker)));
  return cosine_sim(generated, target);
}

RewardFn make_content_reward(std::shared_ptr<const Prototypes> prototypes, double weight) {
  return RewardFn{"content", weight,
                  [protos = std::move(prototypes)](const DenseArray& o, const ConditionPrompt& p,
                                                   const Utterance& u) {
                    return content_reward(o, p, u, *protos);
                  }};
}

RewardFn make_similarity_reward(std::shared_ptr<const Prototypes> prototypes, double weight,
                                SimReference reference) {
  return RewardFn{"similarity", weight,
                  [protos = std::move(prototypes), reference](
                      const DenseArray& o, const ConditionPrompt& p, const Utterance& u) {
                    return similarity_reward(o, p, u, *protos, reference);
                  }};
}

}  // namespace flowgrpo
