#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

// Reward contract: (generated frames o, prompt, ground-truth utterance) -> finite scalar.
// Implementations must not mutate their inputs and may be called concurrently. Any
// callable works, so a reward backed by an external process (a real transcriber, a
// speaker-verification service) can be adapted by wrapping the call in a RewardFn.
struct RewardFn {
  using Fn = std::function<double(const DenseArray& output, const ConditionPrompt& prompt,
                                  const Utterance& truth)>;
  std::string name;
  double weight = 1.0;
  Fn fn;
};

// Unit-norm vector.
struct Embedding {
  std::vector<double> values;
};

// Levenshtein distance (unit substitution/insertion/deletion cost) over len(ref).
// Can exceed 1 when hyp is longer than ref.
double wer(std::span<const int> ref, std::span<const int> hyp);

// Nearest token pattern (squared distance over the content dims) per frame. Ties go
// to the lowest token id.
TokenSeq decode_tokens(const DenseArray& frames, const Prototypes& prototypes);

// Mean of the speaker dims over the given frames, L2-normalized. Throws DomainError
// on an all-zero mean.
Embedding speaker_embed(const DenseArray& frames, std::size_t speaker_dims);
Embedding normalized(std::span<const double> v);

double cosine_sim(const Embedding& a, const Embedding& b);

double combine_reward(double reward_w, double reward_s, double lambda_w, double lambda_s) noexcept;

// Rows of `frames` where mask is 1.
DenseArray masked_rows(const DenseArray& frames, const FrameMask& mask);
std::vector<int> masked_ids(const TokenSeq& tokens, const FrameMask& mask);

// WER of the decoded generated region against the ground-truth tokens there.
double content_wer(const DenseArray& output, const ConditionPrompt& prompt,
                   const Utterance& truth, const Prototypes& prototypes);

// max(0, 1 - content_wer).
double content_reward(const DenseArray& output, const ConditionPrompt& prompt,
                      const Utterance& truth, const Prototypes& prototypes);

enum class SimReference {
  SpeakerPrototype,  // normalized population offset of the true speaker
  PromptFrames,      // embedding of the prompt frames of the reference utterance
};

// Cosine between the speaker embedding of the generated region and the reference.
double similarity_reward(const DenseArray& output, const ConditionPrompt& prompt,
                         const Utterance& truth, const Prototypes& prototypes,
                         SimReference reference = SimReference::SpeakerPrototype);

RewardFn make_content_reward(std::shared_ptr<const Prototypes> prototypes, double weight);
RewardFn make_similarity_reward(std::shared_ptr<const Prototypes> prototypes, double weight,
                                SimReference reference = SimReference::SpeakerPrototype);

}  // namespace flowgrpo
