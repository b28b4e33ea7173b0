#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/diffcore/rng.hpp"

namespace flowgrpo {

// Synthetic stand-in for zero-shot voice cloning. Each frame is the concatenation of a
// speaker offset (first speaker_dims channels) and the pattern of the frame's content
// token (remaining token_dims channels), plus isotropic noise. Speaker and content
// therefore live on disjoint dimensions.
struct ToySpec {
  std::size_t num_speakers = 16;
  std::size_t num_tokens = 8;
  std::size_t speaker_dims = 4;
  std::size_t token_dims = 4;
  std::size_t frames = 32;
  std::size_t prompt_frames = 8;
  double data_noise = 0.1;
  double min_separation = 1.0;

  std::size_t frame_dim() const noexcept { return speaker_dims + token_dims; }
  void validate() const;

  friend bool operator==(const ToySpec&, const ToySpec&) = default;
};

// 1 = frame is generated (masked), 0 = frame is given by the prompt.
using FrameMask = std::vector<std::uint8_t>;

struct TokenSeq {
  std::vector<int> ids;
  std::size_t vocab = 0;

  void validate() const;
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

struct Prototypes {
  DenseArray speaker_offsets;  // num_speakers x speaker_dims
  DenseArray token_patterns;   // num_tokens x token_dims

  std::size_t speaker_dims() const { return speaker_offsets.cols(); }
  std::size_t token_dims() const { return token_patterns.cols(); }
  std::size_t num_speakers() const { return speaker_offsets.rows(); }
  std::size_t num_tokens() const { return token_patterns.rows(); }
};

struct Utterance {
  DenseArray frames;  // L x D
  int speaker = 0;
  TokenSeq tokens;    // length L
};

// What the model is conditioned on: the full token sequence, the first P frames of the
// reference utterance and the infill mask. The speaker id is carried for the reward
// oracles only and is never encoded into network inputs.
struct ConditionPrompt {
  TokenSeq tokens;
  DenseArray prompt_frames;  // P x D
  FrameMask mask;            // length L; 0 on the first P frames, 1 afterwards
  int speaker = -1;

  std::size_t length() const noexcept { return mask.size(); }
  std::size_t prompt_length() const { return prompt_frames.rows(); }
  std::size_t frame_dim() const { return prompt_frames.cols(); }
  std::size_t masked_count() const noexcept;
  void validate() const;
};

struct Dataset {
  ToySpec spec;
  Prototypes prototypes;
  std::vector<int> train_speakers;
  std::vector<int> test_speakers;
  std::vector<Utterance> train;
  std::vector<Utterance> test;
};

// Rejection-samples N(0, 1) prototypes until every pair (and every speaker offset's
// distance from the origin) is at least spec.min_separation. Throws DomainError after
// 10'000 rejections.
Prototypes gen_prototypes(std::uint64_t seed, const ToySpec& spec);

Utterance gen_utterance(RngStream& rng, int speaker, TokenSeq tokens, const ToySpec& spec,
                        const Prototypes& prototypes);

// Speakers are split 75/25 into disjoint train/test sets; test speakers are unseen
// during training.
Dataset gen_dataset(std::uint64_t seed, const ToySpec& spec, std::size_t n_train,
                    std::size_t n_test);

ConditionPrompt make_prompt(const Utterance& utt, std::size_t prompt_frames);

// Per frame: [state (D), prompt frame or zeros (D), one-hot token (K), mask bit,
// t, sin 2*pi*t, cos 2*pi*t].
DenseArray condition_encode(const ConditionPrompt& prompt, const DenseArray& state, double t);

std::size_t condition_width(std::size_t frame_dim, std::size_t vocab) noexcept;

}  // namespace flowgrpo
