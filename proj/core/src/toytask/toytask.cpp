#include "flowgrpo/toytask/toytask.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

namespace {

constexpr std::size_t kMaxRejections = 10'000;

double row_distance(std::span<const double> a, std::span<const double> b) {
  double sq = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sq += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(sq);
}

// Fills `out` row by row; a candidate row is redrawn until it is far enough from all
// earlier rows (and from the origin when keep_off_origin is set).
void rejection_fill(RngStream& rng, DenseArray& out, double min_sep, bool keep_off_origin,
                    std::size_t& rejections) {
  std::vector<double> origin(out.cols(), 0.0);
  for (std::size_t r = 0; r < out.rows(); ++r) {
    for (;;) {
      auto row = out.row(r);
      for (double& v : row) v = rng.normal();
      bool ok = !keep_off_origin || row_distance(row, origin) >= min_sep;
      for (std::size_t q = 0; ok && q < r; ++q) ok = row_distance(row, out.row(q)) >= min_sep;
      if (ok) break;
      if (++rejections > kMaxRejections) {
        throw DomainError("gen_prototypes: spec infeasible, exceeded " +
                          std::to_string(kMaxRejections) + " rejections");
      }
    }
  }
}

}  // namespace

void ToySpec::validate() const {
  if (num_speakers == 0 || num_tokens == 0 || speaker_dims == 0 || token_dims == 0) {
    throw ConfigError("ToySpec: counts and dimensions must be positive");
  }
  if (prompt_frames < 1 || prompt_frames >= frames) {
    throw ConfigError("ToySpec: need 1 <= prompt_frames < frames");
  }
  if (!(data_noise >= 0.0) || !(min_separation > 0.0)) {
    throw ConfigError("ToySpec: data_noise must be >= 0 and min_separation > 0");
  }
}

void TokenSeq::validate() const {
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DomainError("TokenSeq: id " + std::to_string(id) + " outside vocabulary of " +
                        std::to_string(vocab));
    }
  }
}

std::size_t ConditionPrompt::masked_count() const noexcept {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void ConditionPrompt::validate() const {
  const std::size_t len = mask.size();
  require_rank(prompt_frames, 2, "ConditionPrompt(prompt_frames)");
  const std::size_t p = prompt_frames.rows();
  if (p < 1 || p >= len) throw DomainError("ConditionPrompt: need 1 <= P < L");
  if (tokens.ids.size() != len) throw DimensionError("ConditionPrompt: token count != L");
  for (std::size_t l = 0; l < len; ++l) {
    if (mask[l] != (l >= p ? 1 : 0)) throw DomainError("ConditionPrompt: mask inconsistent with P");
  }
  tokens.validate();
}

Prototypes gen_prototypes(std::uint64_t seed, const ToySpec& spec) {
  spec.validate();
  RngStream rng(seed, "prototypes");
  Prototypes protos{DenseArray::matrix(spec.num_speakers, spec.speaker_dims),
                    DenseArray::matrix(spec.num_tokens, spec.token_dims)};
  std::size_t rejections = 0;
  rejection_fill(rng, protos.speaker_offsets, spec.min_separation, true, rejections);
  rejection_fill(rng, protos.token_patterns, spec.min_separation, false, rejections);
  return protos;
}

Utterance gen_utterance(RngStream& rng, int speaker, TokenSeq tokens, const ToySpec& spec,
                        const Prototypes& prototypes) {
  if (speaker < 0 || static_cast<std::size_t>(speaker) >= prototypes.num_speakers()) {
    throw DomainError("gen_utterance: invalid speaker id " + std::to_string(speaker));
  }
  if (tokens.ids.size() != spec.frames) {
    throw DimensionError("gen_utterance: expected " + std::to_string(spec.frames) + " tokens");
  }
  tokens.vocab = prototypes.num_tokens();
  tokens.validate();

  const std::size_t ds = prototypes.speaker_dims();
  const std::size_t dt = prototypes.token_dims();
  Utterance utt{DenseArray::matrix(spec.frames, ds + dt), speaker, std::move(tokens)};
  auto offset = prototypes.speaker_offsets.row(static_cast<std::size_t>(speaker));
  for (std::size_t l = 0; l < spec.frames; ++l) {
    auto frame = utt.frames.row(l);
    auto pattern = prototypes.token_patterns.row(static_cast<std::size_t>(utt.tokens.ids[l]));
    for (std::size_t d = 0; d < ds; ++d) frame[d] = offset[d];
    for (std::size_t d = 0; d < dt; ++d) frame[ds + d] = pattern[d];
    for (double& v : frame) v += spec.data_noise * rng.normal();
  }
  return utt;
}

Dataset gen_dataset(std::uint64_t seed, const ToySpec& spec, std::size_t n_train,
                    std::size_t n_test) {
  spec.validate();
  if (spec.num_speakers < 4) throw ConfigError("gen_dataset: need at least 4 speakers to split");

  Dataset ds;
  ds.spec = spec;
  ds.prototypes = gen_prototypes(seed, spec);

  std::vector<int> order(spec.num_speakers);
  std::iota(order.begin(), order.end(), 0);
  RngStream shuffle(seed, "speaker-split");
  for (std::size_t i = order.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(shuffle.next_u64() % (i + 1));
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train_speakers = spec.num_speakers * 3 / 4;
  ds.train_speakers.assign(order.begin(), order.begin() + static_cast<long>(n_train_speakers));
  ds.test_speakers.assign(order.begin() + static_cast<long>(n_train_speakers), order.end());
  std::sort(ds.train_speakers.begin(), ds.train_speakers.end());
  std::sort(ds.test_speakers.begin(), ds.test_speakers.end());

  auto make_split = [&](const std::vector<int>& speakers, std::size_t n, const char* name) {
    std::vector<Utterance> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      RngStream rng(seed, std::string(name) + "/" + std::to_string(i));
      const int speaker = speakers[rng.next_u64() % speakers.size()];
      TokenSeq tokens{std::vector<int>(spec.frames), spec.num_tokens};
      for (int& id : tokens.ids) id = static_cast<int>(rng.next_u64() % spec.num_tokens);
      out.push_back(gen_utterance(rng, speaker, std::move(tokens), spec, ds.prototypes));
    }
    return out;
  };
  ds.train = make_split(ds.train_speakers, n_train, "train");
  ds.test = make_split(ds.test_speakers, n_test, "test");
  return ds;
}

ConditionPrompt make_prompt(const Utterance& utt, std::size_t prompt_frames) {
  require_rank(utt.frames, 2, "make_prompt");
  const std::size_t len = utt.frames.rows();
  const std::size_t dim = utt.frames.cols();
  if (prompt_frames < 1 || prompt_frames >= len) {
    throw DomainError("make_prompt: need 1 <= P < L (P=" + std::to_string(prompt_frames) +
                      ", L=" + std::to_string(len) + ")");
  }
  ConditionPrompt prompt;
  prompt.tokens = utt.tokens;
  prompt.speaker = utt.speaker;
  prompt.prompt_frames = DenseArray::matrix(prompt_frames, dim);
  std::copy_n(utt.frames.data().begin(), prompt_frames * dim, prompt.prompt_frames.data().begin());
  prompt.mask.assign(len, 1);
  std::fill_n(prompt.mask.begin(), prompt_frames, std::uint8_t{0});
  return prompt;
}

std::size_t condition_width(std::size_t frame_dim, std::size_t vocab) noexcept {
  return 2 * frame_dim + vocab + 4;
}

DenseArray condition_encode(const ConditionPrompt& prompt, const DenseArray& state, double t) {
  require_rank(state, 2, "condition_encode(state)");
  const std::size_t len = prompt.length();
  const std::size_t dim = prompt.frame_dim();
  const std::size_t vocab = prompt.tokens.vocab;
  if (state.rows() != len || state.cols() != dim) {
    throw DimensionError("condition_encode: state " + state.shape_string() + " vs prompt [" +
                         std::to_string(len) + "x" + std::to_string(dim) + "]");
  }
  if (prompt.tokens.ids.size() != len) throw DimensionError("condition_encode: token count != L");

  const double two_pi_t = 2.0 * std::numbers::pi * t;
  const double sin_t = std::sin(two_pi_t);
  const double cos_t = std::cos(two_pi_t);
  const std::size_t p = prompt.prompt_length();

  DenseArray out = DenseArray::matrix(len, condition_width(dim, vocab));
  for (std::size_t l = 0; l < len; ++l) {
    auto row = out.row(l);
    auto s = state.row(l);
    std::copy(s.begin(), s.end(), row.begin());
    if (l < p && !prompt.mask[l]) {
      auto pf = prompt.prompt_frames.row(l);
      std::copy(pf.begin(), pf.end(), row.begin() + static_cast<long>(dim));
    }
    const int id = prompt.tokens.ids[l];
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DomainError("condition_encode: token id out of range");
    }
    row[2 * dim + static_cast<std::size_t>(id)] = 1.0;
    std::size_t k = 2 * dim + vocab;
    row[k++] = prompt.mask[l] ? 1.0 : 0.0;
    row[k++] = t;
    row[k++] = sin_t;
    row[k] = cos_t;
  }
  return out;
}

}  // namespace flowgrpo
