#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "flowgrpo/diffcore/dense_array.hpp"
#include "flowgrpo/diffcore/params.hpp"
#include "flowgrpo/diffcore/rng.hpp"
#include "flowgrpo/rewards/rewards.hpp"
#include "flowgrpo/toytask/toytask.hpp"

namespace flowgrpo {

struct SampleResult {
  int speaker = 0;
  double wer = 0.0;
  double sim = 0.0;
};

struct SpeakerStats {
  int speaker = 0;
  double mean_wer = 0.0;
  double mean_sim = 0.0;
  std::size_t count = 0;
};

struct EvalReport {
  std::vector<SampleResult> samples;
  std::vector<SpeakerStats> per_speaker;  // sorted by speaker id
  double mean_wer = 0.0;
  double mean_sim = 0.0;
  DenseArray gv_truth;  // D, over the generated region of the ground truth
  DenseArray gv_model;  // D, over the generated region of the model output
  std::size_t count = 0;
  std::size_t failures = 0;
};

// Per-dimension population variance pooled over every frame of every utterance.
DenseArray global_variance(std::span<const DenseArray> utterances);

// Mean absolute difference between two GV curves.
double gv_distance(const DenseArray& a, const DenseArray& b);

struct EvalOptions {
  std::size_t n_steps = 32;
  std::size_t prompt_frames = 8;
  SimReference sim_reference = SimReference::SpeakerPrototype;
};

// Mean-mode rollout from each test utterance's prompt; x0 for item i comes from
// rng.split("item<i>"). Rollout failures are counted and skipped.
EvalReport eval_model(const ParamSet& params, const std::vector<Utterance>& testset,
                      const Prototypes& prototypes, const EvalOptions& options,
                      const RngStream& rng);

// Scores the test utterances themselves in place of model output.
EvalReport eval_ground_truth(const std::vector<Utterance>& testset, const Prototypes& prototypes,
                             const EvalOptions& options);

struct Projection {
  DenseArray coords;           // n x k'
  DenseArray components;       // k' x dim, orthonormal rows
  std::vector<double> variance;  // variance captured by each component
  double total_variance = 0.0;
  std::vector<std::string> warnings;
};

// Centres the points and projects them onto the top-k principal directions found by
// power iteration with deflation (tolerance 1e-10, at most 1000 iterations each).
// Returns fewer than k components, with a warning, when the data has lower rank.
Projection pca_project(std::span<const std::vector<double>> points, std::size_t k = 2);

// eval CSV: speaker_id,wer,sim ; GV CSV: dim_index,gv_gt,gv_model
void write_eval_csv(std::ostream& out, const EvalReport& report);
void write_gv_csv(std::ostream& out, const EvalReport& report);

}  // namespace flowgrpo
