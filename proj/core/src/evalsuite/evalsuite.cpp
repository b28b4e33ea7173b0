#include "flowgrpo/evalsuite/evalsuite.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "flowgrpo/diffcore/errors.hpp"
#include "flowgrpo/diffcore/format.hpp"
#include "flowgrpo/policy/policy.hpp"

namespace flowgrpo {

DenseArray global_variance(std::span<const DenseArray> utterances) {
  if (utterances.empty()) throw DomainError("global_variance: no utterances");
  const std::size_t dim = utterances.front().cols();
  std::size_t frames = 0;
  std::vector<double> mean(dim, 0.0);
  for (const DenseArray& u : utterances) {
    require_rank(u, 2, "global_variance");
    if (u.cols() != dim) throw DimensionError("global_variance: frame widths differ");
    for (std::size_t l = 0; l < u.rows(); ++l) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += u(l, d);
    }
    frames += u.rows();
  }
  if (frames < 2) throw DomainError("global_variance: need at least 2 frames");
  for (double& m : mean) m /= static_cast<double>(frames);

  DenseArray gv({dim});
  for (const DenseArray& u : utterances) {
    for (std::size_t l = 0; l < u.rows(); ++l) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = u(l, d) - mean[d];
        gv[d] += c * c;
      }
    }
  }
  for (double& v : gv.data()) v /= static_cast<double>(frames);
  return gv;
}

double gv_distance(const DenseArray& a, const DenseArray& b) {
  require_same_shape(a, b, "gv_distance");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a[i] - b[i]);
  return sum / static_cast<double>(a.size());
}

namespace {

void finalize(EvalReport& report, const std::vector<DenseArray>& truth_regions,
              const std::vector<DenseArray>& model_regions) {
  report.count = report.samples.size();
  std::map<int, SpeakerStats> by_speaker;
  for (const SampleResult& s : report.samples) {
    report.mean_wer += s.wer;
    report.mean_sim += s.sim;
    SpeakerStats& st = by_speaker[s.speaker];
    st.speaker = s.speaker;
    st.mean_wer += s.wer;
    st.mean_sim += s.sim;
    ++st.count;
  }
  if (report.count > 0) {
    report.mean_wer /= static_cast<double>(report.count);
    report.mean_sim /= static_cast<double>(report.count);
  }
  for (auto& [id, st] : by_speaker) {
    st.mean_wer /= static_cast<double>(st.count);
    st.mean_sim /= static_cast<double>(st.count);
    report.per_speaker.push_back(st);
  }
  if (!truth_regions.empty()) {
    report.gv_truth = global_variance(truth_regions);
    report.gv_model = global_variance(model_regions);
  }
}

}  // namespace

EvalReport eval_model(const ParamSet& params, const std::vector<Utterance>& testset,
                      const Prototypes& prototypes, const EvalOptions& options,
                      const RngStream& rng) {
  if (testset.empty()) throw DomainError("eval_model: empty test set");
  EvalReport report;
  std::vector<DenseArray> truth_regions, model_regions;
  for (std::size_t i = 0; i < testset.size(); ++i) {
    const Utterance& utt = testset[i];
    try {
      const ConditionPrompt prompt = make_prompt(utt, options.prompt_frames);
      RngStream stream = rng.split("item" + std::to_string(i));
      const DenseArray x0 = standard_normal(stream, utt.frames.shape());
      const Trajectory traj =
          rollout(params, prompt, x0, options.n_steps, RolloutMode::Mean, stream);
      SampleResult s;
      s.speaker = utt.speaker;
      s.wer = content_wer(traj.output, prompt, utt, prototypes);
      s.sim = similarity_reward(traj.output, prompt, utt, prototypes, options.sim_reference);
      report.samples.push_back(s);
      truth_regions.push_back(masked_rows(utt.frames, prompt.mask));
      model_regions.push_back(masked_rows(traj.output, prompt.mask));
    } catch (const Error&) {
      ++report.failures;
    }
  }
  finalize(report, truth_regions, model_regions);
  return report;
}

EvalReport eval_ground_truth(const std::vector<Utterance>& testset, const Prototypes& prototypes,
                             const EvalOptions& options) {
  if (testset.empty()) throw DomainError("eval_ground_truth: empty test set");
  EvalReport report;
  std::vector<DenseArray> regions;
  for (const Utterance& utt : testset) {
    const ConditionPrompt prompt = make_prompt(utt, options.prompt_frames);
    SampleResult s;
    s.speaker = utt.speaker;
    s.wer = content_wer(utt.frames, prompt, utt, prototypes);
    s.sim = similarity_reward(utt.frames, prompt, utt, prototypes, options.sim_reference);
    report.samples.push_back(s);
    regions.push_back(masked_rows(utt.frames, prompt.mask));
  }
  finalize(report, regions, regions);
  return report;
}

Projection pca_project(std::span<const std::vector<double>> points, std::size_t k) {
  if (k == 0) throw DomainError("pca_project: k must be positive");
  if (points.size() < k + 1) throw DomainError("pca_project: need at least k + 1 points");
  const std::size_t n = points.size();
  const std::size_t dim = points.front().size();
  if (dim == 0) throw DimensionError("pca_project: zero-dimensional points");

  DenseArray centred = DenseArray::matrix(n, dim);
  std::vector<double> mean(dim, 0.0);
  for (const auto& p : points) {
    if (p.size() != dim) throw DimensionError("pca_project: points have different lengths");
    for (std::size_t d = 0; d < dim; ++d) mean[d] += p[d];
  }
  for (double& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < dim; ++d) centred(i, d) = points[i][d] - mean[d];
  }

  DenseArray cov = DenseArray::matrix(dim, dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) cov(a, b) += centred(i, a) * centred(i, b);
    }
  }
  for (double& c : cov.data()) c /= static_cast<double>(n);

  Projection proj;
  for (std::size_t d = 0; d < dim; ++d) proj.total_variance += cov(d, d);

  std::vector<std::vector<double>> components;
  const std::size_t wanted = std::min(k, dim);
  if (wanted < k) proj.warnings.push_back("requested more components than dimensions");
  for (std::size_t c = 0; c < wanted; ++c) {
    // Start from the column with the largest norm; it cannot be orthogonal to the top
    // eigenvector unless the deflated matrix vanishes.
    std::size_t best_col = 0;
    double best_norm = -1.0;
    for (std::size_t b = 0; b < dim; ++b) {
      double sq = 0.0;
      for (std::size_t a = 0; a < dim; ++a) sq += cov(a, b) * cov(a, b);
      if (sq > best_norm) {
        best_norm = sq;
        best_col = b;
      }
    }
    if (best_norm <= 1e-24 * std::max(1.0, proj.total_variance * proj.total_variance)) {
      proj.warnings.push_back("data rank is " + std::to_string(c) + " < " + std::to_string(k) +
                              "; returning " + std::to_string(c) + " component(s)");
      break;
    }
    std::vector<double> v(dim);
    for (std::size_t a = 0; a < dim; ++a) v[a] = cov(a, best_col);
    auto normalize = [](std::vector<double>& x) {
      double sq = 0.0;
      for (double e : x) sq += e * e;
      const double norm = std::sqrt(sq);
      for (double& e : x) e /= norm;
      return norm;
    };
    normalize(v);
    std::vector<double> next(dim);
    bool converged = false;
    for (int iter = 0; iter < 1000 && !converged; ++iter) {
      for (std::size_t a = 0; a < dim; ++a) {
        double s = 0.0;
        for (std::size_t b = 0; b < dim; ++b) s += cov(a, b) * v[b];
        next[a] = s;
      }
      if (normalize(next) == 0.0) break;
      double diff = 0.0;
      for (std::size_t a = 0; a < dim; ++a) diff = std::max(diff, std::abs(next[a] - v[a]));
      converged = diff < 1e-10;
      v = next;
    }
    if (!converged) proj.warnings.push_back("power iteration hit the iteration cap");
    double lambda = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) lambda += v[a] * cov(a, b) * v[b];
    }
    for (std::size_t a = 0; a < dim; ++a) {
      for (std::size_t b = 0; b < dim; ++b) cov(a, b) -= lambda * v[a] * v[b];
    }
    proj.variance.push_back(lambda);
    components.push_back(std::move(v));
  }

  const std::size_t kept = components.size();
  if (kept == 0) {
    proj.coords = DenseArray::matrix(n, 1);
    proj.components = DenseArray::matrix(1, dim);
    proj.variance.assign(1, 0.0);
    return proj;
  }
  proj.components = DenseArray::matrix(kept, dim);
  proj.coords = DenseArray::matrix(n, kept);
  for (std::size_t c = 0; c < kept; ++c) {
    std::copy(components[c].begin(), components[c].end(), proj.components.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t d = 0; d < dim; ++d) s += centred(i, d) * components[c][d];
      proj.coords(i, c) = s;
    }
  }
  return proj;
}

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "speaker_id,wer,sim\n";
  for (const SampleResult& s : report.samples) {
    out << s.speaker << ',' << format_double(s.wer) << ',' << format_double(s.sim) << '\n';
  }
}

void write_gv_csv(std::ostream& out, const EvalReport& report) {
  out << "dim_index,gv_gt,gv_model\n";
  for (std::size_t d = 0; d < report.gv_truth.size(); ++d) {
    out << d << ',' << format_double(report.gv_truth[d]) << ','
        << format_double(report.gv_model[d]) << '\n';
  }
}

}  // namespace flowgrpo
