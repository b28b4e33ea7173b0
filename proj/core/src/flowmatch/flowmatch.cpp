#include "flowgrpo/flowmatch/flowmatch.hpp"

#include <algorithm>
#include <cmath>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

std::string_view to_string(HeadKind kind) noexcept {
  return kind == HeadKind::Gaussian ? "gaussian" : "deterministic";
}

HeadKind head_kind_from_string(std::string_view name) {
  if (name == "gaussian") return HeadKind::Gaussian;
  if (name == "deterministic") return HeadKind::Deterministic;
  throw ConfigError("unknown head kind '" + std::string(name) +
                    "' (expected gaussian|deterministic)");
}

std::size_t head_width(HeadKind kind, std::size_t frame_dim) noexcept {
  return kind == HeadKind::Gaussian ? 2 * frame_dim : frame_dim;
}

HeadKind head_kind_of(const ParamSet& params, std::size_t frame_dim) {
  const std::size_t out = network_shape(params).output_dim;
  if (out == 2 * frame_dim) return HeadKind::Gaussian;
  if (out == frame_dim) return HeadKind::Deterministic;
  throw DimensionError("head width " + std::to_string(out) + " matches neither D nor 2D for D=" +
                       std::to_string(frame_dim));
}

DenseArray make_flow_input(const DenseArray& x0, const DenseArray& x1, double t) {
  require_same_shape(x0, x1, "make_flow_input");
  if (!(t >= 0.0 && t <= 1.0)) throw DomainError("make_flow_input: t must lie in [0, 1]");
  DenseArray out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (1.0 - t) * x0[i] + t * x1[i];
  return out;
}

DenseArray target_velocity(const DenseArray& x0, const DenseArray& x1) {
  require_same_shape(x0, x1, "target_velocity");
  DenseArray out(x0.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x1[i] - x0[i];
  return out;
}

GaussianField head_split(const DenseArray& raw_head) {
  require_rank(raw_head, 2, "head_split");
  if (raw_head.cols() % 2 != 0) {
    throw DimensionError("head_split: channel count " + std::to_string(raw_head.cols()) +
                         " is odd");
  }
  const std::size_t len = raw_head.rows();
  const std::size_t dim = raw_head.cols() / 2;
  GaussianField field{DenseArray::matrix(len, dim), DenseArray::matrix(len, dim),
                      DenseArray::matrix(len, dim)};
  for (std::size_t l = 0; l < len; ++l) {
    auto raw = raw_head.row(l);
    for (std::size_t d = 0; d < dim; ++d) {
      field.mu(l, d) = raw[d];
      const double ls = std::clamp(raw[dim + d], kLogSigmaMin, kLogSigmaMax);
      field.log_sigma(l, d) = ls;
      field.sigma(l, d) = std::exp(ls);
    }
  }
  return field;
}

DenseArray head_split_backward(const DenseArray& raw_head, const DenseArray& d_mu,
                               const DenseArray& d_log_sigma) {
  require_same_shape(d_mu, d_log_sigma, "head_split_backward");
  const std::size_t len = d_mu.rows();
  const std::size_t dim = d_mu.cols();
  if (raw_head.rows() != len || raw_head.cols() != 2 * dim) {
    throw DimensionError("head_split_backward: raw head " + raw_head.shape_string() +
                         " vs field " + d_mu.shape_string());
  }
  DenseArray grad = DenseArray::matrix(len, 2 * dim);
  for (std::size_t l = 0; l < len; ++l) {
    for (std::size_t d = 0; d < dim; ++d) {
      grad(l, d) = d_mu(l, d);
      const double raw = raw_head(l, dim + d);
      grad(l, dim + d) = (raw > kLogSigmaMin && raw < kLogSigmaMax) ? d_log_sigma(l, d) : 0.0;
    }
  }
  return grad;
}

namespace {

std::size_t checked_mask_count(const FrameMask& mask, std::size_t rows, const char* what) {
  if (mask.size() != rows) {
    throw DimensionError(std::string(what) + ": mask length " + std::to_string(mask.size()) +
                         " vs " + std::to_string(rows) + " frames");
  }
  const auto n = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
  if (n == 0) throw DomainError(std::string(what) + ": mask selects no frames");
  return n;
}

}  // namespace

GaussianLoss gaussian_nll_loss(const GaussianField& field, const DenseArray& target,
                               const FrameMask& mask) {
  require_same_shape(field.mu, target, "gaussian_nll_loss");
  require_same_shape(field.sigma, target, "gaussian_nll_loss");
  const std::size_t len = target.rows();
  const std::size_t dim = target.cols();
  const std::size_t count = checked_mask_count(mask, len, "gaussian_nll_loss") * dim;
  const double inv = 1.0 / static_cast<double>(count);

  GaussianLoss loss{0.0, DenseArray::matrix(len, dim), DenseArray::matrix(len, dim)};
  for (std::size_t l = 0; l < len; ++l) {
    if (!mask[l]) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      const double sigma = field.sigma(l, d);
      if (std::isnan(sigma)) throw NumericError("gaussian_nll_loss: sigma is NaN");
      if (!(sigma > 0.0)) throw DomainError("gaussian_nll_loss: sigma must be positive");
      const double err = field.mu(l, d) - target(l, d);
      const double inv_var = 1.0 / (sigma * sigma);
      loss.value += 0.5 * err * err * inv_var + std::log(sigma);
      loss.d_mu(l, d) = err * inv_var * inv;
      loss.d_log_sigma(l, d) = (1.0 - err * err * inv_var) * inv;
    }
  }
  loss.value *= inv;
  return loss;
}

MseLoss mse_cfm_loss(const DenseArray& v, const DenseArray& target, const FrameMask& mask) {
  require_same_shape(v, target, "mse_cfm_loss");
  require_rank(v, 2, "mse_cfm_loss");
  const std::size_t len = v.rows();
  const std::size_t dim = v.cols();
  const std::size_t count = checked_mask_count(mask, len, "mse_cfm_loss") * dim;
  const double inv = 1.0 / static_cast<double>(count);

  MseLoss loss{0.0, DenseArray::matrix(len, dim)};
  for (std::size_t l = 0; l < len; ++l) {
    if (!mask[l]) continue;
    for (std::size_t d = 0; d < dim; ++d) {
      const double err = v(l, d) - target(l, d);
      loss.value += err * err;
      loss.d_v(l, d) = 2.0 * err * inv;
    }
  }
  loss.value *= inv;
  return loss;
}

double sample_t(RngStream& rng) { return rng.uniform(); }

FrameMask make_infill_mask(RngStream& rng, std::size_t length, double ratio_lo, double ratio_hi) {
  if (length < 2) throw DomainError("make_infill_mask: need at least 2 frames");
  if (!(ratio_lo >= 0.0 && ratio_lo <= ratio_hi && ratio_hi <= 1.0)) {
    throw DomainError("make_infill_mask: ratio range must satisfy 0 <= lo <= hi <= 1");
  }
  const double ratio = ratio_lo + (ratio_hi - ratio_lo) * rng.uniform();
  auto masked = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(length)));
  masked = std::clamp<std::size_t>(masked, 1, length - 1);
  FrameMask mask(length, 0);
  std::fill(mask.end() - static_cast<long>(masked), mask.end(), std::uint8_t{1});
  return mask;
}

ConditionPrompt prompt_for_mask(const Utterance& utt, const FrameMask& mask) {
  const auto kept = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{0}));
  ConditionPrompt prompt = make_prompt(utt, kept);
  if (prompt.mask != mask) throw DomainError("prompt_for_mask: mask is not a contiguous suffix");
  return prompt;
}

void FlowBatch::validate() const {
  if (items.empty()) throw DomainError("FlowBatch: empty batch");
  for (const FlowSample& s : items) {
    s.prompt.validate();
    require_same_shape(s.x0, s.x1, "FlowBatch(x0, x1)");
    if (s.x1.rows() != s.prompt.length() || s.x1.cols() != s.prompt.frame_dim()) {
      throw DimensionError("FlowBatch: data shape does not match prompt");
    }
    if (!(s.t >= 0.0 && s.t <= 1.0)) throw DomainError("FlowBatch: t outside [0, 1]");
  }
}

FlowBatch sample_flow_batch(RngStream& rng, const std::vector<Utterance>& data,
                            std::size_t batch_size, double ratio_lo, double ratio_hi) {
  if (data.empty()) throw DomainError("sample_flow_batch: no training data");
  FlowBatch batch;
  batch.items.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const Utterance& utt = data[rng.next_u64() % data.size()];
    FrameMask mask = make_infill_mask(rng, utt.frames.rows(), ratio_lo, ratio_hi);
    FlowSample sample;
    sample.prompt = prompt_for_mask(utt, mask);
    sample.x1 = utt.frames;
    sample.x0 = standard_normal(rng, utt.frames.shape());
    sample.t = sample_t(rng);
    batch.items.push_back(std::move(sample));
  }
  return batch;
}

DenseArray flow_network_input(const FlowSample& sample) {
  DenseArray state = make_flow_input(sample.x0, sample.x1, sample.t);
  for (std::size_t l = 0; l < state.rows(); ++l) {
    if (sample.prompt.mask[l]) continue;
    auto dst = state.row(l);
    auto src = sample.x1.row(l);
    std::copy(src.begin(), src.end(), dst.begin());
  }
  return condition_encode(sample.prompt, state, sample.t);
}

double pretrain_loss_and_grad(ParamSet& params, const FlowBatch& batch,
                              const PretrainOptions& options) {
  batch.validate();
  const double inv_batch = 1.0 / static_cast<double>(batch.items.size());
  double total = 0.0;
  for (const FlowSample& sample : batch.items) {
    const FrameMask all_frames(sample.prompt.length(), 1);
    const FrameMask& mask = options.loss_on_all_frames ? all_frames : sample.prompt.mask;
    const DenseArray target = target_velocity(sample.x0, sample.x1);
    NetOutput out = net_forward(params, flow_network_input(sample));

    DenseArray head_grad;
    if (options.head == HeadKind::Gaussian) {
      if (out.head.cols() != 2 * target.cols()) {
        throw DimensionError("pretrain: Gaussian head needs 2D output channels");
      }
      GaussianLoss loss = gaussian_nll_loss(head_split(out.head), target, mask);
      total += loss.value;
      head_grad = head_split_backward(out.head, loss.d_mu, loss.d_log_sigma);
    } else {
      if (out.head.cols() != target.cols()) {
        throw DimensionError("pretrain: deterministic head needs D output channels");
      }
      MseLoss loss = mse_cfm_loss(out.head, target, mask);
      total += loss.value;
      head_grad = std::move(loss.d_v);
    }
    for (double& g : head_grad.data()) g *= inv_batch;
    net_backward(params, out.tape, head_grad);
  }
  return total * inv_batch;
}

PretrainStepResult pretrain_step(ParamSet& params, AdamState& optimizer, const FlowBatch& batch,
                                 const PretrainOptions& options) {
  params.zero_grad();
  PretrainStepResult result;
  result.loss = pretrain_loss_and_grad(params, batch, options);
  if (!std::isfinite(result.loss)) {
    throw NumericError("pretrain_step: non-finite loss " + std::to_string(result.loss));
  }
  result.grad_norm = clip_global_norm(params, options.max_grad_norm);
  if (!std::isfinite(result.grad_norm)) {
    throw NumericError("pretrain_step: non-finite gradient norm");
  }
  adam_update(params, optimizer);
  return result;
}

}  // namespace flowgrpo
