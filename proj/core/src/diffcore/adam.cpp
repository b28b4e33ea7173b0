#include "flowgrpo/diffcore/adam.hpp"

#include <cmath>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

AdamState AdamState::for_params(const ParamSet& params, AdamConfig config) {
  AdamState state;
  state.config = config;
  for (const Param& p : params.entries()) {
    state.first_moment.emplace_back(p.value.shape());
    state.second_moment.emplace_back(p.value.shape());
  }
  return state;
}

void adam_update(ParamSet& params, AdamState& state) {
  const AdamConfig& cfg = state.config;
  if (!(cfg.lr >= 0.0)) throw DomainError("adam_update: learning rate must be non-negative");
  auto entries = params.entries();
  if (state.first_moment.size() != entries.size() || state.second_moment.size() != entries.size()) {
    throw DimensionError("adam_update: optimizer state does not match parameter count");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const Param& p = entries[i];
    require_same_shape(p.value, state.first_moment[i], "adam_update(first moment)");
    require_same_shape(p.value, state.second_moment[i], "adam_update(second moment)");
    if (!p.grad.all_finite()) {
      throw NumericError("adam_update: non-finite gradient in parameter '" + p.name + "'");
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(cfg.beta1, t);
  const double bias2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto w = entries[i].value.data();
    auto g = entries[i].grad.data();
    auto m = state.first_moment[i].data();
    auto v = state.second_moment[i].data();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      w[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
  params.mark_mutated();
}

double global_grad_norm(const ParamSet& params) noexcept {
  double sq = 0.0;
  for (const Param& p : params.entries()) {
    for (double g : p.grad.data()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_global_norm(ParamSet& params, double max_norm) {
  if (!(max_norm > 0.0)) throw DomainError("clip_global_norm: max_norm must be positive");
  const double norm = global_grad_norm(params);
  if (norm > max_norm) params.scale_grad(max_norm / norm);
  return norm;
}

}  // namespace flowgrpo
