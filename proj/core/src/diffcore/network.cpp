#include "flowgrpo/diffcore/network.hpp"

#include <cmath>
#include <span>

#include "flowgrpo/diffcore/errors.hpp"

namespace flowgrpo {

namespace {

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// out += scale * v
inline void axpy(std::span<double> out, double scale, std::span<const double> v) noexcept {
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += scale * v[i];
}

DenseArray scaled_normal(RngStream& rng, std::size_t rows, std::size_t cols, double scale) {
  DenseArray w = DenseArray::matrix(rows, cols);
  for (double& v : w.data()) v = scale * rng.normal();
  return w;
}

}  // namespace

ParamSet make_network(const NetShape& shape, RngStream& rng, double head_scale) {
  if (shape.input_dim == 0 || shape.hidden_dim == 0 || shape.output_dim == 0) {
    throw DimensionError("make_network: all dimensions must be positive");
  }
  const std::size_t in = shape.input_dim;
  const std::size_t hid = shape.hidden_dim;
  const std::size_t out = shape.output_dim;

  ParamSet params;
  params.add(kInWeight, scaled_normal(rng, hid, 2 * in, 1.0 / std::sqrt(2.0 * in)));
  params.add(kInBias, DenseArray({hid}));
  params.add(kHiddenWeight, scaled_normal(rng, hid, hid, 1.0 / std::sqrt(double(hid))));
  params.add(kHiddenBias, DenseArray({hid}));
  if (head_scale > 0.0) {
    params.add(kHeadWeight, scaled_normal(rng, out, hid, head_scale / std::sqrt(double(hid))));
  } else {
    params.add(kHeadWeight, DenseArray::matrix(out, hid));
  }
  params.add(kHeadBias, DenseArray({out}));
  return params;
}

NetShape network_shape(const ParamSet& params) {
  const DenseArray& w_in = params.get(kInWeight).value;
  const DenseArray& w_head = params.get(kHeadWeight).value;
  require_rank(w_in, 2, "network_shape(in.weight)");
  require_rank(w_head, 2, "network_shape(head.weight)");
  return NetShape{w_in.cols() / 2, w_in.rows(), w_head.rows()};
}

NetOutput net_forward(const ParamSet& params, const DenseArray& input) {
  require_rank(input, 2, "net_forward(input)");
  const DenseArray& w_in = params.get(kInWeight).value;
  const DenseArray& b_in = params.get(kInBias).value;
  const DenseArray& w_hid = params.get(kHiddenWeight).value;
  const DenseArray& b_hid = params.get(kHiddenBias).value;
  const DenseArray& w_head = params.get(kHeadWeight).value;
  const DenseArray& b_head = params.get(kHeadBias).value;

  const std::size_t frames = input.rows();
  const std::size_t in = input.cols();
  const std::size_t hid = w_in.rows();
  const std::size_t out = w_head.rows();
  if (w_in.cols() != 2 * in) {
    throw DimensionError("net_forward: input has " + std::to_string(in) +
                         " features per frame, network expects " + std::to_string(w_in.cols() / 2));
  }

  NetOutput result;
  NetTape& tape = result.tape;
  tape.params = &params;
  tape.params_version = params.version();
  tape.input = input;
  tape.context.assign(in, 0.0);
  for (std::size_t l = 0; l < frames; ++l) axpy(tape.context, 1.0, input.row(l));
  for (double& c : tape.context) c /= static_cast<double>(frames);

  // The context half of the first layer is shared by all frames.
  std::vector<double> shared(hid);
  for (std::size_t h = 0; h < hid; ++h) {
    shared[h] = b_in[h] + dot(w_in.row(h).subspan(in), tape.context);
  }

  tape.hidden1 = DenseArray::matrix(frames, hid);
  tape.hidden2_act = DenseArray::matrix(frames, hid);
  tape.hidden2 = DenseArray::matrix(frames, hid);
  result.head = DenseArray::matrix(frames, out);

  for (std::size_t l = 0; l < frames; ++l) {
    auto x = input.row(l);
    auto h1 = tape.hidden1.row(l);
    for (std::size_t h = 0; h < hid; ++h) {
      h1[h] = std::tanh(shared[h] + dot(w_in.row(h).first(in), x));
    }
    auto g2 = tape.hidden2_act.row(l);
    auto h2 = tape.hidden2.row(l);
    for (std::size_t h = 0; h < hid; ++h) {
      g2[h] = std::tanh(b_hid[h] + dot(w_hid.row(h), h1));
      h2[h] = h1[h] + g2[h];
    }
    auto y = result.head.row(l);
    for (std::size_t o = 0; o < out; ++o) y[o] = b_head[o] + dot(w_head.row(o), h2);
  }
  return result;
}

DenseArray net_backward(ParamSet& params, const NetTape& tape, const DenseArray& out_grad) {
  if (tape.params != &params || tape.params_version != params.version()) {
    throw ContractError("net_backward: tape is stale (parameters changed since net_forward)");
  }
  Param& p_in = params.get(kInWeight);
  Param& p_bin = params.get(kInBias);
  Param& p_hid = params.get(kHiddenWeight);
  Param& p_bhid = params.get(kHiddenBias);
  Param& p_head = params.get(kHeadWeight);
  Param& p_bhead = params.get(kHeadBias);

  const std::size_t frames = tape.input.rows();
  const std::size_t in = tape.input.cols();
  const std::size_t hid = p_in.value.rows();
  const std::size_t out = p_head.value.rows();
  if (out_grad.rank() != 2 || out_grad.rows() != frames || out_grad.cols() != out) {
    throw DimensionError("net_backward: out_grad shape " + out_grad.shape_string() +
                         " does not match head [" + std::to_string(frames) + "x" +
                         std::to_string(out) + "]");
  }

  DenseArray input_grad = DenseArray::matrix(frames, in);
  std::vector<double> context_grad(in, 0.0);
  std::vector<double> d_h2(hid), d_a2(hid), d_h1(hid), d_a1(hid);

  for (std::size_t l = 0; l < frames; ++l) {
    auto dy = out_grad.row(l);
    auto h1 = tape.hidden1.row(l);
    auto g2 = tape.hidden2_act.row(l);
    auto h2 = tape.hidden2.row(l);

    std::fill(d_h2.begin(), d_h2.end(), 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      if (dy[o] == 0.0) continue;
      axpy(p_head.grad.row(o), dy[o], h2);
      p_bhead.grad[o] += dy[o];
      axpy(d_h2, dy[o], p_head.value.row(o));
    }

    for (std::size_t h = 0; h < hid; ++h) d_a2[h] = d_h2[h] * (1.0 - g2[h] * g2[h]);
    d_h1 = d_h2;
    for (std::size_t h = 0; h < hid; ++h) {
      if (d_a2[h] == 0.0) continue;
      axpy(p_hid.grad.row(h), d_a2[h], h1);
      p_bhid.grad[h] += d_a2[h];
      axpy(d_h1, d_a2[h], p_hid.value.row(h));
    }

    for (std::size_t h = 0; h < hid; ++h) d_a1[h] = d_h1[h] * (1.0 - h1[h] * h1[h]);
    auto x = tape.input.row(l);
    auto dx = input_grad.row(l);
    for (std::size_t h = 0; h < hid; ++h) {
      const double g = d_a1[h];
      if (g == 0.0) continue;
      auto w_row = p_in.value.row(h);
      auto gw_row = p_in.grad.row(h);
      axpy(gw_row.first(in), g, x);
      axpy(gw_row.subspan(in), g, tape.context);
      p_bin.grad[h] += g;
      axpy(dx, g, w_row.first(in));
      axpy(context_grad, g, w_row.subspan(in));
    }
  }

  const double inv_frames = 1.0 / static_cast<double>(frames);
  for (std::size_t l = 0; l < frames; ++l) axpy(input_grad.row(l), inv_frames, context_grad);
  return input_grad;
}

}  // namespace flowgrpo
