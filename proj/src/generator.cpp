#include "statenet/generator.hpp"

#include <cmath>

namespace statenet::gen {

namespace {

Tensor uniform_init(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t(shape);
  for (double& x : t.data()) x = rng.uniform(-bound, bound);
  return t;
}

void expect_shape(const Tensor& t, Shape s, const std::string& name) {
  if (t.shape() != s) throw ShapeError("decoder parameter " + name + " is " + t.shape().str() + ", expected " + s.str());
  require_finite(t, "DecoderParams");
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> DecoderParams::named() {
  return {{"lstm_wx", &lstm_wx},   {"lstm_wh", &lstm_wh},   {"lstm_b", &lstm_b},   {"h0", &h0},
          {"state_ws", &state_ws}, {"state_wh", &state_wh}, {"state_b", &state_b}, {"state_v", &state_v},
          {"token_w", &token_w},   {"token_b", &token_b}};
}

std::vector<std::pair<std::string, const Tensor*>> DecoderParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<DecoderParams*>(this)->named()) out.emplace_back(name, t);
  return out;
}

void DecoderParams::validate() const {
  const std::size_t D = input_dim, H = hidden, V = vocab;
  if (D == 0 || H == 0 || V == 0) throw ShapeError("decoder dimensions must be positive");
  expect_shape(lstm_wx, {4 * H, D}, "lstm_wx");
  expect_shape(lstm_wh, {4 * H, H}, "lstm_wh");
  expect_shape(lstm_b, {4 * H}, "lstm_b");
  expect_shape(h0, {H}, "h0");
  expect_shape(state_ws, {H, D}, "state_ws");
  expect_shape(state_wh, {H, H}, "state_wh");
  expect_shape(state_b, {H}, "state_b");
  expect_shape(state_v, {H}, "state_v");
  expect_shape(token_w, {V, H}, "token_w");
  expect_shape(token_b, {V}, "token_b");
}

DecoderParams init_decoder(std::size_t D, std::size_t H, std::size_t V, Rng& rng) {
  if (D == 0 || H == 0 || V == 0) throw ShapeError("init_decoder: dimensions must be positive");
  DecoderParams p;
  p.input_dim = D;
  p.hidden = H;
  p.vocab = V;
  p.lstm_wx = uniform_init({4 * H, D}, D + H, rng);
  p.lstm_wh = uniform_init({4 * H, H}, D + H, rng);
  p.lstm_b = uniform_init({4 * H}, D + H, rng);
  p.h0 = Tensor(Shape{H});
  p.state_ws = uniform_init({H, D}, D + H, rng);
  p.state_wh = uniform_init({H, H}, D + H, rng);
  p.state_b = uniform_init({H}, D + H, rng);
  p.state_v = uniform_init({H}, H, rng);
  p.token_w = uniform_init({V, H}, H, rng);
  p.token_b = uniform_init({V}, H, rng);
  return p;
}

std::vector<Var> DecoderVars::all() const {
  return {lstm_wx, lstm_wh, lstm_b, h0, state_ws, state_wh, state_b, state_v, token_w, token_b};
}

DecoderVars bind(Tape& tape, const DecoderParams& p, bool trainable) {
  p.validate();
  auto leaf = [&](const Tensor& t) { return trainable ? tape.variable(t) : tape.constant(t); };
  DecoderVars d;
  d.lstm_wx = leaf(p.lstm_wx);
  d.lstm_wh = leaf(p.lstm_wh);
  d.lstm_b = leaf(p.lstm_b);
  d.h0 = leaf(p.h0);
  d.state_ws = leaf(p.state_ws);
  d.state_wh = leaf(p.state_wh);
  d.state_b = leaf(p.state_b);
  d.state_v = leaf(p.state_v);
  d.token_w = leaf(p.token_w);
  d.token_b = leaf(p.token_b);
  d.hidden = p.hidden;
  return d;
}

HiddenState initial_state(const DecoderVars& d) {
  return {d.h0, d.h0.tape().constant(Tensor(Shape{d.hidden}))};
}

HiddenState decode_step(const DecoderVars& d, Var s_prev, const HiddenState& prev) {
  const std::size_t H = d.hidden;
  if (s_prev.value().rank() != 1 || s_prev.value().size() != d.lstm_wx.value().cols())
    throw ShapeError("decode_step: input " + s_prev.shape().str() + " vs decoder input dim " +
                     std::to_string(d.lstm_wx.value().cols()));
  if (prev.h.value().size() != H || prev.c.value().size() != H)
    throw ShapeError("decode_step: hidden state size does not match H=" + std::to_string(H));
  Var gates = add(add(matvec(d.lstm_wx, s_prev), matvec(d.lstm_wh, prev.h)), d.lstm_b);
  Var i = sigmoid(slice(gates, 0, H));
  Var f = sigmoid(slice(gates, H, H));
  Var g = tanh(slice(gates, 2 * H, H));
  Var o = sigmoid(slice(gates, 3 * H, H));
  Var c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Var project_states(const DecoderVars& d, Var states) {
  if (states.value().rank() != 2 || states.value().cols() != d.state_ws.value().cols())
    throw ShapeError("state head: states " + states.shape().str() + " vs decoder input dim " +
                     std::to_string(d.state_ws.value().cols()));
  return matmul_nt(states, d.state_ws);
}

Var state_prior_logits(const DecoderVars& d, Var h, Var projected) {
  if (h.value().size() != d.hidden || projected.value().rank() != 2 || projected.value().cols() != d.hidden)
    throw ShapeError("state_prior_logits: hidden " + h.shape().str() + ", projected states " + projected.shape().str());
  Var u = add(matvec(d.state_wh, h), d.state_b);
  return matvec(tanh(add_row(projected, u)), d.state_v);
}

Var token_logits(const DecoderVars& d, Var h) {
  if (h.value().rank() != 1 || h.value().size() != d.hidden)
    throw ShapeError("token_logits: hidden " + h.shape().str() + " vs H=" + std::to_string(d.hidden));
  return add(matvec(d.token_w, h), d.token_b);
}

Tensor one_hot(std::size_t n, std::size_t index) {
  Tensor t(Shape{n});
  t[index] = 1.0;
  return t;
}

Var joint_log_prob(const DecoderVars& d, Var states, Var start, std::span<const std::size_t> tokens,
                   std::span<const std::size_t> path) {
  Tape& tape = states.tape();
  const std::size_t N = states.value().rows();
  std::vector<Var> selectors;
  selectors.reserve(path.size());
  for (std::size_t z : path) {
    if (z >= N) throw ShapeError("joint_log_prob: state id " + std::to_string(z) + " >= N=" + std::to_string(N));
    selectors.push_back(tape.constant(one_hot(N, z)));
  }
  return joint_log_prob(d, states, start, tokens, path, selectors);
}

Var joint_log_prob(const DecoderVars& d, Var states, Var start, std::span<const std::size_t> tokens,
                   std::span<const std::size_t> path, std::span<const Var> selectors) {
  const std::size_t T = tokens.size();
  if (T == 0 || path.size() != T || selectors.size() != T)
    throw ShapeError("joint_log_prob: " + std::to_string(T) + " tokens, " + std::to_string(path.size()) +
                     " states, " + std::to_string(selectors.size()) + " selectors");
  const std::size_t N = states.value().rows();
  const std::size_t V = d.token_b.value().size();
  for (std::size_t t = 0; t < T; ++t) {
    if (path[t] >= N) throw ShapeError("joint_log_prob: state id " + std::to_string(path[t]) + " >= N");
    if (tokens[t] >= V) throw ShapeError("joint_log_prob: token id " + std::to_string(tokens[t]) + " >= V");
  }

  Var projected = project_states(d, states);
  HiddenState hs = decode_step(d, start, initial_state(d));
  Var total;
  for (std::size_t t = 0; t < T; ++t) {
    Var state_lp = dot(selectors[t], log_softmax(state_prior_logits(d, hs.h, projected)));
    hs = decode_step(d, matvec_t(states, selectors[t]), hs);
    Var token_lp = gather(log_softmax(token_logits(d, hs.h)), tokens[t]);
    Var step = add(state_lp, token_lp);
    total = t == 0 ? step : add(total, step);
  }
  return total;
}

double joint_log_prob(const DecoderParams& params, const crf::StateBank& bank, std::span<const std::size_t> tokens,
                      std::span<const std::size_t> path) {
  Tape tape;
  DecoderVars d = bind(tape, params, false);
  return joint_log_prob(d, tape.constant(bank.states), tape.constant(bank.start), tokens, path).item();
}

}  // namespace statenet::gen
