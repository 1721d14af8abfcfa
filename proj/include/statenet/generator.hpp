#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "statenet/crf.hpp"
#include "statenet/rng.hpp"
#include "statenet/tape.hpp"

// Autoregressive generative model p(x, z) over tokens and latent states:
//   h_t = LSTM(s_{z_{t-1}}, h_{t-1})            (s_{z_0} is the bank's start vector)
//   p(z_t | z_<t) = softmax_n( v . tanh(Ws s_n + Wh h_t + b) )
//   p(x_t | z_<=t) = softmax( Wt h_{t+1} + bt )
// The token head reads the hidden state after s_{z_t} has been consumed, so
// x_t depends on its own state.
namespace statenet::gen {

struct DecoderParams {
  std::size_t input_dim = 0;  // D
  std::size_t hidden = 0;     // H (also the width of the state-head layer)
  std::size_t vocab = 0;      // V

  // LSTM, gate order [input, forget, cell, output].
  Tensor lstm_wx;  // 4H x D
  Tensor lstm_wh;  // 4H x H
  Tensor lstm_b;   // 4H
  Tensor h0;       // H, learnable, starts at zero
  // State head on [s_n ; h_t]; the first layer's weight is split by input block.
  Tensor state_ws;  // H x D
  Tensor state_wh;  // H x H
  Tensor state_b;   // H
  Tensor state_v;   // H
  // Token head.
  Tensor token_w;  // V x H
  Tensor token_b;  // V

  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  void validate() const;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer; h0 = 0.
DecoderParams init_decoder(std::size_t input_dim, std::size_t hidden, std::size_t vocab, Rng& rng);

struct DecoderVars {
  Var lstm_wx, lstm_wh, lstm_b, h0;
  Var state_ws, state_wh, state_b, state_v;
  Var token_w, token_b;
  std::size_t hidden = 0;

  std::vector<Var> all() const;
};

DecoderVars bind(Tape& tape, const DecoderParams& params, bool trainable = true);

struct HiddenState {
  Var h;
  Var c;
};

HiddenState initial_state(const DecoderVars& d);
HiddenState decode_step(const DecoderVars& d, Var s_prev, const HiddenState& prev);

// Ws-projection of every state row (N x H); reusable across steps of one sentence.
Var project_states(const DecoderVars& d, Var states);
Var state_prior_logits(const DecoderVars& d, Var h, Var projected_states);
Var token_logits(const DecoderVars& d, Var h);

// Teacher-forced log p(x, z). With `selectors`, the state at step t enters the
// model as selectors[t] (a one-hot-valued N-vector, possibly straight-through)
// instead of a constant index, so gradients can reach whatever produced it.
Var joint_log_prob(const DecoderVars& d, Var states, Var start, std::span<const std::size_t> tokens,
                   std::span<const std::size_t> path);
Var joint_log_prob(const DecoderVars& d, Var states, Var start, std::span<const std::size_t> tokens,
                   std::span<const std::size_t> path, std::span<const Var> selectors);

double joint_log_prob(const DecoderParams& params, const crf::StateBank& bank, std::span<const std::size_t> tokens,
                      std::span<const std::size_t> path);

Tensor one_hot(std::size_t n, std::size_t index);

}  // namespace statenet::gen
