#pragma once

#include <string>
#include <utility>
#include <vector>

#include "statenet/corpus_io.hpp"
#include "statenet/crf.hpp"
#include "statenet/generator.hpp"

namespace statenet::train {

// Inference parameters (the state bank) and generative parameters together.
struct ModelParams {
  crf::StateBank bank;
  gen::DecoderParams decoder;

  // Fixed order: "states", "start", then the decoder tensors.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;
  std::size_t num_states() const { return bank.num_states(); }
};

struct ModelVars {
  Var states;
  Var start;
  gen::DecoderVars decoder;

  std::vector<Var> all() const;  // same order as ModelParams::named()
};

ModelVars bind(Tape& tape, const ModelParams& params, bool trainable = true);
std::vector<Tensor> gradients(const Tape& tape, const ModelVars& vars);

// State rows and s_0 are drawn from a Gaussian matching the per-dimension mean
// and variance of the embeddings; the decoder uses init_decoder.
ModelParams init_model(const io::EmbeddingStore& store, std::size_t num_states, std::size_t hidden,
                       std::size_t vocab, Rng& rng);

}  // namespace statenet::train
