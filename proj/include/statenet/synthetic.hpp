#pragma once

#include <cstdint>
#include <vector>

#include "statenet/corpus_io.hpp"
#include "statenet/tensor.hpp"

// Sentences sampled from a hidden Markov model with Gaussian emissions in
// embedding space, for recovery experiments with known ground truth.
namespace statenet::synth {

struct HmmConfig {
  std::size_t sentences = 2000;
  std::size_t min_length = 8;
  std::size_t max_length = 20;
  std::size_t num_states = 5;
  std::size_t dim = 16;
  std::size_t words_per_state = 4;
  double sigma = 1.0;
  double separation = 4.0;  // distance between any two means, in units of sigma
  double stay = 0.7;        // self-transition probability; the rest is spread uniformly
  std::uint64_t seed = 0;
};

struct HmmData {
  io::Corpus corpus;
  io::EmbeddingStore store;
  io::TagLayer truth;  // tag "S<k>" for true state k
  std::vector<std::vector<std::size_t>> states;
  Tensor means;  // num_states x dim
};

// Means are separation * sigma / sqrt(2) times distinct unit axes, so every
// pair lies exactly separation * sigma apart. Words "w<k>_<j>" are drawn
// uniformly within the active state.
HmmData generate_hmm(const HmmConfig& config);

}  // namespace statenet::synth
