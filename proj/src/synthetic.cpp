#include "statenet/synthetic.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "statenet/rng.hpp"

namespace statenet::synth {

HmmData generate_hmm(const HmmConfig& c) {
  if (c.num_states < 1 || c.num_states > c.dim) throw std::invalid_argument("generate_hmm: need 1 <= states <= dim");
  if (c.min_length < 1 || c.max_length < c.min_length) throw std::invalid_argument("generate_hmm: bad length range");
  if (c.words_per_state < 1 || !(c.sigma > 0.0) || !(c.stay >= 0.0 && c.stay <= 1.0))
    throw std::invalid_argument("generate_hmm: invalid parameters");
  const std::size_t K = c.num_states;
  Rng rng(c.seed);
  HmmData out;
  out.means = Tensor(Shape{K, c.dim});
  for (std::size_t k = 0; k < K; ++k) out.means(k, k) = c.separation * c.sigma / std::sqrt(2.0);

  std::vector<double> trans(K * K, K > 1 ? (1.0 - c.stay) / static_cast<double>(K - 1) : 1.0);
  for (std::size_t k = 0; k < K; ++k) trans[k * K + k] = K > 1 ? c.stay : 1.0;

  std::vector<std::vector<std::string>> surfaces;
  out.store.dim = c.dim;
  out.truth.name = "TRUTH";
  for (std::size_t s = 0; s < c.sentences; ++s) {
    const std::size_t T = c.min_length + rng.below(c.max_length - c.min_length + 1);
    std::vector<std::size_t> z(T);
    std::vector<std::string> words(T), tags(T);
    Tensor emb(Shape{T, c.dim});
    for (std::size_t t = 0; t < T; ++t) {
      z[t] = t == 0 ? rng.below(K) : rng.categorical(std::span<const double>(trans).subspan(z[t - 1] * K, K));
      words[t] = "w" + std::to_string(z[t]) + "_" + std::to_string(rng.below(c.words_per_state));
      tags[t] = "S" + std::to_string(z[t]);
      for (std::size_t d = 0; d < c.dim; ++d) emb(t, d) = out.means(z[t], d) + c.sigma * rng.normal();
    }
    surfaces.push_back(std::move(words));
    out.truth.tags.push_back(std::move(tags));
    out.states.push_back(std::move(z));
    out.store.sequences.push_back(std::move(emb));
  }
  out.corpus = io::Corpus::from_surfaces(surfaces);
  return out;
}

}  // namespace statenet::synth
