#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "statenet/analysis.hpp"
#include "statenet/checkpoint.hpp"
#include "statenet/corpus_io.hpp"
#include "statenet/model.hpp"
#include "statenet/tape.hpp"

namespace statenet::train {

// Plus maximizes E_q[log p] + beta H(q); Minus maximizes E_q[log p] - beta H(q).
enum class EntropySign { Plus, Minus };

inline double sign_value(EntropySign s) { return s == EntropySign::Plus ? 1.0 : -1.0; }

struct TrainConfig {
  std::size_t num_states = 64;
  std::size_t hidden = 200;
  double beta = 0.005;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  double tau = 1.0;
  std::size_t checkpoint_every = 1;  // epochs; 0 keeps only the final epoch
  EntropySign entropy_sign = EntropySign::Plus;
  std::size_t threads = 1;

  std::string embeddings_path;
  std::string corpus_path;
  std::vector<std::pair<std::string, std::string>> tag_paths;  // (layer name, path)

  void validate() const;
};

// Raised when a training step produces a non-finite objective or gradient.
// Carries the parameters from before the failing step.
class DivergenceError : public NumericError {
 public:
  DivergenceError(const std::string& what, Checkpoint last_good)
      : NumericError(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

struct ElboResult {
  double value = 0.0;
  double log_joint = 0.0;
  double entropy = 0.0;
  std::vector<std::size_t> path;
  std::vector<Tensor> grads;  // d value / d parameter, ModelParams::named() order
};

// One-sample estimate: log p(x, z) + sign * beta * H(q) with z ~ q(z|x) drawn
// by FFBS. The decoder sees straight-through relaxed selectors, so gradients
// reach the state bank through the sample as well as through the exact
// entropy term.
Var elbo_estimate(const ModelVars& vars, const Tensor& seq_emb, std::span<const std::size_t> tokens, double beta,
                  double tau, Rng& rng, EntropySign sign = EntropySign::Plus, ElboResult* info = nullptr);
ElboResult elbo_estimate(const ModelParams& params, const Tensor& seq_emb, std::span<const std::size_t> tokens,
                         double beta, double tau, Rng& rng, EntropySign sign = EntropySign::Plus);

// sum_z q(z|x) log p(x, z) + sign * beta * H(q) by enumerating all N^T paths.
Var exact_elbo(const ModelVars& vars, const Tensor& seq_emb, std::span<const std::size_t> tokens, double beta,
               EntropySign sign = EntropySign::Plus);
double exact_elbo(const ModelParams& params, const Tensor& seq_emb, std::span<const std::size_t> tokens, double beta,
                  EntropySign sign = EntropySign::Plus);
ElboResult exact_elbo_with_grad(const ModelParams& params, const Tensor& seq_emb, std::span<const std::size_t> tokens,
                                double beta, EntropySign sign = EntropySign::Plus);

// Posterior entropy summed over sentences divided by the token count.
double mean_token_entropy(const crf::StateBank& bank, const io::EmbeddingStore& store);

struct TrainResult {
  std::vector<Checkpoint> checkpoints;
  std::vector<double> epoch_mean_elbo;  // per-token ELBO averaged over each epoch
};

// Adam ascent on the per-token batch ELBO. With threads > 1 the sentences of
// a batch are evaluated concurrently; their gradients are summed in sentence
// order, so results match the single-threaded run.
TrainResult train(const TrainConfig& config, const io::Corpus& corpus, const io::EmbeddingStore& store,
                  const ModelParams* init = nullptr);
TrainResult train(const TrainConfig& config);

// Initial parameters train() uses for this configuration.
ModelParams initial_params(const TrainConfig& config, const io::Corpus& corpus, const io::EmbeddingStore& store);

// Per-token average of a fixed batch of ELBO estimates, each sentence with its
// own stream derived from `seed`.
double batch_elbo(const ModelParams& params, const io::Corpus& corpus, const io::EmbeddingStore& store, double beta,
                  double tau, std::uint64_t seed, EntropySign sign = EntropySign::Plus);

struct Selection {
  std::size_t index = 0;
  std::vector<std::size_t> aligned_counts;  // one per checkpoint
};

// Counts states aligned in at least one tag layer under each checkpoint's
// Viterbi decoding; the largest count wins, ties going to the earliest epoch.
Selection select_model(std::span<const Checkpoint> checkpoints, const io::EmbeddingStore& store,
                       const io::Corpus& corpus, std::span<const io::TagLayer> layers, double threshold = 0.9,
                       std::size_t threads = 1);

std::vector<double> default_stage1_grid();
// {lo} followed by hi*k/4 (k = 1..4) for every value above lo, where lo < hi
// are the two best stage-1 values.
std::vector<double> stage2_grid(double first, double second);

struct BetaCandidate {
  double beta = 0.0;
  int stage = 1;
  bool diverged = false;
  std::size_t aligned = 0;
};

struct BetaSearchResult {
  double best = 0.0;
  std::vector<BetaCandidate> candidates;  // in evaluation order
};

// Trains once per candidate with `config` (beta overridden) and scores each
// run by its select_model count. An empty stage-2 grid is derived from the two
// best stage-1 values. Ties go to the candidate evaluated first.
BetaSearchResult beta_search(const TrainConfig& config, const io::Corpus& corpus, const io::EmbeddingStore& store,
                             std::span<const io::TagLayer> layers, std::vector<double> stage1 = default_stage1_grid(),
                             std::vector<double> stage2 = {}, double threshold = 0.9);

}  // namespace statenet::train
