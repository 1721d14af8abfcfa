#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "statenet/rng.hpp"
#include "statenet/tape.hpp"
#include "statenet/tensor.hpp"

// Exact inference for the linear-chain CRF over latent states. Emission and
// transition log-potentials are plain dot products:
//   emission[t][n]   = r_t . s_n
//   transition[i][j] = s_i . s_j
//   start[j]         = s_0 . s_j
// There is no end factor.
namespace statenet::crf {

// State embeddings (N x D) plus the start vector s_0 used for the first
// transition and as the decoder's first input.
struct StateBank {
  Tensor states;
  Tensor start;

  std::size_t num_states() const { return states.rows(); }
  std::size_t dim() const { return states.cols(); }
  void validate() const;
};

struct LatticeScores {
  Tensor emission;    // T x N
  Tensor transition;  // N x N
  Tensor start;       // N

  std::size_t length() const { return emission.rows(); }
  std::size_t num_states() const { return emission.cols(); }
  void validate() const;
};

struct Posteriors {
  double log_z = 0.0;
  Tensor unary;     // T x N
  Tensor pairwise;  // (T-1) x N x N, pairwise(t, i, j) = q(z_t = i, z_{t+1} = j)
  double entropy = 0.0;
};

struct ViterbiResult {
  std::vector<std::size_t> path;
  double score = 0.0;
};

struct PosteriorSample {
  std::vector<std::size_t> path;
  Tensor relaxed;  // T x N softened one-hot rows
};

// Exact distribution over all N^T paths. Paths are indexed in lexicographic
// order with the first position most significant.
struct PathDistribution {
  std::size_t length = 0;
  std::size_t num_states = 0;
  std::vector<double> probs;
  std::vector<double> scores;  // unnormalized log-score of each path

  std::vector<std::size_t> path(std::size_t index) const;
  std::size_t index(std::span<const std::size_t> path) const;
};

inline constexpr std::size_t kMaxEnumeratedPaths = 100000;

LatticeScores build_lattice(const Tensor& seq_emb, const StateBank& bank);

// Sum of potentials along `path` (unnormalized log-score).
double path_score(const LatticeScores& l, std::span<const std::size_t> path);

double log_partition(const LatticeScores& l);

// Max-score path; among equal scores the lexicographically smallest path wins.
ViterbiResult viterbi(const LatticeScores& l);

// Forward-backward marginals, log Z and posterior entropy.
Posteriors marginals(const LatticeScores& l);

double posterior_entropy(const LatticeScores& l);

double posterior_log_prob(const LatticeScores& l, std::span<const std::size_t> path);

// Forward-filtering backward-sampling with Gumbel-max draws: the hard path is
// an exact sample from q(z|x); `relaxed` row t is softmax((logits_t + g_t) / tau)
// over the conditional logits used to draw z_t.
PosteriorSample sample_posterior(const LatticeScores& l, Rng& rng, double tau);

PathDistribution enumerate_posterior(const LatticeScores& l);

// ---- tape-tracked variants used for training and gradient checks ---------------

struct TapeLattice {
  Var emission;
  Var transition;
  Var start;

  std::size_t length() const { return emission.value().rows(); }
  std::size_t num_states() const { return emission.value().cols(); }
  LatticeScores values() const;
};

TapeLattice build_lattice(Var seq_emb, Var states, Var start);
TapeLattice bind_lattice(Tape& tape, const LatticeScores& l);  // leaves as variables

// Forward log-messages alpha_t plus the per-step score matrices
// M_t[i][j] = alpha_{t-1}[i] + transition[i][j] (t >= 1).
struct ForwardPass {
  std::vector<Var> alpha;
  std::vector<Var> scores;
};

ForwardPass forward_pass(const TapeLattice& l);
Var log_partition(const ForwardPass& fp);
Var log_partition(const TapeLattice& l);

// Entropy via the forward conditional-entropy recursion
//   H_t[j] = sum_i q(i | j) (H_{t-1}[i] - log q(i | j)),
// which differentiates exactly through the tape.
Var posterior_entropy(const ForwardPass& fp);
Var posterior_entropy(const TapeLattice& l);

Var posterior_log_prob(const TapeLattice& l, std::span<const std::size_t> path);
Var posterior_log_prob(const TapeLattice& l, std::span<const std::size_t> path, Var log_z);

struct TapeSample {
  std::vector<std::size_t> path;
  std::vector<Var> relaxed;  // one N-vector per position
};

TapeSample sample_posterior(const TapeLattice& l, const ForwardPass& fp, Rng& rng, double tau);

}  // namespace statenet::crf
