#include "statenet/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace statenet::crf {

LatticeScores random_lattice(Rng& rng, std::size_t length, std::size_t num_states, double scale, bool integer) {
  auto draw = [&] { return integer ? static_cast<double>(rng.below(3)) - 1.0 : rng.uniform(-scale, scale); };
  LatticeScores l;
  l.emission = Tensor(Shape{length, num_states});
  l.transition = Tensor(Shape{num_states, num_states});
  l.start = Tensor(Shape{num_states});
  for (double& x : l.emission.data()) x = draw();
  for (double& x : l.transition.data()) x = draw();
  for (double& x : l.start.data()) x = draw();
  return l;
}

namespace {

double brute_log_z(const PathDistribution& d) {
  const double m = *std::max_element(d.scores.begin(), d.scores.end());
  double s = 0.0;
  for (double x : d.scores) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

OracleReport run_enumeration_suite(std::size_t trials, std::uint64_t seed, double tolerance) {
  OracleReport rep;
  Rng rng(seed);
  for (std::size_t k = 0; k < trials; ++k) {
    const std::size_t T = 1 + rng.below(6);
    const std::size_t N = 2 + rng.below(4);
    const LatticeScores l = random_lattice(rng, T, N, 2.0, k % 4 == 3);
    const PathDistribution d = enumerate_posterior(l);

    const double log_z = brute_log_z(d);
    Tensor unary(Shape{T, N});
    Tensor pairwise(Shape{T > 1 ? T - 1 : 1, N, N});
    double entropy = 0.0;
    std::size_t best = 0;
    for (std::size_t idx = 0; idx < d.probs.size(); ++idx) {
      const double p = d.probs[idx];
      const auto path = d.path(idx);
      for (std::size_t t = 0; t < T; ++t) unary(t, path[t]) += p;
      for (std::size_t t = 0; t + 1 < T; ++t) pairwise(t, path[t], path[t + 1]) += p;
      if (p > 0.0) entropy -= p * std::log(p);
      if (d.scores[idx] > d.scores[best]) best = idx;
    }

    const Posteriors post = marginals(l);
    double e_unary = 0.0, e_pair = 0.0;
    for (std::size_t i = 0; i < unary.size(); ++i) e_unary = std::max(e_unary, std::abs(unary[i] - post.unary[i]));
    if (T > 1)
      for (std::size_t i = 0; i < pairwise.size(); ++i)
        e_pair = std::max(e_pair, std::abs(pairwise[i] - post.pairwise[i]));
    const double e_z = std::max(std::abs(log_z - log_partition(l)), std::abs(log_z - post.log_z));
    const double e_h = std::max(std::abs(entropy - posterior_entropy(l)), std::abs(entropy - post.entropy));
    const bool viterbi_ok = viterbi(l).path == d.path(best);

    rep.max_log_z_error = std::max(rep.max_log_z_error, e_z);
    rep.max_unary_error = std::max(rep.max_unary_error, e_unary);
    rep.max_pairwise_error = std::max(rep.max_pairwise_error, e_pair);
    rep.max_entropy_error = std::max(rep.max_entropy_error, e_h);
    if (!viterbi_ok) ++rep.viterbi_mismatches;
    ++rep.trials;
    if (e_z > tolerance || e_unary > tolerance || e_pair > tolerance || e_h > tolerance || !viterbi_ok) {
      ++rep.failures;
      std::ostringstream msg;
      msg << "trial " << k << " (T=" << T << ", N=" << N << "): log Z err " << e_z << ", unary err " << e_unary
          << ", pairwise err " << e_pair << ", entropy err " << e_h << (viterbi_ok ? "" : ", viterbi mismatch");
      rep.messages.push_back(msg.str());
    }
  }
  return rep;
}

}  // namespace statenet::crf
