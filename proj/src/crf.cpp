#include "statenet/crf.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "statenet/kernels.hpp"

namespace statenet::crf {

void StateBank::validate() const {
  if (states.rank() != 2 || states.rows() == 0 || states.cols() == 0)
    throw ShapeError("state bank must be a non-empty N x D matrix, got " + states.shape().str());
  if (start.rank() != 1 || start.size() != states.cols())
    throw ShapeError("start vector " + start.shape().str() + " does not match state dim " + std::to_string(dim()));
  require_finite(states, "StateBank");
  require_finite(start, "StateBank");
}

void LatticeScores::validate() const {
  if (emission.rank() != 2 || emission.rows() == 0)
    throw ShapeError("lattice needs at least one position, emission is " + emission.shape().str());
  const std::size_t n = emission.cols();
  if (n == 0) throw ShapeError("lattice with zero states");
  if (transition.shape() != Shape{n, n} || start.shape() != Shape{n})
    throw ShapeError("lattice shapes disagree: emission " + emission.shape().str() + ", transition " +
                     transition.shape().str() + ", start " + start.shape().str());
  require_finite(emission, "LatticeScores");
  require_finite(transition, "LatticeScores");
  require_finite(start, "LatticeScores");
}

LatticeScores build_lattice(const Tensor& seq_emb, const StateBank& bank) {
  bank.validate();
  if (seq_emb.rank() != 2 || seq_emb.cols() != bank.dim())
    throw ShapeError("build_lattice: embeddings " + seq_emb.shape().str() + " vs state dim " +
                     std::to_string(bank.dim()));
  LatticeScores l;
  l.emission = kernels::matmul_nt(seq_emb, bank.states);
  l.transition = kernels::matmul_nt(bank.states, bank.states);
  l.start = Tensor(Shape{bank.num_states()});
  for (std::size_t j = 0; j < bank.num_states(); ++j) l.start[j] = kernels::dot(bank.start.data(), bank.states.row(j));
  require_finite(l.emission, "build_lattice");
  require_finite(l.transition, "build_lattice");
  require_finite(l.start, "build_lattice");
  return l;
}

namespace {

void check_path(const LatticeScores& l, std::span<const std::size_t> path) {
  if (path.size() != l.length())
    throw ShapeError("path length " + std::to_string(path.size()) + " vs lattice length " + std::to_string(l.length()));
  for (std::size_t z : path)
    if (z >= l.num_states())
      throw ShapeError("state id " + std::to_string(z) + " out of range for N=" + std::to_string(l.num_states()));
}

// alpha[t][j], log-space forward messages.
std::vector<std::vector<double>> forward_messages(const LatticeScores& l) {
  const std::size_t T = l.length(), N = l.num_states();
  std::vector<std::vector<double>> alpha(T, std::vector<double>(N));
  for (std::size_t j = 0; j < N; ++j) alpha[0][j] = l.start[j] + l.emission(0, j);
  std::vector<double> buf(N);
  for (std::size_t t = 1; t < T; ++t)
    for (std::size_t j = 0; j < N; ++j) {
      for (std::size_t i = 0; i < N; ++i) buf[i] = alpha[t - 1][i] + l.transition(i, j);
      alpha[t][j] = kernels::logsumexp(buf) + l.emission(t, j);
    }
  return alpha;
}

std::vector<std::vector<double>> backward_messages(const LatticeScores& l) {
  const std::size_t T = l.length(), N = l.num_states();
  std::vector<std::vector<double>> beta(T, std::vector<double>(N, 0.0));
  std::vector<double> buf(N);
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t j = 0; j < N; ++j) buf[j] = l.transition(i, j) + l.emission(t + 1, j) + beta[t + 1][j];
      beta[t][i] = kernels::logsumexp(buf);
    }
  return beta;
}

}  // namespace

double path_score(const LatticeScores& l, std::span<const std::size_t> path) {
  l.validate();
  check_path(l, path);
  double s = l.start[path[0]];
  for (std::size_t t = 0; t < path.size(); ++t) {
    s += l.emission(t, path[t]);
    if (t) s += l.transition(path[t - 1], path[t]);
  }
  return s;
}

double log_partition(const LatticeScores& l) {
  l.validate();
  const auto alpha = forward_messages(l);
  return kernels::logsumexp(alpha.back());
}

ViterbiResult viterbi(const LatticeScores& l) {
  l.validate();
  const std::size_t T = l.length(), N = l.num_states();
  // best[t][i]: best score of positions t+1..T-1 given z_t = i. Decoding then
  // runs left to right, so choosing the smallest maximizing state at every
  // step yields the lexicographically smallest optimal path.
  std::vector<std::vector<double>> best(T, std::vector<double>(N, 0.0));
  for (std::size_t t = T - 1; t-- > 0;)
    for (std::size_t i = 0; i < N; ++i) {
      double m = -INFINITY;
      for (std::size_t j = 0; j < N; ++j) m = std::max(m, l.transition(i, j) + l.emission(t + 1, j) + best[t + 1][j]);
      best[t][i] = m;
    }

  ViterbiResult out;
  out.path.resize(T);
  std::size_t pick = 0;
  double top = -INFINITY;
  for (std::size_t j = 0; j < N; ++j) {
    const double v = l.start[j] + l.emission(0, j) + best[0][j];
    if (v > top) {
      top = v;
      pick = j;
    }
  }
  out.path[0] = pick;
  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t prev = out.path[t - 1];
    double m = -INFINITY;
    std::size_t arg = 0;
    for (std::size_t j = 0; j < N; ++j) {
      const double v = l.transition(prev, j) + l.emission(t, j) + best[t][j];
      if (v > m) {
        m = v;
        arg = j;
      }
    }
    out.path[t] = arg;
  }
  out.score = path_score(l, out.path);
  return out;
}

Posteriors marginals(const LatticeScores& l) {
  l.validate();
  const std::size_t T = l.length(), N = l.num_states();
  const auto alpha = forward_messages(l);
  const auto beta = backward_messages(l);
  Posteriors p;
  p.log_z = kernels::logsumexp(alpha.back());
  p.unary = Tensor(Shape{T, N});
  p.pairwise = Tensor(Shape{T - 1, N, N});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < N; ++j) p.unary(t, j) = std::exp(alpha[t][j] + beta[t][j] - p.log_z);
  for (std::size_t t = 0; t + 1 < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j)
        p.pairwise(t, i, j) =
            std::exp(alpha[t][i] + l.transition(i, j) + l.emission(t + 1, j) + beta[t + 1][j] - p.log_z);

  // H(q) = log Z - E_q[score(z)]
  double expected = 0.0;
  for (std::size_t j = 0; j < N; ++j) expected += p.unary(0, j) * l.start[j];
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t j = 0; j < N; ++j) expected += p.unary(t, j) * l.emission(t, j);
  for (std::size_t t = 0; t + 1 < T; ++t)
    for (std::size_t i = 0; i < N; ++i)
      for (std::size_t j = 0; j < N; ++j) expected += p.pairwise(t, i, j) * l.transition(i, j);
  p.entropy = p.log_z - expected;
  require_finite(p.unary, "marginals");
  require_finite(p.pairwise, "marginals");
  if (!std::isfinite(p.entropy)) throw NumericError("marginals: non-finite entropy");
  return p;
}

double posterior_entropy(const LatticeScores& l) { return marginals(l).entropy; }

double posterior_log_prob(const LatticeScores& l, std::span<const std::size_t> path) {
  return path_score(l, path) - log_partition(l);
}

PosteriorSample sample_posterior(const LatticeScores& l, Rng& rng, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("sample_posterior: tau must be positive");
  l.validate();
  const std::size_t T = l.length(), N = l.num_states();
  const auto alpha = forward_messages(l);
  PosteriorSample s;
  s.path.resize(T);
  s.relaxed = Tensor(Shape{T, N});
  std::vector<double> noisy(N);
  for (std::size_t t = T; t-- > 0;) {
    for (std::size_t i = 0; i < N; ++i) {
      const double logit = alpha[t][i] + (t + 1 < T ? l.transition(i, s.path[t + 1]) : 0.0);
      noisy[i] = logit + rng.gumbel();
    }
    s.path[t] = kernels::argmax(noisy);
    for (double& v : noisy) v /= tau;
    const auto soft = kernels::softmax_row(noisy);
    std::copy(soft.begin(), soft.end(), s.relaxed.row(t).begin());
  }
  return s;
}

std::vector<std::size_t> PathDistribution::path(std::size_t index) const {
  std::vector<std::size_t> p(length);
  for (std::size_t t = length; t-- > 0;) {
    p[t] = index % num_states;
    index /= num_states;
  }
  return p;
}

std::size_t PathDistribution::index(std::span<const std::size_t> path) const {
  std::size_t idx = 0;
  for (std::size_t z : path) idx = idx * num_states + z;
  return idx;
}

PathDistribution enumerate_posterior(const LatticeScores& l) {
  l.validate();
  const std::size_t T = l.length(), N = l.num_states();
  std::size_t total = 1;
  for (std::size_t t = 0; t < T; ++t) {
    if (total > kMaxEnumeratedPaths / N)
      throw std::invalid_argument("enumerate_posterior: N^T exceeds " + std::to_string(kMaxEnumeratedPaths));
    total *= N;
  }
  PathDistribution d;
  d.length = T;
  d.num_states = N;
  d.scores.resize(total);
  for (std::size_t k = 0; k < total; ++k) {
    const auto p = d.path(k);
    double s = l.start[p[0]];
    for (std::size_t t = 0; t < T; ++t) {
      s += l.emission(t, p[t]);
      if (t) s += l.transition(p[t - 1], p[t]);
    }
    d.scores[k] = s;
  }
  const double z = kernels::logsumexp(d.scores);
  d.probs.resize(total);
  for (std::size_t k = 0; k < total; ++k) d.probs[k] = std::exp(d.scores[k] - z);
  return d;
}

// ---- tape variants ---------------------------------------------------------------

LatticeScores TapeLattice::values() const { return {emission.value(), transition.value(), start.value()}; }

TapeLattice build_lattice(Var seq_emb, Var states, Var start) {
  if (seq_emb.value().rank() != 2 || states.value().rank() != 2 || seq_emb.value().cols() != states.value().cols())
    throw ShapeError("build_lattice: embeddings " + seq_emb.shape().str() + " vs states " + states.shape().str());
  TapeLattice l;
  l.emission = matmul_nt(seq_emb, states);
  l.transition = matmul_nt(states, states);
  l.start = matvec(states, start);
  return l;
}

TapeLattice bind_lattice(Tape& tape, const LatticeScores& l) {
  l.validate();
  return {tape.variable(l.emission), tape.variable(l.transition), tape.variable(l.start)};
}

ForwardPass forward_pass(const TapeLattice& l) {
  l.values().validate();
  ForwardPass fp;
  const std::size_t T = l.length();
  fp.alpha.push_back(add(l.start, row(l.emission, 0)));
  for (std::size_t t = 1; t < T; ++t) {
    Var m = add_col(l.transition, fp.alpha.back());
    fp.scores.push_back(m);
    fp.alpha.push_back(add(logsumexp_cols(m), row(l.emission, t)));
  }
  return fp;
}

Var log_partition(const ForwardPass& fp) { return logsumexp(fp.alpha.back()); }

Var log_partition(const TapeLattice& l) { return log_partition(forward_pass(l)); }

Var posterior_entropy(const ForwardPass& fp) {
  Tape& tape = fp.alpha.front().tape();
  const std::size_t N = fp.alpha.front().value().size();
  Var h = tape.constant(Tensor(Shape{N}));
  for (Var m : fp.scores) {
    Var logw = log_softmax_cols(m);  // log q(z_{t-1} = i | z_t = j)
    Var w = exp(logw);
    h = sub(matvec_t(w, h), col_sums(mul(w, logw)));
  }
  Var logp = log_softmax(fp.alpha.back());
  return dot(exp(logp), sub(h, logp));
}

Var posterior_entropy(const TapeLattice& l) { return posterior_entropy(forward_pass(l)); }

Var posterior_log_prob(const TapeLattice& l, std::span<const std::size_t> path) {
  return posterior_log_prob(l, path, log_partition(l));
}

Var posterior_log_prob(const TapeLattice& l, std::span<const std::size_t> path, Var log_z) {
  check_path(l.values(), path);
  Var s = gather(l.start, path[0]);
  for (std::size_t t = 0; t < path.size(); ++t) {
    s = add(s, at(l.emission, t, path[t]));
    if (t) s = add(s, at(l.transition, path[t - 1], path[t]));
  }
  return sub(s, log_z);
}

TapeSample sample_posterior(const TapeLattice& l, const ForwardPass& fp, Rng& rng, double tau) {
  if (!(tau > 0.0)) throw std::invalid_argument("sample_posterior: tau must be positive");
  Tape& tape = l.emission.tape();
  const std::size_t T = l.length(), N = l.num_states();
  TapeSample s;
  s.path.resize(T);
  s.relaxed.resize(T);
  for (std::size_t t = T; t-- > 0;) {
    Var logits = t + 1 < T ? add(fp.alpha[t], col(l.transition, s.path[t + 1])) : fp.alpha[t];
    Tensor noise(Shape{N});
    for (std::size_t i = 0; i < N; ++i) noise[i] = rng.gumbel();
    Var noisy = add(logits, tape.constant(std::move(noise)));
    s.path[t] = kernels::argmax(noisy.value().data());
    s.relaxed[t] = softmax(scale(noisy, 1.0 / tau));
  }
  return s;
}

}  // namespace statenet::crf
