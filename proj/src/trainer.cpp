#include "statenet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "statenet/crf.hpp"
#include "statenet/generator.hpp"

namespace statenet::train {

void TrainConfig::validate() const {
  if (num_states < 1) throw std::invalid_argument("TrainConfig: need at least one state");
  if (hidden < 1) throw std::invalid_argument("TrainConfig: hidden size must be positive");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("TrainConfig: beta must be >= 0");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw std::invalid_argument("TrainConfig: tau must be > 0");
  if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch size must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("TrainConfig: learning rate must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0) || !(adam_eps > 0.0))
    throw std::invalid_argument("TrainConfig: invalid Adam constants");
  if (threads < 1) throw std::invalid_argument("TrainConfig: threads must be >= 1");
}

Var elbo_estimate(const ModelVars& vars, const Tensor& seq_emb, std::span<const std::size_t> tokens, double beta,
                  double tau, Rng& rng, EntropySign sign, ElboResult* info) {
  Tape& tape = vars.states.tape();
  if (seq_emb.rows() != tokens.size())
    throw ShapeError("elbo_estimate: " + std::to_string(seq_emb.rows()) + " embeddings for " +
                     std::to_string(tokens.size()) + " tokens");
  const std::size_t N = vars.states.value().rows();
  crf::TapeLattice lattice = crf::build_lattice(tape.constant(seq_emb), vars.states, vars.start);
  crf::ForwardPass fp = crf::forward_pass(lattice);
  Var entropy = crf::posterior_entropy(fp);
  crf::TapeSample sample = crf::sample_posterior(lattice, fp, rng, tau);
  std::vector<Var> selectors;
  selectors.reserve(tokens.size());
  for (std::size_t t = 0; t < tokens.size(); ++t)
    selectors.push_back(straight_through(gen::one_hot(N, sample.path[t]), sample.relaxed[t]));
  Var log_joint = gen::joint_log_prob(vars.decoder, vars.states, vars.start, tokens, sample.path, selectors);
  if (!std::isfinite(log_joint.item())) throw NumericError("elbo_estimate: non-finite log-joint term");
  if (!std::isfinite(entropy.item())) throw NumericError("elbo_estimate: non-finite entropy term");
  Var value = add(log_joint, scale(entropy, sign_value(sign) * beta));
  if (!std::isfinite(value.item())) throw NumericError("elbo_estimate: non-finite beta * entropy term");
  if (info) {
    info->value = value.item();
    info->log_joint = log_joint.item();
    info->entropy = entropy.item();
    info->path = sample.path;
  }
  return value;
}

ElboResult elbo_estimate(const ModelParams& params, const Tensor& seq_emb, std::span<const std::size_t> tokens,
                         double beta, double tau, Rng& rng, EntropySign sign) {
  Tape tape;
  ModelVars vars = bind(tape, params);
  ElboResult r;
  Var value = elbo_estimate(vars, seq_emb, tokens, beta, tau, rng, sign, &r);
  tape.backward(value);
  r.grads = gradients(tape, vars);
  return r;
}

Var exact_elbo(const ModelVars& vars, const Tensor& seq_emb, std::span<const std::size_t> tokens, double beta,
               EntropySign sign) {
  Tape& tape = vars.states.tape();
  const std::size_t T = tokens.size(), N = vars.states.value().rows();
  if (seq_emb.rows() != T)
    throw ShapeError("exact_elbo: " + std::to_string(seq_emb.rows()) + " embeddings for " + std::to_string(T) +
                     " tokens");
  double paths = 1.0;
  for (std::size_t t = 0; t < T; ++t) paths *= static_cast<double>(N);
  if (paths > static_cast<double>(crf::kMaxEnumeratedPaths))
    throw std::invalid_argument("exact_elbo: N^T = " + std::to_string(N) + "^" + std::to_string(T) +
                                " exceeds the enumeration limit");
  crf::TapeLattice lattice = crf::build_lattice(tape.constant(seq_emb), vars.states, vars.start);
  crf::ForwardPass fp = crf::forward_pass(lattice);
  Var log_z = crf::log_partition(fp);
  Var entropy = crf::posterior_entropy(fp);
  crf::PathDistribution layout;
  layout.length = T;
  layout.num_states = N;
  Var expected;
  for (std::size_t idx = 0; idx < static_cast<std::size_t>(paths); ++idx) {
    const std::vector<std::size_t> path = layout.path(idx);
    Var q = exp(crf::posterior_log_prob(lattice, path, log_z));
    Var term = mul(q, gen::joint_log_prob(vars.decoder, vars.states, vars.start, tokens, path));
    expected = idx == 0 ? term : add(expected, term);
  }
  return add(expected, scale(entropy, sign_value(sign) * beta));
}

double exact_elbo(const ModelParams& params, const Tensor& seq_emb, std::span<const std::size_t> tokens, double beta,
                  EntropySign sign) {
  Tape tape;
  return exact_elbo(bind(tape, params, false), seq_emb, tokens, beta, sign).item();
}

ElboResult exact_elbo_with_grad(const ModelParams& params, const Tensor& seq_emb, std::span<const std::size_t> tokens,
                                double beta, EntropySign sign) {
  Tape tape;
  ModelVars vars = bind(tape, params);
  Var value = exact_elbo(vars, seq_emb, tokens, beta, sign);
  tape.backward(value);
  ElboResult r;
  r.value = value.item();
  r.grads = gradients(tape, vars);
  return r;
}

double mean_token_entropy(const crf::StateBank& bank, const io::EmbeddingStore& store) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const Tensor& seq : store.sequences) {
    total += crf::posterior_entropy(crf::build_lattice(seq, bank));
    tokens += seq.rows();
  }
  if (tokens == 0) throw std::invalid_argument("mean_token_entropy: empty store");
  return total / static_cast<double>(tokens);
}

namespace {

constexpr std::uint64_t kInitStream = 0;
constexpr std::uint64_t kShuffleStream = 0;

struct SentenceResult {
  ElboResult r;
  std::exception_ptr error;
};

template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += threads) fn(i);
    });
  for (auto& th : pool) th.join();
}

class Adam {
 public:
  Adam(const ModelParams& p, const TrainConfig& c) : c_(c) {
    for (const auto& [name, t] : p.named()) {
      m_.push_back(Tensor::zeros_like(*t));
      v_.push_back(Tensor::zeros_like(*t));
    }
  }

  // Ascent step along `grads`.
  void step(ModelParams& p, const std::vector<Tensor>& grads) {
    ++t_;
    const double bc1 = 1.0 - std::pow(c_.adam_beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(c_.adam_beta2, static_cast<double>(t_));
    auto named = p.named();
    for (std::size_t k = 0; k < named.size(); ++k) {
      auto w = named[k].second->data();
      auto g = grads[k].data();
      auto m = m_[k].data();
      auto v = v_[k].data();
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = c_.adam_beta1 * m[i] + (1.0 - c_.adam_beta1) * g[i];
        v[i] = c_.adam_beta2 * v[i] + (1.0 - c_.adam_beta2) * g[i] * g[i];
        w[i] += c_.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + c_.adam_eps);
      }
    }
  }

 private:
  const TrainConfig& c_;
  std::vector<Tensor> m_, v_;
  std::uint64_t t_ = 0;
};

bool all_finite(const std::vector<Tensor>& ts) {
  return std::all_of(ts.begin(), ts.end(), [](const Tensor& t) { return t.all_finite(); });
}

}  // namespace

ModelParams initial_params(const TrainConfig& config, const io::Corpus& corpus, const io::EmbeddingStore& store) {
  Rng rng = Rng::derive(config.seed, kInitStream, 0);
  return init_model(store, config.num_states, config.hidden, corpus.vocab_size(), rng);
}

TrainResult train(const TrainConfig& config, const io::Corpus& corpus, const io::EmbeddingStore& store,
                  const ModelParams* init) {
  config.validate();
  io::check_shapes(store, corpus);
  if (corpus.size() == 0) throw std::invalid_argument("train: empty corpus");
  ModelParams params = init ? *init : initial_params(config, corpus, store);
  if (params.decoder.vocab < corpus.vocab_size())
    throw ShapeError("train: decoder vocabulary " + std::to_string(params.decoder.vocab) + " < corpus vocabulary " +
                     std::to_string(corpus.vocab_size()));

  TrainResult result;
  Adam adam(params, config);
  std::vector<TracePoint> trace;
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::uint64_t step = 0;
  std::size_t completed = 0;

  auto snapshot = [&](std::size_t epoch) {
    Checkpoint c;
    c.params = params;
    c.epoch = epoch;
    c.elbo_trace = trace;
    c.seed = config.seed;
    c.beta = config.beta;
    return c;
  };

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    Rng shuffler = Rng::derive(config.seed, epoch, kShuffleStream);
    shuffler.shuffle(order);
    double epoch_value = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      std::vector<SentenceResult> results(end - begin);
      parallel_for(results.size(), config.threads, [&](std::size_t k) {
        const std::size_t i = order[begin + k];
        try {
          Rng rng = Rng::derive(config.seed, epoch, 1 + static_cast<std::uint64_t>(i));
          results[k].r = elbo_estimate(params, store.sequences[i], corpus.sentence(i).tokens, config.beta, config.tau,
                                       rng, config.entropy_sign);
        } catch (const NumericError&) {
          results[k].error = std::current_exception();
        }
      });

      double value = 0.0;
      std::size_t tokens = 0;
      std::vector<Tensor> grads;
      for (std::size_t k = 0; k < results.size(); ++k) {
        if (results[k].error) {
          try {
            std::rethrow_exception(results[k].error);
          } catch (const NumericError& e) {
            throw DivergenceError(std::string("training diverged at step ") + std::to_string(step + 1) + ": " +
                                      e.what(),
                                  snapshot(completed));
          }
        }
        const ElboResult& r = results[k].r;
        value += r.value;
        tokens += r.path.size();
        if (grads.empty()) {
          grads = r.grads;
        } else {
          for (std::size_t p = 0; p < grads.size(); ++p) {
            auto dst = grads[p].data();
            auto src = r.grads[p].data();
            for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += src[j];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(tokens);
      for (Tensor& g : grads)
        for (double& x : g.data()) x *= inv;
      if (!std::isfinite(value) || !all_finite(grads))
        throw DivergenceError("training diverged at step " + std::to_string(step + 1) + ": non-finite objective",
                              snapshot(completed));
      adam.step(params, grads);
      if (!all_finite([&] {
            std::vector<Tensor> ts;
            for (const auto& [n, t] : params.named()) ts.push_back(*t);
            return ts;
          }()))
        throw DivergenceError("training diverged at step " + std::to_string(step + 1) + ": non-finite parameters",
                              snapshot(completed));
      ++step;
      trace.push_back({step, value * inv});
      epoch_value += value;
      epoch_tokens += tokens;
    }
    completed = epoch;
    result.epoch_mean_elbo.push_back(epoch_value / static_cast<double>(epoch_tokens));
    const bool scheduled = config.checkpoint_every > 0 && epoch % config.checkpoint_every == 0;
    if (scheduled || epoch == config.epochs) result.checkpoints.push_back(snapshot(epoch));
  }
  if (result.checkpoints.empty()) result.checkpoints.push_back(snapshot(0));
  return result;
}

TrainResult train(const TrainConfig& config) {
  io::Corpus corpus = io::load_corpus(config.corpus_path);
  io::EmbeddingStore store = io::load_embeddings(config.embeddings_path, corpus);
  return train(config, corpus, store);
}

double batch_elbo(const ModelParams& params, const io::Corpus& corpus, const io::EmbeddingStore& store, double beta,
                  double tau, std::uint64_t seed, EntropySign sign) {
  io::check_shapes(store, corpus);
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    Tape tape;
    ModelVars vars = bind(tape, params, false);
    Rng rng = Rng::derive(seed, 0, i);
    total += elbo_estimate(vars, store.sequences[i], corpus.sentence(i).tokens, beta, tau, rng, sign).item();
    tokens += corpus.sentence(i).size();
  }
  if (tokens == 0) throw std::invalid_argument("batch_elbo: empty corpus");
  return total / static_cast<double>(tokens);
}

Selection select_model(std::span<const Checkpoint> checkpoints, const io::EmbeddingStore& store,
                       const io::Corpus& corpus, std::span<const io::TagLayer> layers, double threshold,
                       std::size_t threads) {
  if (checkpoints.empty()) throw std::invalid_argument("select_model: no checkpoints");
  if (layers.empty()) throw std::invalid_argument("select_model: no tag layers");
  for (const auto& layer : layers) io::check_shapes(layer, corpus);
  Selection s;
  for (std::size_t k = 0; k < checkpoints.size(); ++k) {
    auto assign = analysis::decode_corpus(checkpoints[k].params.bank, store, corpus, threads);
    std::vector<analysis::AlignmentReport> reports;
    for (const auto& layer : layers) reports.push_back(analysis::align_states(assign, layer, threshold));
    s.aligned_counts.push_back(analysis::aligned_union(reports).size());
    const bool better = s.aligned_counts[k] > s.aligned_counts[s.index] ||
                        (s.aligned_counts[k] == s.aligned_counts[s.index] &&
                         checkpoints[k].epoch < checkpoints[s.index].epoch);
    if (k > 0 && better) s.index = k;
  }
  return s;
}

std::vector<double> default_stage1_grid() { return {0.1, 0.01, 0.001, 1e-4, 1e-5}; }

std::vector<double> stage2_grid(double first, double second) {
  const double lo = std::min(first, second), hi = std::max(first, second);
  std::vector<double> grid{lo};
  for (int k = 1; k <= 4; ++k) {
    const double b = hi * k / 4.0;
    if (b > lo) grid.push_back(b);
  }
  return grid;
}

BetaSearchResult beta_search(const TrainConfig& config, const io::Corpus& corpus, const io::EmbeddingStore& store,
                             std::span<const io::TagLayer> layers, std::vector<double> stage1,
                             std::vector<double> stage2, double threshold) {
  if (stage1.empty()) throw std::invalid_argument("beta_search: empty stage-1 grid");
  BetaSearchResult out;
  auto evaluate = [&](double beta, int stage) {
    for (const BetaCandidate& c : out.candidates)
      if (c.beta == beta) {
        BetaCandidate copy = c;
        copy.stage = stage;
        out.candidates.push_back(copy);
        return;
      }
    BetaCandidate c;
    c.beta = beta;
    c.stage = stage;
    TrainConfig cfg = config;
    cfg.beta = beta;
    try {
      TrainResult r = train(cfg, corpus, store);
      Selection s = select_model(r.checkpoints, store, corpus, layers, threshold, config.threads);
      c.aligned = s.aligned_counts[s.index];
    } catch (const DivergenceError&) {
      c.diverged = true;
    }
    out.candidates.push_back(c);
  };

  for (double b : stage1) evaluate(b, 1);
  if (stage2.empty()) {
    std::vector<const BetaCandidate*> ranked;
    for (const auto& c : out.candidates)
      if (!c.diverged) ranked.push_back(&c);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const BetaCandidate* a, const BetaCandidate* b) { return a->aligned > b->aligned; });
    const BetaCandidate* second = nullptr;
    for (const BetaCandidate* c : ranked)
      if (c->beta != ranked.front()->beta) {
        second = c;
        break;
      }
    if (second) stage2 = stage2_grid(ranked.front()->beta, second->beta);
  }
  for (double b : stage2) evaluate(b, 2);

  const BetaCandidate* best = nullptr;
  for (const auto& c : out.candidates)
    if (!c.diverged && (!best || c.aligned > best->aligned)) best = &c;
  if (!best) throw NumericError("beta_search: every candidate diverged");
  out.best = best->beta;
  return out;
}

}  // namespace statenet::train
