#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "statenet/analysis.hpp"
#include "statenet/checkpoint.hpp"
#include "statenet/grad_check.hpp"
#include "statenet/synthetic.hpp"
#include "statenet/trainer.hpp"

using namespace statenet;
using namespace statenet::train;

namespace {

std::string fixture(const std::string& rel) { return std::string(STATENET_FIXTURES) + "/" + rel; }

struct Sentence {
  ModelParams params;
  Tensor emb;
  std::vector<std::size_t> tokens;
};

Sentence random_sentence(Rng& rng, std::size_t T, std::size_t N, std::size_t V, std::size_t D = 3,
                         std::size_t H = 3) {
  Sentence s;
  s.params.bank.states = Tensor(Shape{N, D});
  s.params.bank.start = Tensor(Shape{D});
  s.emb = Tensor(Shape{T, D});
  for (auto* t : {&s.params.bank.states, &s.params.bank.start, &s.emb})
    for (auto& x : t->data()) x = rng.uniform(-1.0, 1.0);
  s.params.decoder = gen::init_decoder(D, H, V, rng);
  for (auto& [name, t] : s.params.decoder.named())
    for (auto& x : t->data()) x = rng.uniform(-1.0, 1.0);
  for (std::size_t t = 0; t < T; ++t) s.tokens.push_back(rng.below(V));
  return s;
}

struct Fixture {
  io::Corpus corpus;
  io::EmbeddingStore store;
  io::TagLayer truth;
};

Fixture load_fixture(const std::string& name) {
  Fixture f;
  f.corpus = io::load_corpus(fixture(name + "/corpus.txt"));
  f.store = io::load_embeddings(fixture(name + "/embeddings.lse"), f.corpus);
  f.truth = io::load_tags(fixture(name + "/truth.tsv"), f.corpus, "truth");
  return f;
}

TrainConfig small_config() {
  TrainConfig c;
  c.num_states = 4;
  c.hidden = 6;
  c.epochs = 2;
  c.batch_size = 8;
  c.seed = 5;
  return c;
}

double cosine(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      ab += a[i][k] * b[i][k];
      aa += a[i][k] * a[i][k];
      bb += b[i][k] * b[i][k];
    }
  return ab / std::sqrt(aa * bb);
}

bool same_params(const ModelParams& a, const ModelParams& b) {
  auto an = a.named(), bn = b.named();
  for (std::size_t i = 0; i < an.size(); ++i)
    if (!(*an[i].second == *bn[i].second)) return false;
  return true;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.beta = -1.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.tau = 0.0;
  CHECK_THROWS(c.validate());
  c = TrainConfig{};
  c.num_states = 0;
  CHECK_THROWS(c.validate());
  CHECK(TrainConfig{}.beta == 0.005);
  CHECK(TrainConfig{}.hidden == 200);
}

TEST_CASE("exact ELBO with a deterministic posterior is the joint of that path") {
  Rng rng(1);
  auto s = random_sentence(rng, 3, 3, 4);
  // Orthogonal states and strongly peaked embeddings make q a point mass.
  const std::vector<std::size_t> peaks{2, 0, 2};
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t k = 0; k < 3; ++k) s.params.bank.states(n, k) = n == k ? 1.0 : 0.0;
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t k = 0; k < 3; ++k) s.emb(t, k) = k == peaks[t] ? 60.0 : 0.0;
  auto l = crf::build_lattice(s.emb, s.params.bank);
  REQUIRE(crf::posterior_entropy(l) <= 1e-20);
  auto path = crf::viterbi(l).path;
  CHECK(path == peaks);
  const double joint = gen::joint_log_prob(s.params.decoder, s.params.bank, s.tokens, path);
  CHECK(std::abs(exact_elbo(s.params, s.emb, s.tokens, 0.0) - joint) <= 1e-9);
  Rng sampler(2);
  for (int i = 0; i < 100; ++i)
    CHECK(std::abs(elbo_estimate(s.params, s.emb, s.tokens, 0.0, 1.0, sampler).value - joint) <= 1e-3);
}

TEST_CASE("exact ELBO is invariant under relabeling states") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    auto s = random_sentence(rng, 3, 4, 3);
    auto permuted = s.params;
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t k = 0; k < 3; ++k) permuted.bank.states(perm[n], k) = s.params.bank.states(n, k);
    for (double beta : {0.0, 0.5}) {
      CHECK(std::abs(exact_elbo(s.params, s.emb, s.tokens, beta) - exact_elbo(permuted, s.emb, s.tokens, beta)) <=
            1e-10);
    }
  }
}

TEST_CASE("large beta is dominated by the bounded entropy term") {
  Rng rng(4);
  auto s = random_sentence(rng, 4, 3, 3);
  Rng sampler(5);
  auto r = elbo_estimate(s.params, s.emb, s.tokens, 1e3, 1.0, sampler);
  CHECK(r.entropy >= 0.0);
  CHECK(r.entropy <= 4 * std::log(3.0) + 1e-9);
  CHECK(std::abs(r.value - (r.log_joint + 1e3 * r.entropy)) <= 1e-9);
  auto minus = elbo_estimate(s.params, s.emb, s.tokens, 1e3, 1.0, sampler, EntropySign::Minus);
  CHECK(std::abs(minus.value - (minus.log_joint - 1e3 * minus.entropy)) <= 1e-9);
}

TEST_CASE("exact ELBO gradients match finite differences") {
  Rng rng(6);
  for (int trial = 0; trial < 5; ++trial) {
    auto s = random_sentence(rng, 2, 2, 2);
    std::vector<Tensor> params;
    for (auto& [name, t] : s.params.named()) params.push_back(*t);
    auto loss = [&](Tape&, std::span<const Var> p) {
      ModelVars v{p[0], p[1], {p[2], p[3], p[4], p[5], p[6], p[7], p[8], p[9], p[10], p[11], 3}};
      return exact_elbo(v, s.emb, s.tokens, 0.3);
    };
    CHECK(grad_check(loss, params).max_rel_error <= 1e-5);
    auto g = exact_elbo_with_grad(s.params, s.emb, s.tokens, 0.3);
    Tape tape;
    ModelVars v = bind(tape, s.params);
    Var e = exact_elbo(v, s.emb, s.tokens, 0.3);
    tape.backward(e);
    auto ref = gradients(tape, v);
    for (std::size_t i = 0; i < ref.size(); ++i)
      for (std::size_t k = 0; k < ref[i].size(); ++k) CHECK(g.grads[i][k] == ref[i][k]);
  }
}

TEST_CASE("Monte Carlo estimates agree with the exact ELBO") {
  Rng rng(7);
  auto s = random_sentence(rng, 2, 2, 2);
  const double exact = exact_elbo(s.params, s.emb, s.tokens, 0.5);
  const int draws = 200000;
  double mean = 0.0, m2 = 0.0;
  Rng sampler(8);
  for (int i = 0; i < draws; ++i) {
    const double v = elbo_estimate(s.params, s.emb, s.tokens, 0.5, 1.0, sampler).value;
    const double d = v - mean;
    mean += d / (i + 1);
    m2 += d * (v - mean);
  }
  const double se = std::sqrt(m2 / (draws - 1) / draws);
  CHECK(std::abs(mean - exact) <= 3.0 * se);
}

TEST_CASE("mean estimator gradient points along the exact gradient") {
  // The straight-through path biases the state-bank gradient by an amount
  // that depends on the instance, so the check runs over a fixed family.
  std::vector<double> cosines;
  for (int inst = 0; inst < 12; ++inst) {
    Rng rng(100 + inst);
    auto s = random_sentence(rng, 2, 2, 2);
    auto exact = exact_elbo_with_grad(s.params, s.emb, s.tokens, 0.5).grads;
    std::vector<Tensor> total;
    Rng sampler(9);
    for (int i = 0; i < 20000; ++i) {
      auto r = elbo_estimate(s.params, s.emb, s.tokens, 0.5, 1.0, sampler);
      if (total.empty()) {
        total = r.grads;
        continue;
      }
      for (std::size_t k = 0; k < r.grads.size(); ++k)
        for (std::size_t j = 0; j < r.grads[k].size(); ++j) total[k][j] += r.grads[k][j];
    }
    const double c = cosine(total, exact);
    cosines.push_back(c);
    // Decoder gradients do not pass through the sample's relaxation.
    std::vector<Tensor> dec_a(total.begin() + 2, total.end()), dec_b(exact.begin() + 2, exact.end());
    CHECK(cosine(dec_a, dec_b) >= 0.999);
  }
  std::sort(cosines.begin(), cosines.end());
  CHECK(0.5 * (cosines[5] + cosines[6]) >= 0.99);
  CHECK(cosines.front() >= 0.9);
}

TEST_CASE("exact ELBO refuses lattices too large to enumerate") {
  Rng rng(9);
  auto s = random_sentence(rng, 6, 8, 2);
  CHECK_THROWS(exact_elbo(s.params, s.emb, s.tokens, 0.0));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  auto f = load_fixture("tiny");
  REQUIRE(f.corpus.size() == 4);
  auto cfg = small_config();
  cfg.num_states = 3;
  cfg.epochs = 1;
  cfg.batch_size = 2;
  cfg.learning_rate = 0.0;
  auto init = initial_params(cfg, f.corpus, f.store);
  auto r = train::train(cfg, f.corpus, f.store);
  REQUIRE(r.checkpoints.size() == 1);
  CHECK(same_params(r.checkpoints.back().params, init));
  CHECK(r.checkpoints.back().elbo_trace.size() == 2);
}

TEST_CASE("training is deterministic and emits checkpoints on schedule") {
  auto f = load_fixture("small");
  auto cfg = small_config();
  cfg.epochs = 3;
  cfg.checkpoint_every = 2;
  auto a = train::train(cfg, f.corpus, f.store);
  auto b = train::train(cfg, f.corpus, f.store);
  REQUIRE(a.checkpoints.size() == 2);
  CHECK(a.checkpoints[0].epoch == 2);
  CHECK(a.checkpoints[1].epoch == 3);
  CHECK(a.checkpoints.back().elbo_trace == b.checkpoints.back().elbo_trace);
  CHECK(same_params(a.checkpoints.back().params, b.checkpoints.back().params));
  CHECK(a.epoch_mean_elbo == b.epoch_mean_elbo);
  CHECK(a.epoch_mean_elbo.size() == 3);
  cfg.threads = 3;
  auto c = train::train(cfg, f.corpus, f.store);
  CHECK(c.checkpoints.back().elbo_trace == a.checkpoints.back().elbo_trace);
  cfg.threads = 1;
  cfg.seed = 6;
  auto d = train::train(cfg, f.corpus, f.store);
  CHECK_FALSE(d.checkpoints.back().elbo_trace == a.checkpoints.back().elbo_trace);
}

TEST_CASE("checkpoint round trip reproduces the batch ELBO") {
  auto f = load_fixture("small");
  auto cfg = small_config();
  auto r = train::train(cfg, f.corpus, f.store);
  const auto& ck = r.checkpoints.back();
  const auto path = (std::filesystem::temp_directory_path() / "statenet_ckpt.lsc").string();
  save_checkpoint(ck, path);
  auto back = load_checkpoint(path);
  CHECK(back.epoch == ck.epoch);
  CHECK(back.seed == ck.seed);
  CHECK(back.beta == ck.beta);
  CHECK(back.elbo_trace == ck.elbo_trace);
  CHECK(same_params(back.params, ck.params));
  const double a = batch_elbo(ck.params, f.corpus, f.store, 0.005, 1.0, 77);
  const double b = batch_elbo(back.params, f.corpus, f.store, 0.005, 1.0, 77);
  CHECK(std::abs(a - b) <= 1e-12);
  CHECK(encode_checkpoint(back) == encode_checkpoint(ck));
}

TEST_CASE("corrupt checkpoints are rejected") {
  auto f = load_fixture("tiny");
  auto cfg = small_config();
  cfg.num_states = 2;
  Checkpoint ck;
  ck.params = initial_params(cfg, f.corpus, f.store);
  const std::string bytes = encode_checkpoint(ck);
  auto kind = [](const std::string& b) {
    try {
      decode_checkpoint(b);
    } catch (const io::DataError& e) {
      return e.kind();
    }
    return io::DataError::Kind::Io;
  };
  CHECK(kind("LSE1" + bytes.substr(4)) == io::DataError::Kind::BadMagic);
  CHECK(kind(bytes.substr(0, bytes.size() - 5)) == io::DataError::Kind::Truncated);
  CHECK(kind(bytes + "x") == io::DataError::Kind::Malformed);
}

TEST_CASE("model selection") {
  // Six clusters of tokens with embeddings 10 e_k; every cluster carries one
  // tag except cluster 5, split evenly between two tags.
  const std::size_t D = 6;
  std::vector<std::vector<std::string>> words;
  io::TagLayer layer{"POS", {}};
  io::EmbeddingStore store;
  store.dim = D;
  for (std::size_t s = 0; s < 4; ++s) {
    std::vector<std::string> w, t;
    Tensor m(Shape{12, D});
    for (std::size_t i = 0; i < 12; ++i) {
      const std::size_t k = i % 6;
      w.push_back("w" + std::to_string(k));
      t.push_back(k == 5 ? (i < 6 ? "X" : "Y") : "T" + std::to_string(k));
      m(i, k) = 10.0;
    }
    words.push_back(w);
    layer.tags.push_back(t);
    store.sequences.push_back(std::move(m));
  }
  auto corpus = io::Corpus::from_surfaces(words);

  Rng rng(10);
  Checkpoint five, two;
  five.params.bank = {Tensor(Shape{6, D}), Tensor(Shape{D})};
  for (std::size_t k = 0; k < 6; ++k) five.params.bank.states(k, k) = 1.0;
  two.params.bank = {Tensor(Shape{6, D}), Tensor(Shape{D})};
  two.params.bank.states(0, 0) = 1.0;
  two.params.bank.states(1, 1) = 1.0;
  for (std::size_t n = 2; n < 6; ++n)
    for (std::size_t k = 2; k < 6; ++k) two.params.bank.states(n, k) = 1.0;
  five.epoch = 2;
  two.epoch = 1;
  std::vector<io::TagLayer> layers{layer};

  std::vector<Checkpoint> single{two};
  CHECK(select_model(single, store, corpus, layers).index == 0);

  std::vector<Checkpoint> both{two, five};
  auto sel = select_model(both, store, corpus, layers);
  CHECK(sel.aligned_counts == std::vector<std::size_t>{2, 5});
  CHECK(sel.index == 1);

  std::vector<Checkpoint> tie{five, five};
  tie[0].epoch = 4;
  tie[1].epoch = 3;
  CHECK(select_model(tie, store, corpus, layers).index == 1);

  CHECK_THROWS(select_model(std::vector<Checkpoint>{}, store, corpus, layers));
  CHECK_THROWS(select_model(single, store, corpus, std::vector<io::TagLayer>{}));
}

TEST_CASE("beta grids") {
  CHECK(default_stage1_grid() == std::vector<double>{0.1, 0.01, 0.001, 1e-4, 1e-5});
  auto g = stage2_grid(0.01, 0.001);
  REQUIRE(g.size() == 5);
  const std::vector<double> expected{0.001, 0.0025, 0.005, 0.0075, 0.01};
  for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-15));
  CHECK(stage2_grid(0.001, 0.01) == g);
}

TEST_CASE("beta search") {
  auto f = load_fixture("small");
  auto cfg = small_config();
  cfg.epochs = 1;
  std::vector<io::TagLayer> layers{f.truth};
  auto one = beta_search(cfg, f.corpus, f.store, layers, {0.02}, std::vector<double>{0.02});
  CHECK(one.best == 0.02);

  auto r = beta_search(cfg, f.corpus, f.store, layers, {0.1, 0.001, 1e-5});
  std::size_t stage2 = 0;
  const BetaCandidate* best = nullptr;
  for (const auto& c : r.candidates) {
    stage2 += c.stage == 2;
    if (c.beta == r.best && !best) best = &c;
  }
  CHECK(stage2 >= 1);
  REQUIRE(best);
  for (const auto& c : r.candidates) CHECK(best->aligned >= c.aligned);
}

TEST_CASE("mean ELBO rises over the first epochs on the synthetic corpus") {
  synth::HmmConfig hc;
  hc.seed = 1;
  auto data = synth::generate_hmm(hc);
  TrainConfig cfg;
  cfg.num_states = 8;
  cfg.hidden = 32;
  cfg.epochs = 5;
  cfg.seed = 1;
  cfg.checkpoint_every = 0;
  auto r = train::train(cfg, data.corpus, data.store);
  REQUIRE(r.epoch_mean_elbo.size() == 5);
  for (std::size_t e = 1; e < 5; ++e) CHECK(r.epoch_mean_elbo[e] > r.epoch_mean_elbo[e - 1]);
}
