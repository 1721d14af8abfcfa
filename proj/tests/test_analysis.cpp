#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numeric>
#include <set>
#include <vector>

#include <json.hpp>

#include "statenet/analysis.hpp"
#include "statenet/rng.hpp"

using namespace statenet;
using namespace statenet::analysis;

namespace {

using Paths = std::vector<std::vector<std::size_t>>;

// Corpus of `lengths` sentences whose surfaces come from `surface(sentence, position)`.
template <typename F>
io::Corpus make_corpus(const std::vector<std::size_t>& lengths, F&& surface) {
  std::vector<std::vector<std::string>> words;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    words.emplace_back();
    for (std::size_t t = 0; t < lengths[i]; ++t) words.back().push_back(surface(i, t));
  }
  return io::Corpus::from_surfaces(words);
}

io::Corpus flat_corpus(const std::vector<std::string>& words) { return io::Corpus::from_surfaces({words}); }

// One sentence holding `counts[k]` tokens of state k. Tokens of state k get
// tags from `tags[k]` in order.
struct Built {
  io::Corpus corpus;
  StateAssignment assign;
  io::TagLayer layer;
};

Built single_sentence(const std::vector<std::vector<std::string>>& tags_per_state) {
  std::vector<std::string> words, tags;
  std::vector<std::size_t> path;
  for (std::size_t k = 0; k < tags_per_state.size(); ++k)
    for (const auto& tag : tags_per_state[k]) {
      words.push_back("w" + std::to_string(words.size()));
      tags.push_back(tag);
      path.push_back(k);
    }
  Built b{flat_corpus(words), StateAssignment::from_paths({path}, tags_per_state.size()), {"POS", {tags}}};
  return b;
}

std::vector<std::string> repeat(const std::string& tag, std::size_t n) { return std::vector<std::string>(n, tag); }

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

struct RandomFixture {
  io::Corpus corpus;
  StateAssignment assign;
  io::TagLayer layer;
  std::size_t num_states = 0;
};

RandomFixture random_fixture(Rng& rng) {
  RandomFixture f;
  f.num_states = 2 + rng.below(8);
  const std::size_t sentences = 1 + rng.below(12);
  const std::size_t tag_count = 1 + rng.below(4);
  std::vector<std::size_t> lengths;
  for (std::size_t i = 0; i < sentences; ++i) lengths.push_back(1 + rng.below(15));
  const std::vector<std::string> vocab{"the", "of", "cat", "dog", "runs", "and", "blue"};
  f.corpus = make_corpus(lengths, [&](std::size_t, std::size_t) { return vocab[rng.below(vocab.size())]; });
  Paths paths;
  f.layer.name = "POS";
  for (std::size_t len : lengths) {
    paths.emplace_back();
    f.layer.tags.emplace_back();
    for (std::size_t t = 0; t < len; ++t) {
      // Skewed draws, so that some states end up aligned.
      const std::size_t z = rng.uniform() < 0.5 ? rng.below(2) : rng.below(f.num_states);
      paths.back().push_back(z);
      const bool untagged = rng.uniform() < 0.1;
      const std::size_t tag = rng.uniform() < 0.8 ? z % tag_count : rng.below(tag_count);
      f.layer.tags.back().push_back(untagged ? std::string(io::kUntagged) : "T" + std::to_string(tag));
    }
  }
  f.assign = StateAssignment::from_paths(paths, f.num_states);
  return f;
}

std::vector<std::size_t> random_permutation(Rng& rng, std::size_t n) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  rng.shuffle(p);
  return p;
}

StateAssignment relabel(const StateAssignment& a, const std::vector<std::size_t>& perm) {
  Paths paths = a.paths;
  for (auto& p : paths)
    for (auto& z : p) z = perm[z];
  return StateAssignment::from_paths(paths, a.num_states);
}

}  // namespace

TEST_CASE("state assignment index") {
  auto a = StateAssignment::from_paths({{1, 2, 2}, {0}}, 4);
  CHECK(a.token_count() == 4);
  CHECK(a.frequency == std::vector<std::size_t>{1, 1, 2, 0});
  REQUIRE(a.occurrences[2].size() == 2);
  CHECK(a.occurrences[2][0].sentence == 0);
  CHECK(a.occurrences[2][0].position == 1);
  CHECK(a.occurrences[0][0].sentence == 1);
  CHECK_THROWS(StateAssignment::from_paths({{4}}, 4));
}

TEST_CASE("decode_corpus") {
  SUBCASE("single state") {
    crf::StateBank bank{Tensor::matrix(1, 2, {0.3, -0.4}), Tensor::vector({0.1, 0.2})};
    io::EmbeddingStore store{2, {Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}), Tensor::matrix(1, 2, {-1, 0})}};
    auto corpus = io::Corpus::from_surfaces({{"a", "b", "c"}, {"d"}});
    auto a = decode_corpus(bank, store, corpus);
    CHECK(a.paths == Paths{{0, 0, 0}, {0}});
    CHECK(a.frequency == std::vector<std::size_t>{4});
  }
  SUBCASE("orthonormal bank recovers the rows") {
    crf::StateBank bank{Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({0, 0})};
    io::EmbeddingStore store{2,
                             {Tensor::matrix(4, 2, {1, 0, 1, 0, 0, 1, 0, 1}), Tensor::matrix(4, 2, {0, 1, 0, 1, 0, 1, 1, 0}),
                              Tensor::matrix(3, 2, {0, 3, 3, 0, 0, 3})}};
    auto corpus = io::Corpus::from_surfaces({{"a", "a", "b", "b"}, {"b", "b", "b", "a"}, {"b", "a", "b"}});
    auto a = decode_corpus(bank, store, corpus);
    CHECK(a.paths[0] == std::vector<std::size_t>{0, 0, 1, 1});
    CHECK(a.paths[2] == std::vector<std::size_t>{1, 0, 1});
  }
  SUBCASE("frequencies match a recount and do not depend on threads") {
    Rng rng(1);
    crf::StateBank bank{Tensor(Shape{5, 3}), Tensor(Shape{3})};
    for (auto& x : bank.states.data()) x = rng.normal();
    io::EmbeddingStore store{3, {}};
    std::vector<std::vector<std::string>> words;
    for (int i = 0; i < 30; ++i) {
      const std::size_t len = 1 + rng.below(9);
      Tensor m(Shape{len, 3});
      for (auto& x : m.data()) x = rng.normal();
      store.sequences.push_back(m);
      words.push_back(std::vector<std::string>(len, "x"));
    }
    auto corpus = io::Corpus::from_surfaces(words);
    auto a = decode_corpus(bank, store, corpus);
    std::vector<std::size_t> recount(5, 0);
    for (std::size_t i = 0; i < a.paths.size(); ++i) {
      CHECK(a.paths[i] == crf::viterbi(crf::build_lattice(store.sequences[i], bank)).path);
      for (auto z : a.paths[i]) ++recount[z];
    }
    CHECK(recount == a.frequency);
    CHECK(decode_corpus(bank, store, corpus, 4).paths == a.paths);
  }
  SUBCASE("dimension mismatch") {
    crf::StateBank bank{Tensor::matrix(1, 2, {0.3, -0.4}), Tensor::vector({0.1, 0.2})};
    io::EmbeddingStore store{3, {Tensor::matrix(1, 3, {1, 2, 3})}};
    CHECK_THROWS(decode_corpus(bank, store, io::Corpus::from_surfaces({{"a"}})));
  }
}

TEST_CASE("happy/sad: 90 of 100 occurrences tagged ADJ align at 0.9") {
  auto b = single_sentence({concat(repeat("ADJ", 90), repeat("NOUN", 10))});
  auto r = align_states(b.assign, b.layer, 0.9);
  REQUIRE(r.num_aligned() == 1);
  CHECK(r.aligned[0].state == 0);
  CHECK(r.aligned[0].tag == "ADJ");
  CHECK(r.aligned[0].share == 0.9);
  CHECK(r.aligned[0].frequency == 100);
  CHECK(r.coverage_percent == 100.0);
  auto below = single_sentence({concat(repeat("ADJ", 89), repeat("NOUN", 11))});
  CHECK(align_states(below.assign, below.layer, 0.9).num_aligned() == 0);
}

TEST_CASE("alignment rules") {
  SUBCASE("single occurrence aligns with its tag") {
    auto b = single_sentence({{"VERB"}});
    auto r = align_states(b.assign, b.layer);
    REQUIRE(r.num_aligned() == 1);
    CHECK(r.aligned[0].share == 1.0);
    CHECK(r.aligned[0].tag == "VERB");
  }
  SUBCASE("shares 0.95, 0.89 and 0.50 give one aligned state") {
    auto b = single_sentence({concat(repeat("A", 95), repeat("B", 5)), concat(repeat("A", 89), repeat("B", 11)),
                              concat(repeat("A", 50), repeat("B", 50))});
    auto r = align_states(b.assign, b.layer, 0.9);
    REQUIRE(r.num_aligned() == 1);
    CHECK(r.aligned[0].state == 0);
    CHECK(r.not_aligned == std::vector<std::size_t>{1, 2});
    CHECK(r.coverage_percent == doctest::Approx(100.0 / 3.0));
  }
  SUBCASE("untagged tokens count against the share and never dominate") {
    const std::string u(io::kUntagged);
    auto b = single_sentence({concat(repeat("ADJ", 9), {u}), repeat(u, 5), concat(repeat("ADJ", 8), repeat(u, 2))});
    auto r = align_states(b.assign, b.layer, 0.9);
    REQUIRE(r.num_aligned() == 1);
    CHECK(r.aligned[0].state == 0);
  }
  SUBCASE("unused states are listed as not aligned") {
    auto corpus = flat_corpus({"a", "b"});
    auto a = StateAssignment::from_paths({{0, 0}}, 3);
    io::TagLayer layer{"POS", {{"X", "X"}}};
    auto r = align_states(a, layer);
    CHECK(r.num_aligned() == 1);
    CHECK(r.not_aligned == std::vector<std::size_t>{1, 2});
  }
  SUBCASE("tag ties go to the smaller tag") {
    auto b = single_sentence({{"B", "A"}});
    auto r = align_states(b.assign, b.layer, 0.5);
    REQUIRE(r.num_aligned() == 1);
    CHECK(r.aligned[0].tag == "A");
  }
  SUBCASE("errors") {
    auto b = single_sentence({{"X"}});
    CHECK_THROWS(align_states(b.assign, b.layer, 0.0));
    CHECK_THROWS(align_states(b.assign, b.layer, 1.5));
    CHECK_THROWS(align_states(StateAssignment::from_paths({}, 2), io::TagLayer{"POS", {}}));
  }
}

TEST_CASE("alignment is monotone in the threshold and invariant under relabeling") {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_fixture(rng);
    double prev_count = 1e9, prev_cov = 1e9;
    for (double th : {0.1, 0.3, 0.5, 0.7, 0.9, 0.95, 1.0}) {
      auto r = align_states(f.assign, f.layer, th);
      CHECK(static_cast<double>(r.num_aligned()) <= prev_count);
      CHECK(r.coverage_percent <= prev_cov + 1e-12);
      CHECK(r.coverage_percent >= 0.0);
      CHECK(r.coverage_percent <= 100.0);
      CHECK(r.num_aligned() + r.not_aligned.size() == f.num_states);
      prev_count = static_cast<double>(r.num_aligned());
      prev_cov = r.coverage_percent;
    }
    auto perm = random_permutation(rng, f.num_states);
    auto base = align_states(f.assign, f.layer, 0.6);
    auto moved = align_states(relabel(f.assign, perm), f.layer, 0.6);
    CHECK(moved.num_aligned() == base.num_aligned());
    CHECK(moved.coverage_percent == doctest::Approx(base.coverage_percent).epsilon(1e-12));
    std::set<std::pair<std::size_t, std::string>> want, got;
    for (const auto& a : base.aligned) want.insert({perm[a.state], a.tag});
    for (const auto& a : moved.aligned) got.insert({a.state, a.tag});
    CHECK(want == got);
  }
}

TEST_CASE("union of aligned states across layers") {
  auto corpus = flat_corpus({"a", "b", "c", "d"});
  auto a = StateAssignment::from_paths({{0, 0, 1, 2}}, 4);
  io::TagLayer pos{"POS", {{"N", "N", "V", "X"}}};
  io::TagLayer ent{"ENT", {{"O", "P", "O", "O"}}};
  std::vector<AlignmentReport> reports{align_states(a, pos), align_states(a, ent)};
  CHECK(reports[0].num_aligned() == 3);
  CHECK(reports[1].num_aligned() == 2);
  CHECK(aligned_union(reports) == std::set<std::size_t>{0, 1, 2});
  auto s = summarize_union(a, reports);
  CHECK(s.aligned == 3);
  CHECK(s.not_aligned == 1);
  CHECK(s.not_aligned_coverage_percent == 0.0);
}

TEST_CASE("state composition") {
  auto corpus = flat_corpus({"the", "of", "computer", "The", "of", "and", "cat"});
  auto a = StateAssignment::from_paths({{0, 0, 1, 2, 2, 2, 2}}, 4);
  auto c = state_composition(a, corpus, io::FunctionWordList::standard(), 1);
  CHECK(c.function_fraction[0] == 1.0);
  CHECK(c.function_fraction[1] == 0.0);
  CHECK(c.function_fraction[2] == 0.75);
  CHECK(c.function_fraction[3] == 0.0);
  CHECK(c.frequency == std::vector<std::size_t>{2, 1, 4, 0});
  CHECK(c.ranking == std::vector<std::size_t>{2, 0, 1, 3});
  CHECK(c.function_total == 5);
  CHECK(c.head_function_share == doctest::Approx(3.0 / 5.0));
  CHECK(state_composition(a, corpus, io::FunctionWordList::standard(), 2).head_function_share == 1.0);
  CHECK(state_composition(a, corpus).head_k == 50);
}

TEST_CASE("composition fractions stay in bounds") {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_fixture(rng);
    auto c = state_composition(f.assign, f.corpus);
    std::size_t fw = 0;
    for (std::size_t n = 0; n < f.num_states; ++n) {
      CHECK(c.function_fraction[n] >= 0.0);
      CHECK(c.function_fraction[n] <= 1.0);
      if (c.frequency[n] == 0) CHECK(c.function_fraction[n] == 0.0);
      fw += static_cast<std::size_t>(std::llround(c.function_fraction[n] * c.frequency[n]));
    }
    CHECK(fw == c.function_total);
    CHECK(c.head_function_share >= 0.0);
    CHECK(c.head_function_share <= 1.0);
  }
}

TEST_CASE("transition statistics") {
  SUBCASE("one path") {
    auto corpus = flat_corpus({"to", "buy", "it"});
    auto g = transition_stats(StateAssignment::from_paths({{1, 2, 2}}, 3), corpus);
    REQUIRE(g.edges.size() == 2);
    CHECK(g.edges[0].src == 1);
    CHECK(g.edges[0].dst == 2);
    CHECK(g.edges[0].count == 1);
    CHECK(g.edges[0].bigrams == std::vector<std::pair<std::string, std::size_t>>{{"to-buy", 1}});
    CHECK(g.edges[1].src == 2);
    CHECK(g.edges[1].dst == 2);
    CHECK(g.edges[1].count == 1);
    REQUIRE(g.nodes.size() == 2);
    CHECK(g.nodes[0].id == 1);
    CHECK(g.nodes[0].func_frac == 1.0);
  }
  SUBCASE("no pairs across sentences") {
    auto corpus = io::Corpus::from_surfaces({{"a", "b"}, {"a", "b"}});
    auto g = transition_stats(StateAssignment::from_paths({{0, 1}, {0, 1}}, 2), corpus);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].count == 2);
    CHECK(g.edges[0].bigrams == std::vector<std::pair<std::string, std::size_t>>{{"a-b", 2}});
  }
  SUBCASE("bigrams ranked by count then text and truncated") {
    auto corpus = io::Corpus::from_surfaces({{"x", "b"}, {"x", "a"}, {"y", "c"}, {"y", "c"}});
    auto g = transition_stats(StateAssignment::from_paths({{0, 1}, {0, 1}, {0, 1}, {0, 1}}, 2), corpus,
                              io::FunctionWordList::standard(), 2);
    REQUIRE(g.edges.size() == 1);
    CHECK(g.edges[0].bigrams == std::vector<std::pair<std::string, std::size_t>>{{"y-c", 2}, {"x-a", 1}});
  }
}

TEST_CASE("edge counts are conserved") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = random_fixture(rng);
    auto g = transition_stats(f.assign, f.corpus);
    std::size_t edges = 0, expected = 0, node_freq = 0;
    for (const auto& e : g.edges) edges += e.count;
    for (const auto& p : f.assign.paths) expected += p.size() - 1;
    for (const auto& n : g.nodes) node_freq += n.freq;
    CHECK(edges == expected);
    CHECK(node_freq == f.assign.token_count());
  }
}

TEST_CASE("hub scores") {
  SUBCASE("star") {
    TransitionGraph g;
    for (std::size_t n = 0; n <= 5; ++n) g.nodes.push_back({n, 1, n == 0 ? 1.0 : 0.0});
    for (std::size_t n = 1; n <= 5; ++n) {
      g.edges.push_back({0, n, 1, {}});
      g.edges.push_back({n, 0, 1, {}});
    }
    std::sort(g.edges.begin(), g.edges.end(),
              [](const GraphEdge& a, const GraphEdge& b) { return std::tie(a.src, a.dst) < std::tie(b.src, b.dst); });
    auto h = hub_scores(g);
    CHECK(h.degree[0] == 5);
    for (std::size_t n = 1; n <= 5; ++n) CHECK(h.degree[n] == 1);
    CHECK(h.strength[0] == 10);
    CHECK(h.by_degree.front() == 0);
    CHECK(h.by_strength.front() == 0);
    REQUIRE(h.function_strength_correlation.has_value());
    CHECK(*h.function_strength_correlation == doctest::Approx(1.0));
  }
  SUBCASE("self-loop") {
    TransitionGraph g{{{3, 4, 0.5}}, {{3, 3, 7, {}}}};
    auto h = hub_scores(g);
    CHECK(h.degree == std::vector<std::size_t>{1});
    CHECK(h.strength == std::vector<std::size_t>{7});
    CHECK_FALSE(h.function_strength_correlation.has_value());
  }
  SUBCASE("strength equals a recount of the edge table") {
    Rng rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto f = random_fixture(rng);
      auto g = transition_stats(f.assign, f.corpus);
      if (g.nodes.empty()) continue;
      auto h = hub_scores(g);
      std::map<std::size_t, std::size_t> strength;
      std::map<std::size_t, std::set<std::size_t>> nbrs;
      for (const auto& e : g.edges) {
        strength[e.src] += e.count;
        if (e.src != e.dst) strength[e.dst] += e.count;
        nbrs[e.src].insert(e.dst);
        nbrs[e.dst].insert(e.src);
      }
      for (std::size_t i = 0; i < h.ids.size(); ++i) {
        CHECK(h.strength[i] == strength[h.ids[i]]);
        CHECK(h.degree[i] == nbrs[h.ids[i]].size());
      }
    }
  }
  CHECK_THROWS(hub_scores(TransitionGraph{}));
}

TEST_CASE("degree and strength multisets survive relabeling") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = random_fixture(rng);
    auto perm = random_permutation(rng, f.num_states);
    auto a = transition_stats(f.assign, f.corpus), b = transition_stats(relabel(f.assign, perm), f.corpus);
    if (a.nodes.empty()) continue;
    auto ha = hub_scores(a), hb = hub_scores(b);
    auto sorted = [](std::vector<std::size_t> v) {
      std::sort(v.begin(), v.end());
      return v;
    };
    CHECK(sorted(ha.degree) == sorted(hb.degree));
    CHECK(sorted(ha.strength) == sorted(hb.strength));
  }
}

TEST_CASE("top words") {
  auto corpus = flat_corpus({"be", "is", "be", "run", "be", "am", "al"});
  auto a = StateAssignment::from_paths({{0, 0, 0, 1, 0, 0, 0}}, 3);
  auto top = top_words(a, corpus, 0, 10);
  CHECK(top == std::vector<std::pair<std::string, std::size_t>>{{"be", 3}, {"al", 1}, {"am", 1}, {"is", 1}});
  CHECK(top_words(a, corpus, 0, 1) == std::vector<std::pair<std::string, std::size_t>>{{"be", 3}});
  CHECK(top_words(a, corpus, 2, 5).empty());
  CHECK_THROWS(top_words(a, corpus, 3, 5));
  std::size_t total = 0;
  for (const auto& [w, c] : top_words(a, corpus, 0, 100)) total += c;
  CHECK(total == a.frequency[0]);
}

TEST_CASE("longest common run and traversal traces") {
  const std::vector<std::size_t> a{1, 7, 3, 3, 9}, b{4, 7, 3, 3, 2, 7, 3};
  auto [ia, ib, len] = longest_common_run(a, b);
  CHECK(ia == 1);
  CHECK(ib == 1);
  CHECK(len == 3);

  auto corpus = io::Corpus::from_surfaces({{"a", "b", "c"}, {"a", "b", "c"}, {"d", "e"}, {"p", "q", "r", "s", "t"}});
  auto assign = StateAssignment::from_paths({{0, 1, 2}, {0, 1, 2}, {3, 4}, {5, 7, 3, 3, 6}}, 8);
  const std::vector<std::size_t> same{0, 1};
  auto t = traversal_trace(assign, corpus, same);
  REQUIRE(t.shared.size() == 1);
  CHECK(t.shared[0].states == std::vector<std::size_t>{0, 1, 2});
  REQUIRE(t.chains.size() == 2);
  CHECK(t.chains[0][1] == std::pair<std::string, std::size_t>{"b", 1});
  const std::vector<std::size_t> disjoint{0, 2};
  CHECK(traversal_trace(assign, corpus, disjoint).shared[0].states.empty());
  const std::vector<std::size_t> three{0, 2, 3};
  CHECK(traversal_trace(assign, corpus, three).shared.size() == 3);
  const std::vector<std::size_t> bad{0, 9};
  CHECK_THROWS(traversal_trace(assign, corpus, bad));

  auto known = StateAssignment::from_paths({{1, 7, 3, 3, 9}, {4, 7, 3, 3, 2}}, 10);
  auto kc = io::Corpus::from_surfaces({{"a", "b", "c", "d", "e"}, {"f", "g", "h", "i", "j"}});
  const std::vector<std::size_t> pair{0, 1};
  auto kt = traversal_trace(known, kc, pair);
  CHECK(kt.shared[0].states == std::vector<std::size_t>{7, 3, 3});
  CHECK(kt.shared[0].first_offset == 1);
  CHECK(kt.shared[0].second_offset == 1);
}

TEST_CASE("shared subpath lengths survive relabeling") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    auto f = random_fixture(rng);
    std::vector<std::size_t> idx(f.corpus.size());
    std::iota(idx.begin(), idx.end(), 0);
    auto perm = random_permutation(rng, f.num_states);
    auto a = traversal_trace(f.assign, f.corpus, idx);
    auto b = traversal_trace(relabel(f.assign, perm), f.corpus, idx);
    REQUIRE(a.shared.size() == b.shared.size());
    for (std::size_t k = 0; k < a.shared.size(); ++k) CHECK(a.shared[k].states.size() == b.shared[k].states.size());
  }
}

TEST_CASE("graph export") {
  auto corpus = flat_corpus({"to", "buy", "it"});
  auto g = transition_stats(StateAssignment::from_paths({{0, 1, 1}}, 2), corpus);
  const std::string json = graph_to_json(g);
  CHECK(graph_from_json(json) == g);
  CHECK(graph_to_json(g) == json);
  auto doc = nlohmann::json::parse(json);
  CHECK(doc["nodes"][0]["id"] == 0);
  CHECK(doc["edges"][0]["bigrams"][0][0] == "to-buy");
  CHECK(doc["edges"][0]["bigrams"][0][1] == 1);

  auto empty = nlohmann::json::parse(graph_to_json(TransitionGraph{}));
  CHECK(empty["nodes"].empty());
  CHECK(empty["edges"].empty());
  CHECK(graph_from_json(graph_to_json(TransitionGraph{})) == TransitionGraph{});
  CHECK_THROWS_AS(graph_from_json("{\"nodes\": 3}"), io::DataError);
  CHECK_THROWS_AS(graph_from_json("not json"), io::DataError);

  const std::string dot = graph_to_dot(g);
  CHECK(dot.rfind("digraph states {", 0) == 0);
  CHECK(dot.find("s0 -> s1 [label=\"1\"") != std::string::npos);
  CHECK(dot == graph_to_dot(g));
  CHECK(graph_to_dot(TransitionGraph{}) == "digraph states {\n  node [shape=circle];\n}\n");

  const auto dir = std::filesystem::temp_directory_path() / "statenet_test_analysis";
  std::filesystem::create_directories(dir);
  export_graph(g, GraphFormat::Json, (dir / "a.json").string());
  export_graph(g, GraphFormat::Json, (dir / "b.json").string());
  CHECK(io::read_file((dir / "a.json").string()) == io::read_file((dir / "b.json").string()));
  CHECK_THROWS_AS(export_graph(g, GraphFormat::Dot, (dir / "missing" / "x.dot").string()), io::DataError);
}

TEST_CASE("assignment files round-trip") {
  auto corpus = io::Corpus::from_surfaces({{"a", "b"}, {"c"}});
  auto a = StateAssignment::from_paths({{2, 0}, {1}}, 3);
  const auto path = (std::filesystem::temp_directory_path() / "statenet_assign.tsv").string();
  save_assignment(a, corpus, path);
  auto back = load_assignment(path, corpus);
  CHECK(back.num_states == 3);
  CHECK(back.paths == a.paths);
  CHECK(format_assignment(back, corpus) == io::read_file(path));
  io::write_file(path, "#states\t2\n0\t0\ta\t0\n0\t1\tb\t5\n1\t0\tc\t1\n");
  CHECK_THROWS_AS(load_assignment(path, corpus), io::DataError);
}

TEST_CASE("many-to-one purity") {
  CHECK(many_to_one_purity({{0, 0, 1, 1}}, {{3, 3, 4, 4}}) == 1.0);
  CHECK(many_to_one_purity({{0, 0, 0, 0}}, {{3, 3, 4, 4}}) == 0.5);
  CHECK(many_to_one_purity({{0, 1}, {2, 2}}, {{0, 0}, {1, 0}}) == 0.75);
  CHECK_THROWS(many_to_one_purity({{0, 1}}, {{0}}));
}
