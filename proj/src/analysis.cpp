#include "statenet/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace statenet::analysis {

StateAssignment StateAssignment::from_paths(std::vector<std::vector<std::size_t>> paths, std::size_t num_states) {
  StateAssignment a;
  a.num_states = num_states;
  a.occurrences.resize(num_states);
  a.frequency.assign(num_states, 0);
  for (std::size_t s = 0; s < paths.size(); ++s)
    for (std::size_t t = 0; t < paths[s].size(); ++t) {
      const std::size_t z = paths[s][t];
      if (z >= num_states)
        throw std::out_of_range("state id " + std::to_string(z) + " >= N=" + std::to_string(num_states));
      a.occurrences[z].push_back({s, t});
      ++a.frequency[z];
    }
  a.paths = std::move(paths);
  return a;
}

std::size_t StateAssignment::token_count() const {
  std::size_t n = 0;
  for (const auto& p : paths) n += p.size();
  return n;
}

StateAssignment decode_corpus(const crf::StateBank& bank, const io::EmbeddingStore& store, const io::Corpus& corpus,
                              std::size_t threads) {
  bank.validate();
  if (store.dim != bank.dim())
    throw ShapeError("decode_corpus: embedding dim " + std::to_string(store.dim) + " vs state dim " +
                     std::to_string(bank.dim()));
  io::check_shapes(store, corpus);
  std::vector<std::vector<std::size_t>> paths(store.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) paths[i] = crf::viterbi(crf::build_lattice(store.sequences[i], bank)).path;
  };
  threads = std::max<std::size_t>(1, std::min(threads, store.size()));
  if (threads == 1) {
    work(0, store.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (store.size() + threads - 1) / threads;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t b = w * chunk, e = std::min(store.size(), b + chunk);
      pool.emplace_back([&, w, b, e] {
        try {
          work(b, e);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& err : errors)
      if (err) std::rethrow_exception(err);
  }
  return StateAssignment::from_paths(std::move(paths), bank.num_states());
}

namespace {

void check_against(const StateAssignment& assign, const io::Corpus& corpus) {
  if (assign.paths.size() != corpus.size())
    throw ShapeError("assignment covers " + std::to_string(assign.paths.size()) + " sentences, corpus has " +
                     std::to_string(corpus.size()));
  for (std::size_t s = 0; s < corpus.size(); ++s)
    if (assign.paths[s].size() != corpus.sentence(s).size())
      throw ShapeError("assignment path length differs from corpus at sentence " + std::to_string(s));
}

}  // namespace

AlignmentReport align_states(const StateAssignment& assign, const io::TagLayer& layer, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("align_states: threshold must lie in (0, 1]");
  const std::size_t total = assign.token_count();
  if (total == 0) throw std::invalid_argument("align_states: empty assignment");
  if (layer.tags.size() != assign.paths.size()) throw ShapeError("align_states: tag layer shape differs");
  for (std::size_t s = 0; s < layer.tags.size(); ++s)
    if (layer.tags[s].size() != assign.paths[s].size()) throw ShapeError("align_states: tag layer shape differs");

  AlignmentReport r;
  r.layer = layer.name;
  r.threshold = threshold;
  std::size_t covered = 0;
  for (std::size_t z = 0; z < assign.num_states; ++z) {
    const std::size_t freq = assign.frequency[z];
    if (freq == 0) {
      r.not_aligned.push_back(z);
      continue;
    }
    std::map<std::string, std::size_t> counts;
    for (const Occurrence& o : assign.occurrences[z]) {
      const std::string& tag = layer.tags[o.sentence][o.position];
      if (tag != io::kUntagged) ++counts[tag];
    }
    const std::string* best = nullptr;
    std::size_t best_count = 0;
    for (const auto& [tag, c] : counts)
      if (c > best_count) {
        best = &tag;
        best_count = c;
      }
    const double share = static_cast<double>(best_count) / static_cast<double>(freq);
    // Integer comparison so that e.g. 90 of 100 meets 0.9 exactly.
    if (best && static_cast<double>(best_count) >= threshold * static_cast<double>(freq) * (1.0 - 1e-12)) {
      r.aligned.push_back({z, *best, share, freq});
      covered += freq;
    } else {
      r.not_aligned.push_back(z);
    }
  }
  r.coverage_percent = 100.0 * static_cast<double>(covered) / static_cast<double>(total);
  return r;
}

std::set<std::size_t> aligned_union(std::span<const AlignmentReport> reports) {
  std::set<std::size_t> out;
  for (const auto& r : reports)
    for (const auto& a : r.aligned) out.insert(a.state);
  return out;
}

UnionSummary summarize_union(const StateAssignment& assign, std::span<const AlignmentReport> reports) {
  const auto aligned = aligned_union(reports);
  UnionSummary u;
  u.aligned = aligned.size();
  u.not_aligned = assign.num_states - aligned.size();
  std::size_t occ = 0;
  for (std::size_t z = 0; z < assign.num_states; ++z)
    if (!aligned.count(z)) occ += assign.frequency[z];
  const std::size_t total = assign.token_count();
  u.not_aligned_coverage_percent = total ? 100.0 * static_cast<double>(occ) / static_cast<double>(total) : 0.0;
  return u;
}

StateComposition state_composition(const StateAssignment& assign, const io::Corpus& corpus,
                                   const io::FunctionWordList& fw, std::size_t head_k) {
  check_against(assign, corpus);
  StateComposition c;
  c.head_k = head_k;
  c.frequency = assign.frequency;
  c.function_fraction.assign(assign.num_states, 0.0);
  std::vector<std::size_t> func(assign.num_states, 0);
  for (std::size_t z = 0; z < assign.num_states; ++z) {
    for (const Occurrence& o : assign.occurrences[z])
      if (fw.contains(corpus.sentence(o.sentence).surfaces[o.position])) ++func[z];
    if (assign.frequency[z] > 0)
      c.function_fraction[z] = static_cast<double>(func[z]) / static_cast<double>(assign.frequency[z]);
    c.function_total += func[z];
  }
  c.ranking.resize(assign.num_states);
  std::iota(c.ranking.begin(), c.ranking.end(), 0);
  std::stable_sort(c.ranking.begin(), c.ranking.end(),
                   [&](std::size_t a, std::size_t b) { return c.frequency[a] > c.frequency[b]; });
  std::size_t head = 0;
  for (std::size_t i = 0; i < std::min(head_k, c.ranking.size()); ++i) head += func[c.ranking[i]];
  c.head_function_share = c.function_total ? static_cast<double>(head) / static_cast<double>(c.function_total) : 0.0;
  return c;
}

TransitionGraph transition_stats(const StateAssignment& assign, const io::Corpus& corpus,
                                 const io::FunctionWordList& fw, std::size_t top_bigrams) {
  check_against(assign, corpus);
  const StateComposition comp = state_composition(assign, corpus, fw, 0);
  TransitionGraph g;
  for (std::size_t z = 0; z < assign.num_states; ++z)
    if (assign.frequency[z] > 0) g.nodes.push_back({z, assign.frequency[z], comp.function_fraction[z]});

  std::map<std::pair<std::size_t, std::size_t>, std::pair<std::size_t, std::map<std::string, std::size_t>>> edges;
  for (std::size_t s = 0; s < assign.paths.size(); ++s) {
    const auto& p = assign.paths[s];
    const auto& w = corpus.sentence(s).surfaces;
    for (std::size_t t = 1; t < p.size(); ++t) {
      auto& e = edges[{p[t - 1], p[t]}];
      ++e.first;
      ++e.second[w[t - 1] + "-" + w[t]];
    }
  }
  for (auto& [key, val] : edges) {
    GraphEdge e{key.first, key.second, val.first, {}};
    std::vector<std::pair<std::string, std::size_t>> bigrams(val.second.begin(), val.second.end());
    std::stable_sort(bigrams.begin(), bigrams.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (bigrams.size() > top_bigrams) bigrams.resize(top_bigrams);
    e.bigrams = std::move(bigrams);
    g.edges.push_back(std::move(e));
  }
  return g;
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

HubScores hub_scores(const TransitionGraph& graph) {
  if (graph.nodes.empty() && graph.edges.empty()) throw std::invalid_argument("hub_scores: empty graph");
  std::map<std::size_t, std::set<std::size_t>> neighbours;
  std::map<std::size_t, std::size_t> strength;
  for (const auto& n : graph.nodes) {
    neighbours[n.id];
    strength[n.id];
  }
  for (const auto& e : graph.edges) {
    neighbours[e.src].insert(e.dst);
    neighbours[e.dst].insert(e.src);
    strength[e.src] += e.count;
    if (e.dst != e.src) strength[e.dst] += e.count;
  }
  HubScores h;
  for (const auto& [id, nb] : neighbours) {
    h.ids.push_back(id);
    h.degree.push_back(nb.size());
    h.strength.push_back(strength[id]);
  }
  std::vector<std::size_t> order(h.ids.size());
  std::iota(order.begin(), order.end(), 0);
  auto ranked = [&](const std::vector<std::size_t>& key) {
    std::vector<std::size_t> o = order;
    std::stable_sort(o.begin(), o.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
    std::vector<std::size_t> ids;
    for (std::size_t i : o) ids.push_back(h.ids[i]);
    return ids;
  };
  h.by_degree = ranked(h.degree);
  h.by_strength = ranked(h.strength);

  std::map<std::size_t, double> frac;
  for (const auto& n : graph.nodes) frac[n.id] = n.func_frac;
  std::vector<double> f, s;
  for (std::size_t i = 0; i < h.ids.size(); ++i) {
    auto it = frac.find(h.ids[i]);
    if (it == frac.end()) continue;
    f.push_back(it->second);
    s.push_back(static_cast<double>(h.strength[i]));
  }
  h.function_strength_correlation = pearson(average_ranks(f), average_ranks(s));
  return h;
}

std::vector<std::pair<std::string, std::size_t>> top_words(const StateAssignment& assign, const io::Corpus& corpus,
                                                           std::size_t state, std::size_t k) {
  if (state >= assign.num_states)
    throw std::out_of_range("top_words: unknown state " + std::to_string(state));
  std::map<std::string, std::size_t> counts;
  for (const Occurrence& o : assign.occurrences[state]) ++counts[corpus.sentence(o.sentence).surfaces[o.position]];
  std::vector<std::pair<std::string, std::size_t>> out(counts.begin(), counts.end());
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (out.size() > k) out.resize(k);
  return out;
}

std::tuple<std::size_t, std::size_t, std::size_t> longest_common_run(std::span<const std::size_t> a,
                                                                     std::span<const std::size_t> b) {
  std::size_t best = 0, ba = 0, bb = 0;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      if (cur[j] > best) {
        best = cur[j];
        ba = i - best;
        bb = j - best;
      }
    }
    std::swap(prev, cur);
  }
  return {ba, bb, best};
}

TraversalTrace traversal_trace(const StateAssignment& assign, const io::Corpus& corpus,
                               std::span<const std::size_t> sentences) {
  TraversalTrace tr;
  for (std::size_t s : sentences) {
    if (s >= corpus.size() || s >= assign.paths.size())
      throw std::out_of_range("traversal_trace: sentence index " + std::to_string(s) + " out of range");
    tr.sentences.push_back(s);
    std::vector<std::pair<std::string, std::size_t>> chain;
    for (std::size_t t = 0; t < assign.paths[s].size(); ++t)
      chain.emplace_back(corpus.sentence(s).surfaces[t], assign.paths[s][t]);
    tr.chains.push_back(std::move(chain));
  }
  for (std::size_t i = 0; i < tr.sentences.size(); ++i)
    for (std::size_t j = i + 1; j < tr.sentences.size(); ++j) {
      const auto& pa = assign.paths[tr.sentences[i]];
      const auto& pb = assign.paths[tr.sentences[j]];
      auto [oa, ob, len] = longest_common_run(pa, pb);
      tr.shared.push_back({tr.sentences[i], tr.sentences[j], oa, ob, {pa.begin() + oa, pa.begin() + oa + len}});
    }
  return tr;
}

TraversalTrace traversal_trace(const crf::StateBank& bank, const io::EmbeddingStore& store, const io::Corpus& corpus,
                               std::span<const std::size_t> sentences) {
  io::check_shapes(store, corpus);
  std::vector<std::vector<std::size_t>> paths(corpus.size());
  for (std::size_t s : sentences) {
    if (s >= corpus.size())
      throw std::out_of_range("traversal_trace: sentence index " + std::to_string(s) + " out of range");
    paths[s] = crf::viterbi(crf::build_lattice(store.sequences[s], bank)).path;
  }
  return traversal_trace(StateAssignment::from_paths(std::move(paths), bank.num_states()), corpus, sentences);
}

double many_to_one_purity(const std::vector<std::vector<std::size_t>>& predicted,
                          const std::vector<std::vector<std::size_t>>& gold) {
  if (predicted.size() != gold.size()) throw ShapeError("many_to_one_purity: sentence counts differ");
  std::map<std::size_t, std::map<std::size_t, std::size_t>> table;
  std::size_t total = 0;
  for (std::size_t s = 0; s < predicted.size(); ++s) {
    if (predicted[s].size() != gold[s].size()) throw ShapeError("many_to_one_purity: sentence lengths differ");
    for (std::size_t t = 0; t < predicted[s].size(); ++t) {
      ++table[predicted[s][t]][gold[s][t]];
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("many_to_one_purity: no tokens");
  std::size_t correct = 0;
  for (const auto& [state, row] : table) {
    std::size_t m = 0;
    for (const auto& [label, c] : row) m = std::max(m, c);
    correct += m;
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

}  // namespace statenet::analysis

namespace statenet::analysis {

std::string format_assignment(const StateAssignment& assign, const io::Corpus& corpus) {
  check_against(assign, corpus);
  std::string out = "#states\t" + std::to_string(assign.num_states) + "\n";
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (std::size_t t = 0; t < corpus.sentence(s).size(); ++t)
      out += std::to_string(s) + '\t' + std::to_string(t) + '\t' + corpus.sentence(s).surfaces[t] + '\t' +
             std::to_string(assign.paths[s][t]) + '\n';
  return out;
}

void save_assignment(const StateAssignment& assign, const io::Corpus& corpus, const std::string& path) {
  io::write_file(path, format_assignment(assign, corpus));
}

StateAssignment load_assignment(const std::string& path, const io::Corpus& corpus) {
  const std::string text = io::read_file(path);
  const std::size_t eol = text.find('\n');
  const std::string header = text.substr(0, eol);
  constexpr std::string_view kPrefix = "#states\t";
  std::size_t n = 0;
  try {
    if (header.rfind(kPrefix, 0) != 0) throw std::invalid_argument("header");
    std::size_t used = 0;
    n = std::stoul(header.substr(kPrefix.size()), &used);
    if (used != header.size() - kPrefix.size()) throw std::invalid_argument("header");
  } catch (const std::exception&) {
    throw io::DataError(io::DataError::Kind::Malformed, path + ": expected '#states<TAB>N' header");
  }
  const io::TagLayer layer =
      io::parse_tags(eol == std::string::npos ? std::string() : text.substr(eol + 1), path, corpus, "assignment");
  std::vector<std::vector<std::size_t>> paths(layer.tags.size());
  for (std::size_t s = 0; s < layer.tags.size(); ++s)
    for (const std::string& tag : layer.tags[s]) {
      std::size_t used = 0, z = 0;
      try {
        z = std::stoul(tag, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tag.size() || used == 0 || z >= n)
        throw io::DataError(io::DataError::Kind::Malformed,
                            path + ": sentence " + std::to_string(s) + ": bad state id '" + tag + "'");
      paths[s].push_back(z);
    }
  return StateAssignment::from_paths(std::move(paths), n);
}

}  // namespace statenet::analysis
