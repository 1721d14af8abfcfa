#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "statenet/corpus_io.hpp"
#include "statenet/crf.hpp"

// Analyses of a trained state bank: decoding, tag alignment, function/content
// composition, transition topology, top words and traversal traces.
namespace statenet::analysis {

struct Occurrence {
  std::size_t sentence = 0;
  std::size_t position = 0;
};

struct StateAssignment {
  std::size_t num_states = 0;
  std::vector<std::vector<std::size_t>> paths;
  std::vector<std::vector<Occurrence>> occurrences;  // per state, in corpus order
  std::vector<std::size_t> frequency;

  static StateAssignment from_paths(std::vector<std::vector<std::size_t>> paths, std::size_t num_states);
  std::size_t token_count() const;
};

// Assignment TSV: a "#states<TAB>N" line, then one
// sentence<TAB>token<TAB>surface<TAB>state row per token in corpus order.
std::string format_assignment(const StateAssignment& assign, const io::Corpus& corpus);
void save_assignment(const StateAssignment& assign, const io::Corpus& corpus, const std::string& path);
StateAssignment load_assignment(const std::string& path, const io::Corpus& corpus);

// Viterbi-decodes every sentence. `threads` > 1 splits sentences across
// workers; the result does not depend on the thread count.
StateAssignment decode_corpus(const crf::StateBank& bank, const io::EmbeddingStore& store, const io::Corpus& corpus,
                              std::size_t threads = 1);

struct AlignedState {
  std::size_t state = 0;
  std::string tag;
  double share = 0.0;
  std::size_t frequency = 0;
};

struct AlignmentReport {
  std::string layer;
  double threshold = 0.9;
  std::vector<AlignedState> aligned;     // ascending state id
  std::vector<std::size_t> not_aligned;  // every other state, including unused ones
  double coverage_percent = 0.0;         // aligned occurrences / all corpus tokens * 100

  std::size_t num_aligned() const { return aligned.size(); }
};

// A state aligns with its dominant tag when that tag's share of the state's
// occurrences reaches `threshold`. Untagged tokens count in the denominator
// but are never dominant; ties between tags go to the smaller tag string.
AlignmentReport align_states(const StateAssignment& assign, const io::TagLayer& layer, double threshold = 0.9);

// States aligned in at least one report.
std::set<std::size_t> aligned_union(std::span<const AlignmentReport> reports);

struct UnionSummary {
  std::size_t aligned = 0;
  std::size_t not_aligned = 0;
  double not_aligned_coverage_percent = 0.0;
};
UnionSummary summarize_union(const StateAssignment& assign, std::span<const AlignmentReport> reports);

struct StateComposition {
  std::vector<std::size_t> frequency;
  std::vector<double> function_fraction;  // 0 for unused states
  std::vector<std::size_t> ranking;       // state ids by descending frequency, ties by id
  std::size_t head_k = 50;
  std::size_t function_total = 0;
  double head_function_share = 0.0;  // share of all function-word occurrences in the top head_k states
};

StateComposition state_composition(const StateAssignment& assign, const io::Corpus& corpus,
                                   const io::FunctionWordList& fw = io::FunctionWordList::standard(),
                                   std::size_t head_k = 50);

struct GraphNode {
  std::size_t id = 0;
  std::size_t freq = 0;
  double func_frac = 0.0;
  bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
  std::size_t src = 0;
  std::size_t dst = 0;
  std::size_t count = 0;
  std::vector<std::pair<std::string, std::size_t>> bigrams;  // "w1-w2", descending count
  bool operator==(const GraphEdge&) const = default;
};

struct TransitionGraph {
  std::vector<GraphNode> nodes;  // states with at least one occurrence, ascending id
  std::vector<GraphEdge> edges;  // ascending (src, dst)
  bool operator==(const TransitionGraph&) const = default;
};

// Counts adjacent state pairs within sentences and keeps each edge's most
// frequent word bigrams.
TransitionGraph transition_stats(const StateAssignment& assign, const io::Corpus& corpus,
                                 const io::FunctionWordList& fw = io::FunctionWordList::standard(),
                                 std::size_t top_bigrams = 5);

struct HubScores {
  std::vector<std::size_t> ids;  // node ids, aligned with degree/strength
  std::vector<std::size_t> degree;
  std::vector<std::size_t> strength;
  std::vector<std::size_t> by_degree;    // node ids, descending degree then ascending id
  std::vector<std::size_t> by_strength;  // node ids, descending strength then ascending id
  // Spearman correlation between function fraction and strength; empty when undefined.
  std::optional<double> function_strength_correlation;
};

// Degree counts distinct neighbours over in- and out-edges; a self-loop adds 1
// to degree and its count (once) to strength.
HubScores hub_scores(const TransitionGraph& graph);

std::vector<std::pair<std::string, std::size_t>> top_words(const StateAssignment& assign, const io::Corpus& corpus,
                                                           std::size_t state, std::size_t k);

struct SharedSubpath {
  std::size_t first = 0;  // sentence indices
  std::size_t second = 0;
  std::size_t first_offset = 0;
  std::size_t second_offset = 0;
  std::vector<std::size_t> states;
};

struct TraversalTrace {
  std::vector<std::size_t> sentences;
  std::vector<std::vector<std::pair<std::string, std::size_t>>> chains;  // (surface, state)
  std::vector<SharedSubpath> shared;                                     // every pair i < j
};

TraversalTrace traversal_trace(const crf::StateBank& bank, const io::EmbeddingStore& store, const io::Corpus& corpus,
                               std::span<const std::size_t> sentences);
TraversalTrace traversal_trace(const StateAssignment& assign, const io::Corpus& corpus,
                               std::span<const std::size_t> sentences);

// Longest common contiguous run; returns (offset in a, offset in b, length),
// earliest in a then b on ties.
std::tuple<std::size_t, std::size_t, std::size_t> longest_common_run(std::span<const std::size_t> a,
                                                                     std::span<const std::size_t> b);

enum class GraphFormat { Json, Dot };

std::string graph_to_json(const TransitionGraph& graph);
std::string graph_to_dot(const TransitionGraph& graph);
TransitionGraph graph_from_json(const std::string& text);
void export_graph(const TransitionGraph& graph, GraphFormat format, const std::string& path);

// Maps each predicted state to its most frequent gold label and returns the
// resulting accuracy.
double many_to_one_purity(const std::vector<std::vector<std::size_t>>& predicted,
                          const std::vector<std::vector<std::size_t>>& gold);

}  // namespace statenet::analysis
