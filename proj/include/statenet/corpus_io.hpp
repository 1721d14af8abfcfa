#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "statenet/tensor.hpp"

namespace statenet::io {

// Any problem with on-disk inputs: unreadable files, malformed records, or
// shape disagreement between corpus, embeddings and tags.
class DataError : public std::runtime_error {
 public:
  enum class Kind { Io, Empty, Malformed, BadMagic, LengthMismatch, Truncated, SurfaceMismatch };
  DataError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct TokenSequence {
  std::vector<std::size_t> tokens;
  std::vector<std::string> surfaces;
  std::size_t size() const { return tokens.size(); }
};

class Corpus {
 public:
  Corpus() = default;
  // Vocabulary ids are assigned in first-occurrence order.
  static Corpus from_surfaces(const std::vector<std::vector<std::string>>& sentences);

  const std::vector<TokenSequence>& sentences() const { return sentences_; }
  const TokenSequence& sentence(std::size_t i) const { return sentences_.at(i); }
  std::size_t size() const { return sentences_.size(); }
  std::size_t token_count() const;

  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  std::size_t vocab_size() const { return vocabulary_.size(); }
  // Id of `surface`, or vocab_size() when unknown.
  std::size_t lookup(std::string_view surface) const;

 private:
  std::vector<TokenSequence> sentences_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, std::size_t> index_;
};

// One sentence per line, surfaces joined by single spaces.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

struct EmbeddingStore {
  std::size_t dim = 0;
  std::vector<Tensor> sequences;  // T_i x dim each
  std::size_t size() const { return sequences.size(); }
};

// Binary "LSE1" container: magic, u32 version (1), u32 D, u64 sentence count,
// then per sentence u32 length followed by length*D float32, little-endian.
EmbeddingStore read_embeddings(const std::string& path);
EmbeddingStore load_embeddings(const std::string& path, const Corpus& corpus);
void save_embeddings(const EmbeddingStore& store, const std::string& path);
void check_shapes(const EmbeddingStore& store, const Corpus& corpus);

inline constexpr std::string_view kUntagged = "—";

struct TagLayer {
  std::string name;
  std::vector<std::vector<std::string>> tags;  // mirrors corpus shape
};

// TSV rows: sentence-index, token-index, surface, tag; one row per token in
// corpus order.
TagLayer load_tags(const std::string& path, const Corpus& corpus, const std::string& name);
TagLayer parse_tags(const std::string& text, const std::string& origin, const Corpus& corpus, const std::string& name);
void save_tags(const TagLayer& layer, const Corpus& corpus, const std::string& path);
void check_shapes(const TagLayer& layer, const Corpus& corpus);

class FunctionWordList {
 public:
  FunctionWordList() = default;
  explicit FunctionWordList(const std::set<std::string>& words);

  // The standard English stopword list (127 entries).
  static const FunctionWordList& standard();
  static FunctionWordList load(const std::string& path);

  bool contains(std::string_view surface) const;
  const std::set<std::string>& words() const { return words_; }

 private:
  std::set<std::string> words_;
};

// Case-insensitive; subword continuations ("#ing", "##ing") never count.
bool is_function_word(std::string_view surface, const FunctionWordList& list);

bool is_continuation(std::string_view surface);
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace statenet::io
