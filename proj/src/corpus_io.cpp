#include "statenet/corpus_io.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "statenet/binary_io.hpp"

namespace statenet::io {

namespace {

constexpr std::string_view kEmbeddingMagic = "LSE1";
constexpr std::uint32_t kEmbeddingVersion = 1;

constexpr const char* kStandardFunctionWords =
    "i me my myself we our ours ourselves you your yours yourself yourselves he him his "
    "himself she her hers herself it its itself they them their theirs themselves what which "
    "who whom this that these those am is are was were be been being have has had having do "
    "does did doing a an the and but if or because as until while of at by for with about "
    "against between into through during before after above below to from up down in out on "
    "off over under again further then once here there when where why how all any both each "
    "few more most other some such no nor not only own same so than too very s t can will just "
    "don should now";

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

// Splits file contents into lines; a single trailing newline is optional.
std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines = split(text, '\n');
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool parse_index(std::string_view s, std::size_t* out) {
  if (s.empty() || s.size() > 18) return false;
  std::size_t v = 0;
  for (char c : s) {
    if (c < '0' || c > '9') return false;
    v = v * 10 + static_cast<std::size_t>(c - '0');
  }
  *out = v;
  return true;
}

}  // namespace

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::Io, "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(DataError::Kind::Io, "cannot write " + path);
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw DataError(DataError::Kind::Io, "write failed for " + path);
}

// ---- corpus -----------------------------------------------------------------

Corpus Corpus::from_surfaces(const std::vector<std::vector<std::string>>& sentences) {
  Corpus c;
  for (const auto& words : sentences) {
    if (words.empty()) throw DataError(DataError::Kind::Malformed, "sentence with no tokens");
    TokenSequence seq;
    for (const std::string& w : words) {
      auto [it, inserted] = c.index_.try_emplace(w, c.vocabulary_.size());
      if (inserted) c.vocabulary_.push_back(w);
      seq.tokens.push_back(it->second);
      seq.surfaces.push_back(w);
    }
    c.sentences_.push_back(std::move(seq));
  }
  return c;
}

std::size_t Corpus::token_count() const {
  std::size_t n = 0;
  for (const auto& s : sentences_) n += s.size();
  return n;
}

std::size_t Corpus::lookup(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  return it == index_.end() ? vocabulary_.size() : it->second;
}

Corpus load_corpus(const std::string& path) {
  const std::string text = read_file(path);
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(DataError::Kind::Empty, path + ": empty corpus file");
  std::vector<std::vector<std::string>> sentences;
  sentences.reserve(lines.size());
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const std::string_view line = lines[k];
    const auto where = [&] { return path + ":" + std::to_string(k + 1) + ": "; };
    if (line.empty()) throw DataError(DataError::Kind::Malformed, where() + "empty sentence");
    if (line.find_first_of("\t\r") != std::string_view::npos)
      throw DataError(DataError::Kind::Malformed, where() + "tab or carriage return in sentence");
    std::vector<std::string> words;
    for (std::string_view w : split(line, ' ')) {
      if (w.empty()) throw DataError(DataError::Kind::Malformed, where() + "empty token (stray space)");
      words.emplace_back(w);
    }
    sentences.push_back(std::move(words));
  }
  return Corpus::from_surfaces(sentences);
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::string out;
  for (const auto& s : corpus.sentences()) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      if (t) out.push_back(' ');
      out += s.surfaces[t];
    }
    out.push_back('\n');
  }
  write_file(path, out);
}

// ---- embeddings ---------------------------------------------------------------

EmbeddingStore read_embeddings(const std::string& path) {
  const std::string data = read_file(path);
  binary::Reader r(data);
  std::string_view magic;
  if (!r.bytes(4, &magic) || magic != kEmbeddingMagic)
    throw DataError(DataError::Kind::BadMagic, path + ": not an LSE1 embedding file");
  std::uint32_t version = 0, dim = 0;
  std::uint64_t count = 0;
  if (!r.u32(&version) || !r.u32(&dim) || !r.u64(&count))
    throw DataError(DataError::Kind::Truncated, path + ": truncated header");
  if (version != kEmbeddingVersion)
    throw DataError(DataError::Kind::Malformed, path + ": unsupported version " + std::to_string(version));
  if (dim == 0) throw DataError(DataError::Kind::Malformed, path + ": zero embedding dimension");

  EmbeddingStore store;
  store.dim = dim;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint32_t len = 0;
    if (!r.u32(&len)) throw DataError(DataError::Kind::Truncated, path + ": truncated at sentence " + std::to_string(i));
    if (len == 0) throw DataError(DataError::Kind::Malformed, path + ": empty sentence " + std::to_string(i));
    if (r.remaining() / 4 / dim < len)
      throw DataError(DataError::Kind::Truncated, path + ": truncated payload in sentence " + std::to_string(i));
    Tensor m(Shape{len, dim});
    for (std::size_t k = 0; k < m.size(); ++k) {
      float v = 0.0f;
      r.f32(&v);
      m[k] = static_cast<double>(v);
    }
    store.sequences.push_back(std::move(m));
  }
  if (r.remaining() != 0) throw DataError(DataError::Kind::Malformed, path + ": trailing bytes after last sentence");
  return store;
}

void check_shapes(const EmbeddingStore& store, const Corpus& corpus) {
  if (store.size() != corpus.size())
    throw DataError(DataError::Kind::LengthMismatch, "embedding store has " + std::to_string(store.size()) +
                                                         " sentences, corpus has " + std::to_string(corpus.size()));
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Tensor& m = store.sequences[i];
    if (m.rows() != corpus.sentence(i).size() || m.cols() != store.dim)
      throw DataError(DataError::Kind::LengthMismatch,
                      "sentence " + std::to_string(i) + ": embeddings " + m.shape().str() + " vs " +
                          std::to_string(corpus.sentence(i).size()) + " tokens");
  }
}

EmbeddingStore load_embeddings(const std::string& path, const Corpus& corpus) {
  EmbeddingStore store = read_embeddings(path);
  check_shapes(store, corpus);
  for (const Tensor& m : store.sequences) require_finite(m, "load_embeddings");
  return store;
}

void save_embeddings(const EmbeddingStore& store, const std::string& path) {
  binary::Writer w;
  w.bytes(kEmbeddingMagic);
  w.u32(kEmbeddingVersion);
  w.u32(static_cast<std::uint32_t>(store.dim));
  w.u64(store.size());
  for (const Tensor& m : store.sequences) {
    if (m.cols() != store.dim) throw DataError(DataError::Kind::LengthMismatch, "sequence width differs from store dim");
    w.u32(static_cast<std::uint32_t>(m.rows()));
    for (double v : m.data()) w.f32(static_cast<float>(v));
  }
  write_file(path, w.buffer());
}

// ---- tags ----------------------------------------------------------------------

TagLayer load_tags(const std::string& path, const Corpus& corpus, const std::string& name) {
  return parse_tags(read_file(path), path, corpus, name);
}

TagLayer parse_tags(const std::string& text, const std::string& path, const Corpus& corpus, const std::string& name) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw DataError(DataError::Kind::Empty, path + ": empty tag file");

  TagLayer layer;
  layer.name = name;
  layer.tags.resize(corpus.size());
  std::size_t sent = 0, tok = 0;
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto where = [&] { return path + ": row " + std::to_string(k + 1) + ": "; };
    const auto fields = split(lines[k], '\t');
    if (fields.size() != 4 || fields[3].empty())
      throw DataError(DataError::Kind::Malformed, where() + "expected 4 tab-separated fields");
    while (sent < corpus.size() && tok == corpus.sentence(sent).size()) {
      ++sent;
      tok = 0;
    }
    if (sent == corpus.size()) throw DataError(DataError::Kind::LengthMismatch, where() + "more rows than corpus tokens");
    std::size_t si = 0, ti = 0;
    if (!parse_index(fields[0], &si) || !parse_index(fields[1], &ti))
      throw DataError(DataError::Kind::Malformed, where() + "bad sentence/token index");
    if (si != sent || ti != tok)
      throw DataError(DataError::Kind::Malformed, where() + "expected sentence " + std::to_string(sent) + " token " +
                                                      std::to_string(tok));
    if (fields[2] != corpus.sentence(sent).surfaces[tok])
      throw DataError(DataError::Kind::SurfaceMismatch, where() + "surface '" + std::string(fields[2]) +
                                                            "' does not match corpus token '" +
                                                            corpus.sentence(sent).surfaces[tok] + "'");
    layer.tags[sent].emplace_back(fields[3]);
    ++tok;
  }
  check_shapes(layer, corpus);
  return layer;
}

void save_tags(const TagLayer& layer, const Corpus& corpus, const std::string& path) {
  check_shapes(layer, corpus);
  std::string out;
  for (std::size_t s = 0; s < corpus.size(); ++s)
    for (std::size_t t = 0; t < corpus.sentence(s).size(); ++t) {
      out += std::to_string(s) + '\t' + std::to_string(t) + '\t' + corpus.sentence(s).surfaces[t] + '\t' +
             layer.tags[s][t] + '\n';
    }
  write_file(path, out);
}

void check_shapes(const TagLayer& layer, const Corpus& corpus) {
  if (layer.tags.size() != corpus.size())
    throw DataError(DataError::Kind::LengthMismatch, "tag layer " + layer.name + " covers " +
                                                         std::to_string(layer.tags.size()) + " sentences, corpus has " +
                                                         std::to_string(corpus.size()));
  for (std::size_t s = 0; s < corpus.size(); ++s)
    if (layer.tags[s].size() != corpus.sentence(s).size())
      throw DataError(DataError::Kind::LengthMismatch,
                      "tag layer " + layer.name + " sentence " + std::to_string(s) + ": " +
                          std::to_string(layer.tags[s].size()) + " tags for " +
                          std::to_string(corpus.sentence(s).size()) + " tokens");
}

// ---- function words ------------------------------------------------------------

FunctionWordList::FunctionWordList(const std::set<std::string>& words) {
  for (const auto& w : words) words_.insert(lower(w));
  if (words_.empty()) throw DataError(DataError::Kind::Empty, "function word list is empty");
}

const FunctionWordList& FunctionWordList::standard() {
  static const FunctionWordList list = [] {
    std::set<std::string> words;
    for (std::string_view w : split(kStandardFunctionWords, ' ')) words.emplace(w);
    return FunctionWordList(words);
  }();
  return list;
}

FunctionWordList FunctionWordList::load(const std::string& path) {
  const std::string text = read_file(path);
  std::set<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.insert(w);
  if (words.empty()) throw DataError(DataError::Kind::Empty, path + ": empty function word list");
  return FunctionWordList(words);
}

bool is_continuation(std::string_view surface) { return surface.size() > 1 && surface.front() == '#'; }

bool FunctionWordList::contains(std::string_view surface) const {
  if (is_continuation(surface)) return false;
  return words_.count(lower(surface)) > 0;
}

bool is_function_word(std::string_view surface, const FunctionWordList& list) { return list.contains(surface); }

}  // namespace statenet::io
