#include "statenet/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "statenet/analysis.hpp"
#include "statenet/checkpoint.hpp"
#include "statenet/oracle.hpp"
#include "statenet/synthetic.hpp"
#include "statenet/trainer.hpp"

#ifndef STATENET_VERSION
#define STATENET_VERSION "dev"
#endif

namespace statenet::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 || EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256: digest failed");
  }
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

namespace {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string num(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string pct(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

struct Options {
  std::string embeddings, corpus, checkpoint, assignment, function_words;
  std::vector<std::string> tags;
  std::string out = ".";
  bool out_given = false;
  std::size_t states = 2000, hidden = 200, epochs = 10, batch_size = 16, checkpoint_every = 1, threads = 1;
  double beta = 0.005, tau = 1.0, lr = 1e-3, threshold = 0.9;
  std::uint64_t seed = 0;
  std::string entropy_sign = "plus";
  std::size_t head_k = 50, top_k = 10, top_bigrams = 5, trials = 200;
  std::string format = "both";
  std::vector<std::size_t> sentences;
  std::vector<double> stage1, stage2;
  synth::HmmConfig hmm;
};

// Collects output files and their hashes, then writes the run manifest.
class Run {
 public:
  Run(std::string command, const Options& o, std::ostream& out) : command_(std::move(command)), o_(o), out_(out) {
    manifest_["command"] = command_;
    manifest_["version"] = STATENET_VERSION;
    manifest_["seed"] = o.seed;
    manifest_["inputs"] = ordered_json::object();
    manifest_["parameters"] = ordered_json::object();
  }

  void input(const std::string& role, const std::string& path) {
    if (path.empty()) return;
    ordered_json entry;
    entry["file"] = fs::path(path).filename().string();
    entry["sha256"] = sha256_hex(io::read_file(path));
    manifest_["inputs"][role] = entry;
  }
  template <typename T>
  void param(const std::string& key, const T& value) {
    manifest_["parameters"][key] = value;
  }

  void emit(const std::string& name, const std::string& bytes) {
    fs::create_directories(o_.out);
    io::write_file((fs::path(o_.out) / name).string(), bytes);
    outputs_[name] = sha256_hex(bytes);
    out_ << "wrote " << (fs::path(o_.out) / name).string() << "\n";
  }

  void finish() {
    ordered_json outs = ordered_json::object();
    for (const auto& [name, hash] : outputs_) outs[name] = hash;
    manifest_["outputs"] = outs;
    fs::create_directories(o_.out);
    io::write_file((fs::path(o_.out) / ("manifest-" + command_ + ".json")).string(), manifest_.dump(2) + "\n");
  }

 private:
  std::string command_;
  const Options& o_;
  std::ostream& out_;
  ordered_json manifest_;
  std::map<std::string, std::string> outputs_;
};

void require(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string("missing required option ") + flag);
}

std::vector<std::pair<std::string, std::string>> parse_tag_args(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& a : args) {
    const auto eq = a.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == a.size())
      throw UsageError("--tags expects name=path, got '" + a + "'");
    out.emplace_back(a.substr(0, eq), a.substr(eq + 1));
  }
  return out;
}

std::vector<io::TagLayer> load_layers(const Options& o, const io::Corpus& corpus, Run& run) {
  std::vector<io::TagLayer> layers;
  for (const auto& [name, path] : parse_tag_args(o.tags)) {
    layers.push_back(io::load_tags(path, corpus, name));
    run.input("tags:" + name, path);
  }
  return layers;
}

io::FunctionWordList function_words(const Options& o, Run& run) {
  if (o.function_words.empty()) return io::FunctionWordList::standard();
  run.input("function_words", o.function_words);
  return io::FunctionWordList::load(o.function_words);
}

train::TrainConfig train_config(const Options& o) {
  train::TrainConfig c;
  c.num_states = o.states;
  c.hidden = o.hidden;
  c.beta = o.beta;
  c.epochs = o.epochs;
  c.batch_size = o.batch_size;
  c.learning_rate = o.lr;
  c.seed = o.seed;
  c.tau = o.tau;
  c.checkpoint_every = o.checkpoint_every;
  c.threads = o.threads;
  c.embeddings_path = o.embeddings;
  c.corpus_path = o.corpus;
  c.tag_paths = parse_tag_args(o.tags);
  if (o.entropy_sign == "plus")
    c.entropy_sign = train::EntropySign::Plus;
  else if (o.entropy_sign == "minus")
    c.entropy_sign = train::EntropySign::Minus;
  else
    throw UsageError("--entropy-sign must be plus or minus");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return c;
}

void train_params(Run& run, const train::TrainConfig& c, const Options& o) {
  run.param("states", c.num_states);
  run.param("hidden", c.hidden);
  run.param("beta", c.beta);
  run.param("tau", c.tau);
  run.param("epochs", c.epochs);
  run.param("batch_size", c.batch_size);
  run.param("lr", c.learning_rate);
  run.param("checkpoint_every", c.checkpoint_every);
  run.param("entropy_sign", o.entropy_sign);
  run.param("threads", c.threads);
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint-epoch%03zu.lsc", epoch);
  return buf;
}

analysis::StateAssignment assignment_input(const Options& o, const io::Corpus& corpus, Run& run) {
  require(o.assignment, "--assignment");
  run.input("assignment", o.assignment);
  return analysis::load_assignment(o.assignment, corpus);
}

io::Corpus corpus_input(const Options& o, Run& run) {
  require(o.corpus, "--corpus");
  run.input("corpus", o.corpus);
  return io::load_corpus(o.corpus);
}

int cmd_validate(const Options& o, std::ostream& out) {
  require(o.embeddings, "--embeddings");
  Run run("validate", o, out);
  io::Corpus corpus = corpus_input(o, run);
  io::EmbeddingStore store = io::load_embeddings(o.embeddings, corpus);
  run.input("embeddings", o.embeddings);
  auto layers = load_layers(o, corpus, run);
  out << "ok: " << corpus.size() << " sentences, " << corpus.token_count() << " tokens, vocabulary "
      << corpus.vocab_size() << ", dim " << store.dim << ", " << layers.size() << " tag layer(s)\n";
  if (o.out_given) run.finish();
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  require(o.embeddings, "--embeddings");
  require(o.corpus, "--corpus");
  const train::TrainConfig cfg = train_config(o);
  Run run("train", o, out);
  train_params(run, cfg, o);
  io::Corpus corpus = corpus_input(o, run);
  io::EmbeddingStore store = io::load_embeddings(o.embeddings, corpus);
  run.input("embeddings", o.embeddings);
  auto layers = load_layers(o, corpus, run);

  train::TrainResult result;
  try {
    result = train::train(cfg, corpus, store);
  } catch (const train::DivergenceError& e) {
    run.emit("last-good.lsc", train::encode_checkpoint(e.last_good()));
    run.finish();
    err << "error: " << e.what() << "\n";
    return kNumeric;
  }
  std::string epochs = "epoch\tmean_elbo\n";
  for (std::size_t e = 0; e < result.epoch_mean_elbo.size(); ++e) {
    epochs += std::to_string(e + 1) + '\t' + num(result.epoch_mean_elbo[e]) + '\n';
    out << "epoch " << e + 1 << " mean ELBO/token " << num(result.epoch_mean_elbo[e]) << "\n";
  }
  std::string trace = "step\telbo\n";
  for (const auto& tp : result.checkpoints.back().elbo_trace) trace += std::to_string(tp.step) + '\t' + num(tp.value) + '\n';
  run.emit("epochs.tsv", epochs);
  run.emit("elbo_trace.tsv", trace);
  for (const auto& c : result.checkpoints) run.emit(checkpoint_name(c.epoch), train::encode_checkpoint(c));

  std::size_t chosen = result.checkpoints.size() - 1;
  if (!layers.empty()) {
    auto sel = train::select_model(result.checkpoints, store, corpus, layers, o.threshold, o.threads);
    chosen = sel.index;
    std::string table = "epoch\taligned_states\n";
    for (std::size_t k = 0; k < result.checkpoints.size(); ++k)
      table += std::to_string(result.checkpoints[k].epoch) + '\t' + std::to_string(sel.aligned_counts[k]) + '\n';
    run.emit("selection.tsv", table);
    out << "selected epoch " << result.checkpoints[chosen].epoch << " with " << sel.aligned_counts[chosen]
        << " aligned states\n";
  }
  run.emit("model.lsc", train::encode_checkpoint(result.checkpoints[chosen]));
  run.finish();
  return kOk;
}

int cmd_beta_search(const Options& o, std::ostream& out) {
  require(o.embeddings, "--embeddings");
  require(o.corpus, "--corpus");
  if (o.tags.empty()) throw UsageError("beta-search needs at least one --tags layer");
  const train::TrainConfig cfg = train_config(o);
  Run run("beta-search", o, out);
  train_params(run, cfg, o);
  io::Corpus corpus = corpus_input(o, run);
  io::EmbeddingStore store = io::load_embeddings(o.embeddings, corpus);
  run.input("embeddings", o.embeddings);
  auto layers = load_layers(o, corpus, run);
  auto stage1 = o.stage1.empty() ? train::default_stage1_grid() : o.stage1;
  run.param("stage1", stage1);
  run.param("stage2", o.stage2);
  auto res = train::beta_search(cfg, corpus, store, layers, stage1, o.stage2, o.threshold);
  std::string table = "stage\tbeta\taligned_states\tdiverged\n";
  for (const auto& c : res.candidates)
    table += std::to_string(c.stage) + '\t' + num(c.beta) + '\t' + std::to_string(c.aligned) + '\t' +
             (c.diverged ? "yes" : "no") + '\n';
  run.emit("beta_search.tsv", table);
  out << "best beta " << num(res.best) << "\n";
  run.finish();
  return kOk;
}

int cmd_decode(const Options& o, std::ostream& out) {
  require(o.checkpoint, "--checkpoint");
  require(o.embeddings, "--embeddings");
  Run run("decode", o, out);
  run.param("threads", o.threads);
  io::Corpus corpus = corpus_input(o, run);
  io::EmbeddingStore store = io::load_embeddings(o.embeddings, corpus);
  run.input("embeddings", o.embeddings);
  train::Checkpoint ckpt = train::load_checkpoint(o.checkpoint);
  run.input("checkpoint", o.checkpoint);
  auto assign = analysis::decode_corpus(ckpt.params.bank, store, corpus, o.threads);
  run.emit("assignment.tsv", analysis::format_assignment(assign, corpus));
  run.finish();
  return kOk;
}

int cmd_align(const Options& o, std::ostream& out) {
  if (o.tags.empty()) throw UsageError("align needs at least one --tags layer");
  Run run("align", o, out);
  run.param("threshold", o.threshold);
  io::Corpus corpus = corpus_input(o, run);
  auto assign = assignment_input(o, corpus, run);
  auto layers = load_layers(o, corpus, run);
  std::vector<analysis::AlignmentReport> reports;
  std::string rows = "layer\tstate\ttag\tshare\tfrequency\n";
  std::string summary = "layer\taligned\tnot_aligned\tcoverage_percent\n";
  for (const auto& layer : layers) {
    reports.push_back(analysis::align_states(assign, layer, o.threshold));
    const auto& r = reports.back();
    for (const auto& a : r.aligned)
      rows += r.layer + '\t' + std::to_string(a.state) + '\t' + a.tag + '\t' + num(a.share) + '\t' +
              std::to_string(a.frequency) + '\n';
    summary += r.layer + '\t' + std::to_string(r.num_aligned()) + '\t' + std::to_string(r.not_aligned.size()) + '\t' +
               pct(r.coverage_percent) + '\n';
    out << r.layer << ": " << r.num_aligned() << " aligned states, " << pct(r.coverage_percent) << "% coverage\n";
  }
  const auto u = analysis::summarize_union(assign, reports);
  summary += "UNION\t" + std::to_string(u.aligned) + '\t' + std::to_string(u.not_aligned) + '\t' +
             pct(100.0 - u.not_aligned_coverage_percent) + '\n';
  out << "union: " << u.aligned << " aligned, " << u.not_aligned << " not aligned ("
      << pct(u.not_aligned_coverage_percent) << "% of tokens)\n";
  run.emit("alignment.tsv", rows);
  run.emit("alignment_summary.tsv", summary);
  run.finish();
  return kOk;
}

int cmd_composition(const Options& o, std::ostream& out) {
  Run run("composition", o, out);
  run.param("head_k", o.head_k);
  io::Corpus corpus = corpus_input(o, run);
  auto assign = assignment_input(o, corpus, run);
  auto fw = function_words(o, run);
  auto c = analysis::state_composition(assign, corpus, fw, o.head_k);
  std::string rows = "rank\tstate\tfrequency\tfunction_fraction\n";
  for (std::size_t r = 0; r < c.ranking.size(); ++r) {
    const std::size_t z = c.ranking[r];
    if (c.frequency[z] == 0) break;
    rows += std::to_string(r + 1) + '\t' + std::to_string(z) + '\t' + std::to_string(c.frequency[z]) + '\t' +
            num(c.function_fraction[z]) + '\n';
  }
  run.emit("composition.tsv", rows);
  run.emit("composition_summary.tsv", "head_k\tfunction_occurrences\thead_function_share\n" +
                                          std::to_string(c.head_k) + '\t' + std::to_string(c.function_total) + '\t' +
                                          num(c.head_function_share) + '\n');
  out << "top " << c.head_k << " states hold " << pct(100.0 * c.head_function_share)
      << "% of function-word occurrences\n";
  run.finish();
  return kOk;
}

int cmd_graph(const Options& o, std::ostream& out) {
  if (o.format != "json" && o.format != "dot" && o.format != "both")
    throw UsageError("--format must be json, dot or both");
  Run run("graph", o, out);
  run.param("top_bigrams", o.top_bigrams);
  io::Corpus corpus = corpus_input(o, run);
  auto assign = assignment_input(o, corpus, run);
  auto fw = function_words(o, run);
  auto g = analysis::transition_stats(assign, corpus, fw, o.top_bigrams);
  if (o.format != "dot") run.emit("graph.json", analysis::graph_to_json(g));
  if (o.format != "json") run.emit("graph.dot", analysis::graph_to_dot(g));
  if (!g.nodes.empty()) {
    auto h = analysis::hub_scores(g);
    std::string rows = "state\tdegree\tstrength\n";
    for (std::size_t z : h.by_strength) {
      const std::size_t i = static_cast<std::size_t>(std::find(h.ids.begin(), h.ids.end(), z) - h.ids.begin());
      rows += std::to_string(z) + '\t' + std::to_string(h.degree[i]) + '\t' + std::to_string(h.strength[i]) + '\n';
    }
    run.emit("hubs.tsv", rows);
    if (h.function_strength_correlation)
      out << "spearman(function fraction, strength) = " << num(*h.function_strength_correlation) << "\n";
  }
  out << g.nodes.size() << " nodes, " << g.edges.size() << " edges\n";
  run.finish();
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  Run run("report", o, out);
  run.param("top_k", o.top_k);
  io::Corpus corpus = corpus_input(o, run);
  auto assign = assignment_input(o, corpus, run);
  auto fw = function_words(o, run);
  auto c = analysis::state_composition(assign, corpus, fw, 0);
  std::string rows = "state\tfrequency\tfunction_fraction\ttop_words\n";
  for (std::size_t z : c.ranking) {
    if (c.frequency[z] == 0) break;
    std::string words;
    for (const auto& [w, n] : analysis::top_words(assign, corpus, z, o.top_k))
      words += (words.empty() ? "" : " ") + w + ":" + std::to_string(n);
    rows += std::to_string(z) + '\t' + std::to_string(c.frequency[z]) + '\t' + num(c.function_fraction[z]) + '\t' +
            words + '\n';
  }
  run.emit("top_words.tsv", rows);
  run.finish();
  return kOk;
}

int cmd_trace(const Options& o, std::ostream& out) {
  if (o.sentences.empty()) throw UsageError("trace needs --sentences");
  Run run("trace", o, out);
  io::Corpus corpus = corpus_input(o, run);
  analysis::TraversalTrace tr;
  if (!o.assignment.empty()) {
    tr = analysis::traversal_trace(assignment_input(o, corpus, run), corpus, o.sentences);
  } else {
    require(o.checkpoint, "--checkpoint or --assignment");
    require(o.embeddings, "--embeddings");
    io::EmbeddingStore store = io::load_embeddings(o.embeddings, corpus);
    run.input("embeddings", o.embeddings);
    run.input("checkpoint", o.checkpoint);
    tr = analysis::traversal_trace(train::load_checkpoint(o.checkpoint).params.bank, store, corpus, o.sentences);
  }
  std::ostringstream text;
  for (std::size_t i = 0; i < tr.sentences.size(); ++i) {
    text << "sentence " << tr.sentences[i] << ":";
    for (const auto& [w, z] : tr.chains[i]) text << " " << w << "/" << z;
    text << "\n";
  }
  for (const auto& s : tr.shared) {
    text << "shared " << s.first << "@" << s.first_offset << " " << s.second << "@" << s.second_offset << " length "
         << s.states.size() << ":";
    for (std::size_t z : s.states) text << " " << z;
    text << "\n";
  }
  out << text.str();
  run.emit("trace.txt", text.str());
  run.finish();
  return kOk;
}

int cmd_oracle(const Options& o, std::ostream& out) {
  auto rep = crf::run_enumeration_suite(o.trials, o.seed);
  std::ostringstream text;
  text << "trials " << rep.trials << ", failures " << rep.failures << "\n";
  text << "max |log Z error| " << num(rep.max_log_z_error) << "\n";
  text << "max unary error " << num(rep.max_unary_error) << "\n";
  text << "max pairwise error " << num(rep.max_pairwise_error) << "\n";
  text << "max entropy error " << num(rep.max_entropy_error) << "\n";
  text << "viterbi mismatches " << rep.viterbi_mismatches << "\n";
  for (const auto& m : rep.messages) text << "FAIL " << m << "\n";
  out << text.str();
  if (o.out_given) {
    Run run("oracle", o, out);
    run.param("trials", o.trials);
    run.emit("oracle.txt", text.str());
    run.finish();
  }
  return rep.passed() ? kOk : kNumeric;
}

int cmd_synth(const Options& o, std::ostream& out) {
  Run run("synth", o, out);
  synth::HmmConfig cfg = o.hmm;
  cfg.seed = o.seed;
  run.param("sentences", cfg.sentences);
  run.param("min_length", cfg.min_length);
  run.param("max_length", cfg.max_length);
  run.param("hmm_states", cfg.num_states);
  run.param("dim", cfg.dim);
  synth::HmmData data;
  try {
    data = synth::generate_hmm(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  io::save_corpus(data.corpus, (dir / "corpus.txt").string());
  io::save_embeddings(data.store, (dir / "embeddings.lse").string());
  io::save_tags(data.truth, data.corpus, (dir / "truth.tsv").string());
  for (const char* name : {"corpus.txt", "embeddings.lse", "truth.tsv"})
    run.emit(name, io::read_file((dir / name).string()));
  run.finish();
  return kOk;
}

void add_data(CLI::App* c, Options& o) {
  c->add_option("--corpus", o.corpus, "Corpus file, one sentence per line");
  c->add_option("--embeddings", o.embeddings, "LSE1 embedding file");
}

void add_tags(CLI::App* c, Options& o) {
  c->add_option("--tags", o.tags, "Tag layer as name=path (repeatable)");
}

void add_out(CLI::App* c, Options& o) {
  c->add_option("--out", o.out, "Output directory")->each([&o](const std::string&) { o.out_given = true; });
}

void add_training(CLI::App* c, Options& o) {
  c->add_option("--states", o.states, "Number of latent states")->capture_default_str();
  c->add_option("--hidden", o.hidden, "Decoder hidden size")->capture_default_str();
  c->add_option("--beta", o.beta, "Entropy weight")->capture_default_str();
  c->add_option("--tau", o.tau, "Relaxation temperature")->capture_default_str();
  c->add_option("--epochs", o.epochs, "Training epochs")->capture_default_str();
  c->add_option("--batch-size", o.batch_size, "Sentences per update")->capture_default_str();
  c->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  c->add_option("--checkpoint-every", o.checkpoint_every, "Checkpoint interval in epochs (0: final only)")
      ->capture_default_str();
  c->add_option("--entropy-sign", o.entropy_sign, "plus or minus")->capture_default_str();
  c->add_option("--threshold", o.threshold, "Alignment threshold for model selection")->capture_default_str();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"statenet: latent state networks over contextual embeddings", "statenet"};
  app.set_version_flag("--version", STATENET_VERSION);
  app.set_config("--config", "", "TOML/INI file of option defaults");
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", o.threads, "Worker threads (1 is deterministic)")->capture_default_str();

  auto* validate = app.add_subcommand("validate", "Check that corpus, embeddings and tags agree");
  add_data(validate, o);
  add_tags(validate, o);
  add_out(validate, o);

  auto* train = app.add_subcommand("train", "Train a state bank");
  add_data(train, o);
  add_tags(train, o);
  add_out(train, o);
  add_training(train, o);

  auto* beta = app.add_subcommand("beta-search", "Two-stage search over the entropy weight");
  add_data(beta, o);
  add_tags(beta, o);
  add_out(beta, o);
  add_training(beta, o);
  beta->add_option("--stage1", o.stage1, "Stage-1 grid")->delimiter(',');
  beta->add_option("--stage2", o.stage2, "Stage-2 grid (default: derived from stage 1)")->delimiter(',');

  auto* decode = app.add_subcommand("decode", "Viterbi-decode a corpus");
  add_data(decode, o);
  add_out(decode, o);
  decode->add_option("--checkpoint", o.checkpoint, "Checkpoint file");

  auto* align = app.add_subcommand("align", "Align states with tag layers");
  align->add_option("--corpus", o.corpus, "Corpus file");
  align->add_option("--assignment", o.assignment, "Assignment file from decode");
  add_tags(align, o);
  add_out(align, o);
  align->add_option("--threshold", o.threshold, "Alignment threshold")->capture_default_str();

  auto* composition = app.add_subcommand("composition", "Function/content composition of states");
  auto* graph = app.add_subcommand("graph", "Transition graph and hub scores");
  auto* report = app.add_subcommand("report", "Top words per state");
  for (auto* c : {composition, graph, report}) {
    c->add_option("--corpus", o.corpus, "Corpus file");
    c->add_option("--assignment", o.assignment, "Assignment file from decode");
    c->add_option("--function-words", o.function_words, "Function word list (default: built-in)");
    add_out(c, o);
  }
  composition->add_option("--head-k", o.head_k, "Number of head states")->capture_default_str();
  graph->add_option("--format", o.format, "json, dot or both")->capture_default_str();
  graph->add_option("--top-bigrams", o.top_bigrams, "Bigrams kept per edge")->capture_default_str();
  report->add_option("--top-k", o.top_k, "Words listed per state")->capture_default_str();

  auto* trace = app.add_subcommand("trace", "State traversals of selected sentences");
  add_data(trace, o);
  add_out(trace, o);
  trace->add_option("--assignment", o.assignment, "Assignment file from decode");
  trace->add_option("--checkpoint", o.checkpoint, "Checkpoint file (instead of --assignment)");
  trace->add_option("--sentences", o.sentences, "Sentence indices")->delimiter(',');

  auto* oracle = app.add_subcommand("oracle", "Check the CRF dynamic programs against enumeration");
  oracle->add_option("--trials", o.trials, "Random lattices")->capture_default_str();
  add_out(oracle, o);

  auto* synth = app.add_subcommand("synth", "Sample a synthetic HMM corpus with embeddings");
  synth->add_option("--sentences", o.hmm.sentences, "Sentences")->capture_default_str();
  synth->add_option("--min-length", o.hmm.min_length, "Shortest sentence")->capture_default_str();
  synth->add_option("--max-length", o.hmm.max_length, "Longest sentence")->capture_default_str();
  synth->add_option("--hmm-states", o.hmm.num_states, "True states")->capture_default_str();
  synth->add_option("--dim", o.hmm.dim, "Embedding dimension")->capture_default_str();
  add_out(synth, o);

  for (auto* c : app.get_subcommands({})) c->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    parse_tag_args(o.tags);  // malformed specs are usage errors, reported before any file is read
    if (validate->parsed()) return cmd_validate(o, out);
    if (train->parsed()) return cmd_train(o, out, err);
    if (beta->parsed()) return cmd_beta_search(o, out);
    if (decode->parsed()) return cmd_decode(o, out);
    if (align->parsed()) return cmd_align(o, out);
    if (composition->parsed()) return cmd_composition(o, out);
    if (graph->parsed()) return cmd_graph(o, out);
    if (report->parsed()) return cmd_report(o, out);
    if (trace->parsed()) return cmd_trace(o, out);
    if (oracle->parsed()) return cmd_oracle(o, out);
    if (synth->parsed()) return cmd_synth(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n" << "run with --help for usage\n";
    return kUsage;
  } catch (const io::DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

int run(const std::vector<std::string>& args) { return run(args, std::cout, std::cerr); }

}  // namespace statenet::cli
