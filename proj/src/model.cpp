#include "statenet/model.hpp"

#include <cmath>

namespace statenet::train {

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out{{"states", &bank.states}, {"start", &bank.start}};
  for (auto& entry : decoder.named()) out.push_back(entry);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, t] : const_cast<ModelParams*>(this)->named()) out.emplace_back(name, t);
  return out;
}

std::vector<Var> ModelVars::all() const {
  std::vector<Var> out{states, start};
  for (Var v : decoder.all()) out.push_back(v);
  return out;
}

ModelVars bind(Tape& tape, const ModelParams& params, bool trainable) {
  params.bank.validate();
  if (params.bank.dim() != params.decoder.input_dim)
    throw ShapeError("state dim " + std::to_string(params.bank.dim()) + " differs from decoder input dim " +
                     std::to_string(params.decoder.input_dim));
  ModelVars m;
  m.states = trainable ? tape.variable(params.bank.states) : tape.constant(params.bank.states);
  m.start = trainable ? tape.variable(params.bank.start) : tape.constant(params.bank.start);
  m.decoder = gen::bind(tape, params.decoder, trainable);
  return m;
}

std::vector<Tensor> gradients(const Tape& tape, const ModelVars& vars) {
  std::vector<Tensor> out;
  for (Var v : vars.all()) out.push_back(tape.grad(v));
  return out;
}

ModelParams init_model(const io::EmbeddingStore& store, std::size_t num_states, std::size_t hidden,
                       std::size_t vocab, Rng& rng) {
  if (num_states == 0) throw ShapeError("init_model: need at least one state");
  const std::size_t D = store.dim;
  std::vector<double> mean(D, 0.0), sq(D, 0.0);
  std::size_t count = 0;
  for (const Tensor& m : store.sequences)
    for (std::size_t t = 0; t < m.rows(); ++t, ++count)
      for (std::size_t k = 0; k < D; ++k) {
        mean[k] += m(t, k);
        sq[k] += m(t, k) * m(t, k);
      }
  if (count == 0) throw ShapeError("init_model: empty embedding store");
  std::vector<double> stddev(D);
  for (std::size_t k = 0; k < D; ++k) {
    mean[k] /= static_cast<double>(count);
    stddev[k] = std::sqrt(std::max(0.0, sq[k] / static_cast<double>(count) - mean[k] * mean[k]));
  }

  ModelParams p;
  p.bank.states = Tensor(Shape{num_states, D});
  for (std::size_t n = 0; n < num_states; ++n)
    for (std::size_t k = 0; k < D; ++k) p.bank.states(n, k) = rng.normal(mean[k], stddev[k]);
  p.bank.start = Tensor(Shape{D});
  for (std::size_t k = 0; k < D; ++k) p.bank.start[k] = rng.normal(mean[k], stddev[k]);
  p.decoder = gen::init_decoder(D, hidden, vocab, rng);
  return p;
}

}  // namespace statenet::train
