#include "statenet/checkpoint.hpp"

#include "statenet/binary_io.hpp"
#include "statenet/corpus_io.hpp"

namespace statenet::train {

namespace {

constexpr std::string_view kMagic = "LSC1";
constexpr std::uint32_t kVersion = 1;

using io::DataError;

[[noreturn]] void truncated(const std::string& origin) {
  throw DataError(DataError::Kind::Truncated, origin + ": checkpoint ends early");
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  binary::Writer w;
  w.bytes(kMagic);
  w.u32(kVersion);
  w.u64(p.bank.num_states());
  w.u64(p.bank.dim());
  w.u64(p.decoder.hidden);
  w.u64(p.decoder.vocab);
  w.u64(ckpt.epoch);
  w.u64(ckpt.seed);
  w.f64(ckpt.beta);
  w.u64(ckpt.elbo_trace.size());
  for (const TracePoint& tp : ckpt.elbo_trace) {
    w.u64(tp.step);
    w.f64(tp.value);
  }
  const auto named = p.named();
  w.u32(static_cast<std::uint32_t>(named.size()));
  for (const auto& [name, t] : named) {
    w.u32(static_cast<std::uint32_t>(name.size()));
    w.bytes(name);
    w.u32(static_cast<std::uint32_t>(t->rank()));
    for (std::size_t a = 0; a < t->rank(); ++a) w.u64(t->shape()[a]);
    for (double x : t->data()) w.f64(x);
  }
  return w.buffer();
}

Checkpoint decode_checkpoint(const std::string& bytes, const std::string& origin) {
  binary::Reader r(bytes);
  std::string_view magic;
  if (!r.bytes(4, &magic) || magic != kMagic)
    throw DataError(DataError::Kind::BadMagic, origin + ": not an LSC1 checkpoint");
  std::uint32_t version = 0;
  if (!r.u32(&version)) truncated(origin);
  if (version != kVersion)
    throw DataError(DataError::Kind::Malformed, origin + ": unsupported checkpoint version " + std::to_string(version));
  std::uint64_t N, D, H, V, epoch, seed, trace_len;
  Checkpoint c;
  if (!r.u64(&N) || !r.u64(&D) || !r.u64(&H) || !r.u64(&V) || !r.u64(&epoch) || !r.u64(&seed) || !r.f64(&c.beta) ||
      !r.u64(&trace_len))
    truncated(origin);
  if (trace_len > r.remaining() / 16) truncated(origin);
  c.epoch = epoch;
  c.seed = seed;
  c.elbo_trace.resize(trace_len);
  for (auto& tp : c.elbo_trace)
    if (!r.u64(&tp.step) || !r.f64(&tp.value)) truncated(origin);

  c.params.decoder.input_dim = D;
  c.params.decoder.hidden = H;
  c.params.decoder.vocab = V;
  auto named = c.params.named();
  std::uint32_t count = 0;
  if (!r.u32(&count)) truncated(origin);
  if (count != named.size())
    throw DataError(DataError::Kind::Malformed, origin + ": expected " + std::to_string(named.size()) +
                                                    " tensors, found " + std::to_string(count));
  for (auto& [expected, target] : named) {
    std::uint32_t len = 0, rank = 0;
    std::string_view name;
    if (!r.u32(&len) || !r.bytes(len, &name)) truncated(origin);
    if (name != expected)
      throw DataError(DataError::Kind::Malformed,
                      origin + ": tensor '" + std::string(name) + "' where '" + expected + "' was expected");
    if (!r.u32(&rank)) truncated(origin);
    if (rank == 0 || rank > Shape::kMaxRank)
      throw DataError(DataError::Kind::Malformed, origin + ": tensor " + expected + " has rank " + std::to_string(rank));
    std::uint64_t dims[Shape::kMaxRank] = {1, 1, 1};
    for (std::uint32_t a = 0; a < rank; ++a)
      if (!r.u64(&dims[a])) truncated(origin);
    const std::uint64_t numel = dims[0] * dims[1] * dims[2];
    if (numel > r.remaining() / 8) truncated(origin);
    Shape shape = rank == 1 ? Shape{dims[0]} : rank == 2 ? Shape{dims[0], dims[1]} : Shape{dims[0], dims[1], dims[2]};
    std::vector<double> data(numel);
    for (double& x : data)
      if (!r.f64(&x)) truncated(origin);
    *target = Tensor(shape, std::move(data));
  }
  if (r.remaining() != 0)
    throw DataError(DataError::Kind::Malformed, origin + ": " + std::to_string(r.remaining()) + " trailing bytes");
  try {
    if (c.params.bank.num_states() != N || c.params.bank.dim() != D)
      throw ShapeError("state bank is " + c.params.bank.states.shape().str() + ", header says N=" + std::to_string(N) +
                       " D=" + std::to_string(D));
    c.params.bank.validate();
    c.params.decoder.validate();
  } catch (const std::exception& e) {
    throw DataError(DataError::Kind::LengthMismatch, origin + ": " + e.what());
  }
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) { io::write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(io::read_file(path), path); }

}  // namespace statenet::train
