#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace statenet {

// Seeded generator with platform-independent draws. The standard library's
// distributions are implementation-defined, so every variate here is built
// directly from mt19937_64 output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Independent stream for a (seed, a, b) triple, e.g. (run seed, epoch, sentence).
  static Rng derive(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

  std::uint64_t next_u64() { return engine_(); }
  double uniform();                     // [0, 1)
  double uniform_open();                // (0, 1)
  double uniform(double lo, double hi); // [lo, hi)
  std::uint64_t below(std::uint64_t n); // uniform integer in [0, n)
  double normal();                      // standard normal, Box-Muller
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  double gumbel();                      // standard Gumbel(0, 1)
  std::size_t categorical(std::span<const double> probs);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace statenet
