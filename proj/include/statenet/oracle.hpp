#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "statenet/crf.hpp"
#include "statenet/rng.hpp"

// Brute-force checks of the CRF dynamic programs against full path enumeration.
namespace statenet::crf {

// Potentials uniform in [-scale, scale]. With `integer` set the entries are
// drawn from {-1, 0, 1} so that Viterbi ties are common.
LatticeScores random_lattice(Rng& rng, std::size_t length, std::size_t num_states, double scale = 2.0,
                             bool integer = false);

struct OracleReport {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_log_z_error = 0.0;
  double max_unary_error = 0.0;
  double max_pairwise_error = 0.0;
  double max_entropy_error = 0.0;
  std::size_t viterbi_mismatches = 0;
  std::vector<std::string> messages;  // one per failing trial

  bool passed() const { return failures == 0; }
};

// Random lattices with T in [1, 6] and N in [2, 5]; every fourth one uses
// integer potentials.
OracleReport run_enumeration_suite(std::size_t trials, std::uint64_t seed, double tolerance = 1e-8);

}  // namespace statenet::crf
