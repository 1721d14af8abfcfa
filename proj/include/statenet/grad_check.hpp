#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "statenet/tape.hpp"

namespace statenet {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double worst_tape = 0.0;
  double worst_fd = 0.0;
  std::size_t checked = 0;
};

// Builds a scalar loss on `tape` from leaves bound to `params` (same order).
using LossFn = std::function<Var(Tape& tape, std::span<const Var> params)>;

// Compares tape gradients with central finite differences, element by element.
// Relative error is |a - b| / max(1, |a|, |b|). `eps` must lie in [1e-7, 1e-3].
// The loss must be deterministic.
GradCheckReport grad_check(const LossFn& loss, std::span<const Tensor> params, double eps = 1e-5,
                           std::size_t max_elements_per_param = std::numeric_limits<std::size_t>::max());

double relative_error(double a, double b);

}  // namespace statenet
