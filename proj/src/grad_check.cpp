#include "statenet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace statenet {

double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

namespace {

double evaluate(const LossFn& loss, const std::vector<Tensor>& params) {
  Tape tape;
  std::vector<Var> leaves;
  leaves.reserve(params.size());
  for (const Tensor& p : params) leaves.push_back(tape.constant(p));
  return loss(tape, leaves).item();
}

}  // namespace

GradCheckReport grad_check(const LossFn& loss, std::span<const Tensor> params, double eps,
                           std::size_t max_elements_per_param) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");

  std::vector<Tensor> analytic;
  {
    Tape tape;
    std::vector<Var> leaves;
    for (const Tensor& p : params) leaves.push_back(tape.variable(p));
    Var out = loss(tape, leaves);
    tape.backward(out);
    for (Var v : leaves) analytic.push_back(tape.grad(v));
  }

  GradCheckReport report;
  std::vector<Tensor> work(params.begin(), params.end());
  for (std::size_t p = 0; p < work.size(); ++p) {
    const std::size_t n = std::min(work[p].size(), max_elements_per_param);
    for (std::size_t i = 0; i < n; ++i) {
      const double orig = work[p][i];
      work[p][i] = orig + eps;
      const double up = evaluate(loss, work);
      work[p][i] = orig - eps;
      const double down = evaluate(loss, work);
      work[p][i] = orig;
      const double fd = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[p][i], fd);
      ++report.checked;
      if (err > report.max_rel_error || report.checked == 1) {
        report.max_rel_error = std::max(report.max_rel_error, err);
        report.worst_param = p;
        report.worst_index = i;
        report.worst_tape = analytic[p][i];
        report.worst_fd = fd;
      }
    }
  }
  return report;
}

}  // namespace statenet
