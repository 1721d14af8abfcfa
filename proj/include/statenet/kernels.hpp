#pragma once

#include <span>
#include <vector>

#include "statenet/tensor.hpp"

// Untracked dense kernels. The tape ops in tape.hpp reuse these for their
// forward values.
namespace statenet::kernels {

// log sum_i exp(v_i) with max-shift. Throws on empty or non-finite input.
double logsumexp(std::span<const double> v);

// Normalized exponentials; output sums to one. Throws on non-finite input.
std::vector<double> softmax_row(std::span<const double> v);
std::vector<double> log_softmax_row(std::span<const double> v);

double dot(std::span<const double> a, std::span<const double> b);

// (m x k) * (k x n)
Tensor matmul(const Tensor& a, const Tensor& b);
// (m x k) * (n x k)^T
Tensor matmul_nt(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

std::size_t argmax(std::span<const double> v);  // first maximum

}  // namespace statenet::kernels
