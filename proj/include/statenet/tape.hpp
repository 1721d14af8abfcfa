#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "statenet/tensor.hpp"

namespace statenet {

class Tape;

// Handle to a value recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  double item() const { return value().item(); }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Define-by-run reverse-mode tape. Build one per step, call backward() once on
// a scalar, then read gradients of the leaves. Not thread-safe; use one tape
// per thread.
class Tape {
 public:
  // Accumulates the upstream gradient (laid out like the node's value) into
  // the node's inputs.
  using Backward = std::function<void(Tape&, std::span<const double> grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var variable(Tensor value);
  Var constant(Tensor value);

  // Low-level recording used by the op library. `backward` is dropped when no
  // input requires a gradient.
  Var record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward backward);
  Var record(const char* op, Tensor value, std::span<const Var> inputs, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  // Gradient buffer of v, zero-initialized on first access. Only for nodes
  // that require gradients.
  std::span<double> grad_buffer(Var v);

  // Gradient of the last backward() root with respect to v; exactly zero when
  // v is not on any path to the root.
  Tensor grad(Var v) const;

  // Reverse sweep in exact reverse recording order. Root must be a scalar.
  void backward(Var root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    std::vector<double> grad;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

inline const Tensor& Var::value() const { return tape_->value(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }

// ---- op library -----------------------------------------------------------
// Elementwise ops require identical shapes unless stated otherwise.

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double c);
Var add_scalar(Var a, double c);
Var add_row(Var a, Var row);  // (m x n) + n-vector broadcast over rows
Var add_col(Var a, Var col);  // (m x n) + m-vector broadcast over columns

Var matmul(Var a, Var b);     // (m x k)(k x n)
Var matmul_nt(Var a, Var b);  // (m x k)(n x k)^T
Var matvec(Var a, Var v);     // (m x n) n -> m
Var matvec_t(Var a, Var v);   // (m x n)^T m -> n
Var transpose(Var a);

Var sum(Var a);       // -> scalar
Var col_sums(Var a);  // (m x n) -> n
Var dot(Var a, Var b);
Var concat(Var a, Var b);  // vectors
Var slice(Var v, std::size_t offset, std::size_t length);

Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);

Var logsumexp(Var v);       // vector -> scalar
Var logsumexp_cols(Var a);  // (m x n) -> n, reducing over rows
Var softmax(Var v);
Var log_softmax(Var v);
Var log_softmax_cols(Var a);  // each column normalized over rows

Var gather(Var v, std::size_t i);                // vector element -> scalar
Var at(Var a, std::size_t i, std::size_t j);     // matrix element -> scalar
Var row(Var a, std::size_t i);
Var col(Var a, std::size_t j);
Var stack_rows(std::span<const Var> rows);

// Forward value is `hard`; the backward pass routes the upstream gradient to
// `soft` unchanged (straight-through substitution).
Var straight_through(const Tensor& hard, Var soft);

}  // namespace statenet
