#include "statenet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "statenet/kernels.hpp"

namespace statenet {

Var Tape::variable(Tensor value) {
  require_finite(value, "variable");
  nodes_.push_back(Node{std::move(value), {}, {}, true});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) {
  require_finite(value, "constant");
  nodes_.push_back(Node{std::move(value), {}, {}, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(const char* op, Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  return record(op, std::move(value), std::span<const Var>(inputs.begin(), inputs.size()),
                std::move(backward));
}

Var Tape::record(const char* op, Tensor value, std::span<const Var> inputs, Backward backward) {
  if (!value.all_finite()) {
    std::string msg = std::string("non-finite value produced by ") + op + " with operands";
    for (Var in : inputs) msg += " " + in.shape().str();
    throw NumericError(msg);
  }
  bool needs = false;
  for (Var in : inputs) {
    if (in.valid() && &in.tape() != this) throw ShapeError(std::string(op) + ": operand from a different tape");
    needs = needs || in.requires_grad();
  }
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs});
  return Var(this, nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.empty()) return Tensor::zeros_like(n.value);
  return Tensor(n.value.shape(), n.grad);
}

void Tape::backward(Var root) {
  if (root.value().size() != 1) throw ShapeError("backward root must be a scalar, got " + root.shape().str());
  if (backward_done_) throw std::logic_error("Tape::backward called twice");
  backward_done_ = true;
  if (!root.requires_grad()) return;
  grad_buffer(root)[0] = 1.0;
  for (std::size_t id = root.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

namespace {

[[noreturn]] void shape_fail(const char* op, Var a, Var b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape().str() + " and " + b.shape().str());
}

void require_same(const char* op, Var a, Var b) {
  if (a.shape() != b.shape()) shape_fail(op, a, b);
}

void require_vector(const char* op, Var v) {
  if (v.value().rank() != 1) throw ShapeError(std::string(op) + ": expected a vector, got " + v.shape().str());
}

void require_matrix(const char* op, Var a) {
  if (a.value().rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + a.shape().str());
}

template <typename F>
void accumulate(Tape& t, Var v, F&& f) {
  if (!v.requires_grad()) return;
  f(t.grad_buffer(v));
}

template <typename F>
Var unary(const char* op, Var a, F&& fn, std::function<double(double x, double y)> dfn) {
  Tensor out = Tensor::zeros_like(a.value());
  const auto& in = a.value().values();
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  Tensor y = out;
  return a.tape().record(op, std::move(out), {a}, [a, y = std::move(y), dfn](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      const auto& x = a.value().values();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * dfn(x[i], y[i]);
    });
  });
}

}  // namespace

Var add(Var a, Var b) {
  require_same("add", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record("add", std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
    accumulate(t, b, [&](std::span<double> gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i]; });
  });
}

Var sub(Var a, Var b) {
  require_same("sub", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return a.tape().record("sub", std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
    accumulate(t, b, [&](std::span<double> gb) { for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i]; });
  });
}

Var mul(Var a, Var b) {
  require_same("mul", a, b);
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record("mul", std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.value()[i];
    });
    accumulate(t, b, [&](std::span<double> gb) {
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.value()[i];
    });
  });
}

Var scale(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= c;
  return a.tape().record("scale", std::move(out), {a}, [a, c](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i]; });
  });
}

Var add_scalar(Var a, double c) {
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += c;
  return a.tape().record("add_scalar", std::move(out), {a}, [a](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
  });
}

Var add_row(Var a, Var r) {
  require_matrix("add_row", a);
  require_vector("add_row", r);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (r.value().size() != n) shape_fail("add_row", a, r);
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += r.value()[j];
  return a.tape().record("add_row", std::move(out), {a, r}, [a, r, m, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
    accumulate(t, r, [&](std::span<double> gr) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
    });
  });
}

Var add_col(Var a, Var c) {
  require_matrix("add_col", a);
  require_vector("add_col", c);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (c.value().size() != m) shape_fail("add_col", a, c);
  Tensor out = a.value();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out(i, j) += c.value()[i];
  return a.tape().record("add_col", std::move(out), {a, c}, [a, c, m, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i]; });
    accumulate(t, c, [&](std::span<double> gc) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gc[i] += g[i * n + j];
    });
  });
}

Var matmul(Var a, Var b) {
  require_matrix("matmul", a);
  require_matrix("matmul", b);
  if (a.value().cols() != b.value().rows()) shape_fail("matmul", a, b);
  Tensor out = kernels::matmul(a.value(), b.value());
  return a.tape().record("matmul", std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.cols();
    accumulate(t, a, [&](std::span<double> ga) {  // G B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double s = 0.0;
          for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bv(p, j);
          ga[i * k + p] += s;
        }
    });
    accumulate(t, b, [&](std::span<double> gb) {  // A^T G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = av(i, p);
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += aip * g[i * n + j];
        }
    });
  });
}

Var matmul_nt(Var a, Var b) {
  require_matrix("matmul_nt", a);
  require_matrix("matmul_nt", b);
  if (a.value().cols() != b.value().cols()) shape_fail("matmul_nt", a, b);
  Tensor out = kernels::matmul_nt(a.value(), b.value());
  return a.tape().record("matmul_nt", std::move(out), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const std::size_t m = av.rows(), k = av.cols(), n = bv.rows();
    accumulate(t, a, [&](std::span<double> ga) {  // G B
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) ga[i * k + p] += gij * bv(j, p);
        }
    });
    accumulate(t, b, [&](std::span<double> gb) {  // G^T A
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
          const double gij = g[i * n + j];
          if (gij == 0.0) continue;
          for (std::size_t p = 0; p < k; ++p) gb[j * k + p] += gij * av(i, p);
        }
    });
  });
}

Var matvec(Var a, Var v) {
  require_matrix("matvec", a);
  require_vector("matvec", v);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (v.value().size() != n) shape_fail("matvec", a, v);
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) out[i] = kernels::dot(a.value().row(i), v.value().data());
  return a.tape().record("matvec", std::move(out), {a, v}, [a, v, m, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i] * v.value()[j];
    });
    accumulate(t, v, [&](std::span<double> gv) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gv[j] += g[i] * a.value()(i, j);
    });
  });
}

Var matvec_t(Var a, Var v) {
  require_matrix("matvec_t", a);
  require_vector("matvec_t", v);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (v.value().size() != m) shape_fail("matvec_t", a, v);
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < m; ++i) {
    const double vi = v.value()[i];
    for (std::size_t j = 0; j < n; ++j) out[j] += a.value()(i, j) * vi;
  }
  return a.tape().record("matvec_t", std::move(out), {a, v}, [a, v, m, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += v.value()[i] * g[j];
    });
    accumulate(t, v, [&](std::span<double> gv) {
      for (std::size_t i = 0; i < m; ++i) gv[i] += kernels::dot(a.value().row(i), g);
    });
  });
}

Var transpose(Var a) {
  require_matrix("transpose", a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  return a.tape().record("transpose", kernels::transpose(a.value()), {a},
                         [a, m, n](Tape& t, std::span<const double> g) {
                           accumulate(t, a, [&](std::span<double> ga) {
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
                           });
                         });
}

Var sum(Var a) {
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  return a.tape().record("sum", Tensor::scalar(s), {a}, [a](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { for (double& x : ga) x += g[0]; });
  });
}

Var col_sums(Var a) {
  require_matrix("col_sums", a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  Tensor out(Shape{n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j] += a.value()(i, j);
  return a.tape().record("col_sums", std::move(out), {a}, [a, m, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j];
    });
  });
}

Var dot(Var a, Var b) {
  require_vector("dot", a);
  require_same("dot", a, b);
  const double s = kernels::dot(a.value().data(), b.value().data());
  return a.tape().record("dot", Tensor::scalar(s), {a, b}, [a, b](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[0] * b.value()[i];
    });
    accumulate(t, b, [&](std::span<double> gb) {
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[0] * a.value()[i];
    });
  });
}

Var concat(Var a, Var b) {
  require_vector("concat", a);
  require_vector("concat", b);
  const std::size_t na = a.value().size();
  std::vector<double> out(a.value().values());
  out.insert(out.end(), b.value().values().begin(), b.value().values().end());
  return a.tape().record("concat", Tensor::vector(std::move(out)), {a, b},
                         [a, b, na](Tape& t, std::span<const double> g) {
                           accumulate(t, a, [&](std::span<double> ga) {
                             for (std::size_t i = 0; i < na; ++i) ga[i] += g[i];
                           });
                           accumulate(t, b, [&](std::span<double> gb) {
                             for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[na + i];
                           });
                         });
}

Var slice(Var v, std::size_t offset, std::size_t length) {
  require_vector("slice", v);
  if (offset + length > v.value().size())
    throw ShapeError("slice [" + std::to_string(offset) + ", +" + std::to_string(length) + ") of " + v.shape().str());
  const auto src = v.value().data().subspan(offset, length);
  return v.tape().record("slice", Tensor::vector({src.begin(), src.end()}), {v},
                         [v, offset](Tape& t, std::span<const double> g) {
                           accumulate(t, v, [&](std::span<double> gv) {
                             for (std::size_t i = 0; i < g.size(); ++i) gv[offset + i] += g[i];
                           });
                         });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var logsumexp(Var v) {
  require_vector("logsumexp", v);
  const double z = kernels::logsumexp(v.value().data());
  return v.tape().record("logsumexp", Tensor::scalar(z), {v}, [v, z](Tape& t, std::span<const double> g) {
    accumulate(t, v, [&](std::span<double> gv) {
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[0] * std::exp(v.value()[i] - z);
    });
  });
}

Var logsumexp_cols(Var a) {
  require_matrix("logsumexp_cols", a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  if (m == 0) throw ShapeError("logsumexp_cols over zero rows");
  Tensor out(Shape{n});
  std::vector<double> column(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) column[i] = av(i, j);
    out[j] = kernels::logsumexp(column);
  }
  Tensor z = out;
  return a.tape().record("logsumexp_cols", std::move(out), {a},
                         [a, z = std::move(z), m, n](Tape& t, std::span<const double> g) {
                           accumulate(t, a, [&](std::span<double> ga) {
                             for (std::size_t i = 0; i < m; ++i)
                               for (std::size_t j = 0; j < n; ++j)
                                 ga[i * n + j] += g[j] * std::exp(a.value()(i, j) - z[j]);
                           });
                         });
}

Var softmax(Var v) {
  require_vector("softmax", v);
  Tensor y = Tensor::vector(kernels::softmax_row(v.value().data()));
  Tensor yc = y;
  return v.tape().record("softmax", std::move(y), {v}, [v, y = std::move(yc)](Tape& t, std::span<const double> g) {
    accumulate(t, v, [&](std::span<double> gv) {
      const double gy = kernels::dot(g, y.data());
      for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += y[i] * (g[i] - gy);
    });
  });
}

Var log_softmax(Var v) {
  require_vector("log_softmax", v);
  Tensor y = Tensor::vector(kernels::log_softmax_row(v.value().data()));
  Tensor yc = y;
  return v.tape().record("log_softmax", std::move(y), {v},
                         [v, y = std::move(yc)](Tape& t, std::span<const double> g) {
                           accumulate(t, v, [&](std::span<double> gv) {
                             double gs = 0.0;
                             for (double x : g) gs += x;
                             for (std::size_t i = 0; i < gv.size(); ++i) gv[i] += g[i] - std::exp(y[i]) * gs;
                           });
                         });
}

Var log_softmax_cols(Var a) {
  require_matrix("log_softmax_cols", a);
  const Tensor& av = a.value();
  const std::size_t m = av.rows(), n = av.cols();
  Tensor y(Shape{m, n});
  std::vector<double> column(m);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) column[i] = av(i, j);
    const double z = kernels::logsumexp(column);
    for (std::size_t i = 0; i < m; ++i) y(i, j) = av(i, j) - z;
  }
  Tensor yc = y;
  return a.tape().record("log_softmax_cols", std::move(y), {a},
                         [a, y = std::move(yc), m, n](Tape& t, std::span<const double> g) {
                           accumulate(t, a, [&](std::span<double> ga) {
                             for (std::size_t j = 0; j < n; ++j) {
                               double gs = 0.0;
                               for (std::size_t i = 0; i < m; ++i) gs += g[i * n + j];
                               for (std::size_t i = 0; i < m; ++i)
                                 ga[i * n + j] += g[i * n + j] - std::exp(y(i, j)) * gs;
                             }
                           });
                         });
}

Var gather(Var v, std::size_t i) {
  require_vector("gather", v);
  if (i >= v.value().size()) throw ShapeError("gather index " + std::to_string(i) + " out of " + v.shape().str());
  return v.tape().record("gather", Tensor::scalar(v.value()[i]), {v}, [v, i](Tape& t, std::span<const double> g) {
    accumulate(t, v, [&](std::span<double> gv) { gv[i] += g[0]; });
  });
}

Var at(Var a, std::size_t i, std::size_t j) {
  require_matrix("at", a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (i >= m || j >= n)
    throw ShapeError("at(" + std::to_string(i) + ", " + std::to_string(j) + ") out of " + a.shape().str());
  return a.tape().record("at", Tensor::scalar(a.value()(i, j)), {a}, [a, i, j, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) { ga[i * n + j] += g[0]; });
  });
}

Var row(Var a, std::size_t i) {
  require_matrix("row", a);
  const std::size_t n = a.value().cols();
  if (i >= a.value().rows()) throw ShapeError("row " + std::to_string(i) + " out of " + a.shape().str());
  const auto r = a.value().row(i);
  return a.tape().record("row", Tensor::vector({r.begin(), r.end()}), {a}, [a, i, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j];
    });
  });
}

Var col(Var a, std::size_t j) {
  require_matrix("col", a);
  const std::size_t m = a.value().rows(), n = a.value().cols();
  if (j >= n) throw ShapeError("col " + std::to_string(j) + " out of " + a.shape().str());
  Tensor out(Shape{m});
  for (std::size_t i = 0; i < m; ++i) out[i] = a.value()(i, j);
  return a.tape().record("col", std::move(out), {a}, [a, j, m, n](Tape& t, std::span<const double> g) {
    accumulate(t, a, [&](std::span<double> ga) {
      for (std::size_t i = 0; i < m; ++i) ga[i * n + j] += g[i];
    });
  });
}

Var stack_rows(std::span<const Var> rows) {
  if (rows.empty()) throw ShapeError("stack_rows of zero rows");
  const std::size_t n = rows[0].value().size();
  std::vector<double> out;
  out.reserve(rows.size() * n);
  for (Var r : rows) {
    require_vector("stack_rows", r);
    if (r.value().size() != n) shape_fail("stack_rows", rows[0], r);
    out.insert(out.end(), r.value().values().begin(), r.value().values().end());
  }
  std::vector<Var> inputs(rows.begin(), rows.end());
  Tape& tape = rows[0].tape();
  return tape.record("stack_rows", Tensor::matrix(rows.size(), n, std::move(out)), rows,
                     [inputs, n](Tape& t, std::span<const double> g) {
                       for (std::size_t i = 0; i < inputs.size(); ++i)
                         accumulate(t, inputs[i], [&](std::span<double> gr) {
                           for (std::size_t j = 0; j < n; ++j) gr[j] += g[i * n + j];
                         });
                     });
}

Var straight_through(const Tensor& hard, Var soft) {
  if (hard.shape() != soft.shape())
    throw ShapeError("straight_through: hard " + hard.shape().str() + " vs soft " + soft.shape().str());
  return soft.tape().record("straight_through", hard, {soft}, [soft](Tape& t, std::span<const double> g) {
    accumulate(t, soft, [&](std::span<double> gs) { for (std::size_t i = 0; i < g.size(); ++i) gs[i] += g[i]; });
  });
}

}  // namespace statenet
