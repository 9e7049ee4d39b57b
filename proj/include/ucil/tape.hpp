#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ucil/matrix.hpp"
#include "ucil/special.hpp"

namespace ucil {

/// Thrown when a published operation produced a NaN/Inf entry.
class NonFiniteError : public std::runtime_error {
 public:
  explicit NonFiniteError(const std::string& what) : std::runtime_error(what) {}
};

/// Handle into a Tape node.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode differentiation tape over matrix-granularity operations.
/// Single-threaded by contract: one tape per training step, built forward,
/// differentiated once by backward().
class Tape {
 public:
  Var leaf(const Matrix& value) { return push(value, {}, "leaf"); }

  Var constant(Matrix value) { return push(std::move(value), {}, "constant"); }

  Var scalar(double v) {
    Matrix m(1, 1, v);
    return push(std::move(m), {}, "scalar");
  }

  const Matrix& value(Var v) const { return node(v).value; }
  const Matrix& grad(Var v) const { return node(v).grad; }

  double scalar_value(Var v) const {
    const Matrix& m = value(v);
    if (m.rows() != 1 || m.cols() != 1)
      throw std::invalid_argument("scalar_value: node is not 1x1");
    return m(0, 0);
  }

  std::size_t size() const { return nodes_.size(); }

  // ---- elementwise ----

  Var add(Var a, Var b) {
    const Matrix &A = value(a), &B = value(b);
    detail::require_shape(A.same_shape(B), "add: shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += B.data()[i];
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate(b, g);
    }, "add");
  }

  Var sub(Var a, Var b) {
    const Matrix &A = value(a), &B = value(b);
    detail::require_shape(A.same_shape(B), "sub: shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= B.data()[i];
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      t.accumulate_scaled(b, g, -1.0);
    }, "sub");
  }

  Var mul(Var a, Var b) {
    const Matrix &A = value(a), &B = value(b);
    detail::require_shape(A.same_shape(B), "mul: shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= B.data()[i];
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
      t.accumulate_product(a, g, t.value(b));
      t.accumulate_product(b, g, t.value(a));
    }, "mul");
  }

  Var div(Var a, Var b) {
    const Matrix &A = value(a), &B = value(b);
    detail::require_shape(A.same_shape(B), "div: shape mismatch");
    Matrix out = A;
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] /= B.data()[i];
    int out_id = next_id();
    return push(std::move(out), [a, b, out_id](Tape& t, const Matrix& g) {
      const Matrix& bm = t.value(b);
      const Matrix& om = t.nodes_[static_cast<std::size_t>(out_id)].value;
      Matrix& ga = t.grad_of(a);
      Matrix& gb = t.grad_of(b);
      for (std::size_t i = 0; i < g.size(); ++i) {
        ga.data()[i] += g.data()[i] / bm.data()[i];
        gb.data()[i] -= g.data()[i] * om.data()[i] / bm.data()[i];
      }
    }, "div");
  }

  Var add_scalar(Var a, double s) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += s;
    return push(std::move(out), [a](Tape& t, const Matrix& g) { t.accumulate(a, g); },
                "add_scalar");
  }

  Var mul_scalar(Var a, double s) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] *= s;
    return push(std::move(out),
                [a, s](Tape& t, const Matrix& g) { t.accumulate_scaled(a, g, s); },
                "mul_scalar");
  }

  /// s - a
  Var rsub_scalar(double s, Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = s - out.data()[i];
    return push(std::move(out),
                [a](Tape& t, const Matrix& g) { t.accumulate_scaled(a, g, -1.0); },
                "rsub_scalar");
  }

  /// s / a, elementwise.
  Var sdiv(double s, Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = s / out.data()[i];
    int out_id = next_id();
    return push(std::move(out), [a, out_id](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      const Matrix& om = t.nodes_[static_cast<std::size_t>(out_id)].value;
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data()[i] -= g.data()[i] * om.data()[i] / am.data()[i];
    }, "sdiv");
  }

  Var relu(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::max(0.0, out.data()[i]);
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (am.data()[i] > 0.0) ga.data()[i] += g.data()[i];
    }, "relu");
  }

  Var softplus(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = softplus_value(out.data()[i]);
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data()[i] += g.data()[i] * sigmoid_value(am.data()[i]);
    }, "softplus");
  }

  Var exp(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::exp(out.data()[i]);
    int out_id = next_id();
    return push(std::move(out), [a, out_id](Tape& t, const Matrix& g) {
      const Matrix& om = t.nodes_[static_cast<std::size_t>(out_id)].value;
      t.accumulate_product(a, g, om);
    }, "exp");
  }

  Var log(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(out.data()[i]);
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i) ga.data()[i] += g.data()[i] / am.data()[i];
    }, "log");
  }

  /// log(max(a, floor)); gradient is zero inside the clamp region.
  Var log_clamped(Var a, double floor) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i)
      out.data()[i] = std::log(std::max(out.data()[i], floor));
    return push(std::move(out), [a, floor](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (am.data()[i] > floor) ga.data()[i] += g.data()[i] / am.data()[i];
    }, "log_clamped");
  }

  Var lgamma(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (!(out.data()[i] > 0.0))
        throw std::domain_error("lgamma: requires positive entries");
      out.data()[i] = std::lgamma(out.data()[i]);
    }
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data()[i] += g.data()[i] * ucil::digamma(am.data()[i]);
    }, "lgamma");
  }

  Var digamma(Var a) {
    Matrix out = value(a);
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = ucil::digamma(out.data()[i]);
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      const Matrix& am = t.value(a);
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.size(); ++i)
        ga.data()[i] += g.data()[i] * ucil::trigamma(am.data()[i]);
    }, "digamma");
  }

  // ---- linear algebra ----

  Var matmul(Var a, Var b) {
    Matrix out;
    detail::gemm_nn(value(a), value(b), out);
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
      detail::gemm_nt(g, t.value(b), t.grad_of(a), /*accumulate=*/true);
      detail::gemm_tn(t.value(a), g, t.grad_of(b), /*accumulate=*/true);
    }, "matmul");
  }

  /// A * B^T
  Var matmul_nt(Var a, Var b) {
    Matrix out;
    detail::gemm_nt(value(a), value(b), out);
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
      detail::gemm_nn(g, t.value(b), t.grad_of(a), /*accumulate=*/true);
      detail::gemm_tn(g, t.value(a), t.grad_of(b), /*accumulate=*/true);
    }, "matmul_nt");
  }

  /// a (n x d) plus a broadcast row vector b (1 x d).
  Var add_rowvec(Var a, Var b) {
    const Matrix &A = value(a), &B = value(b);
    detail::require_shape(B.rows() == 1 && B.cols() == A.cols(),
                          "add_rowvec: expected 1 x cols(a) row vector");
    Matrix out = A;
    for (std::size_t i = 0; i < out.rows(); ++i) {
      double* r = out.row(i);
      for (std::size_t j = 0; j < out.cols(); ++j) r[j] += B.data()[j];
    }
    return push(std::move(out), [a, b](Tape& t, const Matrix& g) {
      t.accumulate(a, g);
      Matrix& gb = t.grad_of(b);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* r = g.row(i);
        for (std::size_t j = 0; j < g.cols(); ++j) gb.data()[j] += r[j];
      }
    }, "add_rowvec");
  }

  // ---- reductions / reshapes ----

  Var rowsum(Var a) {
    const Matrix& A = value(a);
    Matrix out(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      const double* r = A.row(i);
      double acc = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) acc += r[j];
      out(i, 0) = acc;
    }
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < ga.rows(); ++i) {
        double* r = ga.row(i);
        const double gi = g(i, 0);
        for (std::size_t j = 0; j < ga.cols(); ++j) r[j] += gi;
      }
    }, "rowsum");
  }

  Var sum(Var a) {
    const Matrix& A = value(a);
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += A.data()[i];
    Matrix out(1, 1, acc);
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      const double gv = g(0, 0);
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += gv;
    }, "sum");
  }

  Var mean(Var a) {
    const Matrix& A = value(a);
    if (A.size() == 0) throw std::invalid_argument("mean: empty matrix");
    double acc = 0.0;
    for (std::size_t i = 0; i < A.size(); ++i) acc += A.data()[i];
    const double inv_n = 1.0 / static_cast<double>(A.size());
    Matrix out(1, 1, acc * inv_n);
    return push(std::move(out), [a, inv_n](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      const double gv = g(0, 0) * inv_n;
      for (std::size_t i = 0; i < ga.size(); ++i) ga.data()[i] += gv;
    }, "mean");
  }

  /// n x 1 column replicated across `cols` columns.
  Var broadcast_col(Var a, std::size_t cols) {
    const Matrix& A = value(a);
    detail::require_shape(A.cols() == 1, "broadcast_col: expected n x 1 input");
    Matrix out(A.rows(), cols);
    for (std::size_t i = 0; i < A.rows(); ++i) {
      double* r = out.row(i);
      const double v = A(i, 0);
      for (std::size_t j = 0; j < cols; ++j) r[j] = v;
    }
    return push(std::move(out), [a](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        const double* r = g.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) acc += r[j];
        ga(i, 0) += acc;
      }
    }, "broadcast_col");
  }

  Var gather_rows(Var a, std::vector<std::size_t> idx) {
    const Matrix& A = value(a);
    for (std::size_t i : idx)
      detail::require_shape(i < A.rows(), "gather_rows: index out of range");
    Matrix out(idx.size(), A.cols());
    for (std::size_t k = 0; k < idx.size(); ++k)
      std::copy(A.row(idx[k]), A.row(idx[k]) + A.cols(), out.row(k));
    return push(std::move(out), [a, idx = std::move(idx)](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t k = 0; k < idx.size(); ++k) {
        double* dst = ga.row(idx[k]);
        const double* src = g.row(k);
        for (std::size_t j = 0; j < g.cols(); ++j) dst[j] += src[j];
      }
    }, "gather_rows");
  }

  /// out(i, 0) = a(i, cols[i]); one entry picked per row.
  Var pick_per_row(Var a, std::vector<std::size_t> cols) {
    const Matrix& A = value(a);
    detail::require_shape(cols.size() == A.rows(), "pick_per_row: one index per row required");
    for (std::size_t c : cols)
      detail::require_shape(c < A.cols(), "pick_per_row: column index out of range");
    Matrix out(A.rows(), 1);
    for (std::size_t i = 0; i < A.rows(); ++i) out(i, 0) = A(i, cols[i]);
    return push(std::move(out), [a, cols = std::move(cols)](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.rows(); ++i) ga(i, cols[i]) += g(i, 0);
    }, "pick_per_row");
  }

  /// Row maximum; subgradient routed to the lowest-index argmax.
  Var row_max(Var a) {
    const Matrix& A = value(a);
    detail::require_shape(A.cols() >= 1, "row_max: needs at least one column");
    Matrix out(A.rows(), 1);
    std::vector<std::size_t> arg(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      const double* r = A.row(i);
      std::size_t best = 0;
      for (std::size_t j = 1; j < A.cols(); ++j)
        if (r[j] > r[best]) best = j;
      out(i, 0) = r[best];
      arg[i] = best;
    }
    return push(std::move(out), [a, arg = std::move(arg)](Tape& t, const Matrix& g) {
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.rows(); ++i) ga(i, arg[i]) += g(i, 0);
    }, "row_max");
  }

  /// Rows scaled to unit L2 norm. Rows with norm below 1e-12 stay zero and
  /// receive no gradient.
  Var l2_normalize_rows(Var a) {
    const Matrix& A = value(a);
    Matrix out(A.rows(), A.cols());
    std::vector<double> norms(A.rows());
    for (std::size_t i = 0; i < A.rows(); ++i) {
      const double* r = A.row(i);
      double sq = 0.0;
      for (std::size_t j = 0; j < A.cols(); ++j) sq += r[j] * r[j];
      const double n = std::sqrt(sq);
      norms[i] = n;
      if (n > 1e-12) {
        double* o = out.row(i);
        for (std::size_t j = 0; j < A.cols(); ++j) o[j] = r[j] / n;
      }
    }
    int out_id = next_id();
    return push(std::move(out),
                [a, out_id, norms = std::move(norms)](Tape& t, const Matrix& g) {
      const Matrix& om = t.nodes_[static_cast<std::size_t>(out_id)].value;
      Matrix& ga = t.grad_of(a);
      for (std::size_t i = 0; i < g.rows(); ++i) {
        if (norms[i] <= 1e-12) continue;
        const double* gi = g.row(i);
        const double* yi = om.row(i);
        double dot = 0.0;
        for (std::size_t j = 0; j < g.cols(); ++j) dot += gi[j] * yi[j];
        double* gr = ga.row(i);
        const double inv_n = 1.0 / norms[i];
        for (std::size_t j = 0; j < g.cols(); ++j)
          gr[j] += (gi[j] - dot * yi[j]) * inv_n;
      }
    }, "l2_normalize_rows");
  }

  /// Temporally weighted neighbor aggregation over a CSR graph:
  ///   out_i = sum_{j in N(i)} a_ij feats_j,
  ///   a_ij  = exp(-decay_i |t_j - t_i|) / sum_{k in N(i)} exp(-decay_i |t_k - t_i|).
  /// `decay` is n x 1 and must be nonnegative; every row of the CSR must be
  /// nonempty (guaranteed when each node carries a self-loop).
  Var neighbor_aggregate(Var feats, Var decay, std::span<const int> offsets,
                         std::span<const int> neighbors, std::span<const double> timestamps) {
    const Matrix& F = value(feats);
    const Matrix& R = value(decay);
    const std::size_t n = F.rows(), d = F.cols();
    detail::require_shape(offsets.size() == n + 1, "neighbor_aggregate: offsets size");
    detail::require_shape(R.rows() == n && R.cols() == 1, "neighbor_aggregate: decay must be n x 1");
    detail::require_shape(timestamps.size() == n, "neighbor_aggregate: timestamps size");

    std::vector<double> weights(neighbors.size());
    Matrix out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
      const int lo = offsets[i], hi = offsets[i + 1];
      if (lo >= hi) throw std::invalid_argument("neighbor_aggregate: node without neighbors");
      const double ri = R(i, 0);
      // logits are -ri * |dt| <= 0; shift by the max for a stable softmax
      double max_logit = -std::numeric_limits<double>::infinity();
      for (int e = lo; e < hi; ++e) {
        const double logit = -ri * std::abs(timestamps[neighbors[e]] - timestamps[i]);
        weights[e] = logit;
        max_logit = std::max(max_logit, logit);
      }
      double z = 0.0;
      for (int e = lo; e < hi; ++e) {
        weights[e] = std::exp(weights[e] - max_logit);
        z += weights[e];
      }
      double* out_i = out.row(i);
      for (int e = lo; e < hi; ++e) {
        weights[e] /= z;
        const double* f_j = F.row(neighbors[e]);
        const double w = weights[e];
        for (std::size_t c = 0; c < d; ++c) out_i[c] += w * f_j[c];
      }
    }

    std::vector<int> offs(offsets.begin(), offsets.end());
    std::vector<int> nbrs(neighbors.begin(), neighbors.end());
    std::vector<double> ts(timestamps.begin(), timestamps.end());
    return push(std::move(out),
                [feats, decay, offs = std::move(offs), nbrs = std::move(nbrs),
                 ts = std::move(ts), weights = std::move(weights)](Tape& t, const Matrix& g) {
      const Matrix& F = t.value(feats);
      Matrix& gf = t.grad_of(feats);
      Matrix& gr = t.grad_of(decay);
      const std::size_t n = F.rows(), d = F.cols();
      for (std::size_t i = 0; i < n; ++i) {
        const int lo = offs[i], hi = offs[i + 1];
        const double* gi = g.row(i);
        // dL/dfeats_j += a_ij * gi;  dL/dr_i = sum_j a_ij p_j (dbar - d_ij)
        // with p_j = <gi, feats_j> and dbar = sum_k a_ik d_ik.
        double dbar = 0.0;
        for (int e = lo; e < hi; ++e)
          dbar += weights[e] * std::abs(ts[nbrs[e]] - ts[i]);
        double r_grad = 0.0;
        for (int e = lo; e < hi; ++e) {
          const int j = nbrs[e];
          const double w = weights[e];
          double* gfj = gf.row(j);
          const double* fj = F.row(j);
          double p = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            gfj[c] += w * gi[c];
            p += gi[c] * fj[c];
          }
          r_grad += w * p * (dbar - std::abs(ts[j] - ts[i]));
        }
        gr(i, 0) += r_grad;
      }
    }, "neighbor_aggregate");
  }

  // ---- differentiation ----

  /// Seeds d(loss)/d(loss) = 1 and sweeps the tape in reverse. `loss` must
  /// be 1x1. May be called once per tape.
  void backward(Var loss) {
    Node& l = node_mut(loss);
    if (l.value.rows() != 1 || l.value.cols() != 1)
      throw std::invalid_argument("backward: loss must be a 1x1 node");
    if (swept_) throw std::logic_error("backward: tape already swept");
    swept_ = true;
    l.grad(0, 0) = 1.0;
    for (std::size_t k = nodes_.size(); k-- > 0;) {
      Node& nd = nodes_[k];
      if (nd.back) nd.back(*this, nd.grad);
    }
  }

  static double softplus_value(double x) {
    if (x > 30.0) return x;
    if (x < -30.0) return std::exp(x);
    return std::log1p(std::exp(x));
  }

  static double sigmoid_value(double x) {
    if (x >= 0.0) {
      const double e = std::exp(-x);
      return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
  }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&, const Matrix&)> back;
  };

  int next_id() const { return static_cast<int>(nodes_.size()); }

  Var push(Matrix value, std::function<void(Tape&, const Matrix&)> back, const char* op) {
    if (!value.all_finite())
      throw NonFiniteError(std::string("tape op '") + op + "' produced a non-finite entry");
    Node nd;
    nd.grad = Matrix(value.rows(), value.cols());
    nd.value = std::move(value);
    nd.back = std::move(back);
    nodes_.push_back(std::move(nd));
    return Var{static_cast<int>(nodes_.size() - 1)};
  }

  const Node& node(Var v) const {
    if (!v.valid() || static_cast<std::size_t>(v.id) >= nodes_.size())
      throw std::invalid_argument("Tape: invalid Var handle");
    return nodes_[static_cast<std::size_t>(v.id)];
  }

  Node& node_mut(Var v) { return const_cast<Node&>(node(v)); }

  Matrix& grad_of(Var v) { return node_mut(v).grad; }

  void accumulate(Var v, const Matrix& g) {
    Matrix& dst = grad_of(v);
    for (std::size_t i = 0; i < g.size(); ++i) dst.data()[i] += g.data()[i];
  }

  void accumulate_scaled(Var v, const Matrix& g, double s) {
    Matrix& dst = grad_of(v);
    for (std::size_t i = 0; i < g.size(); ++i) dst.data()[i] += s * g.data()[i];
  }

  void accumulate_product(Var v, const Matrix& g, const Matrix& factor) {
    Matrix& dst = grad_of(v);
    for (std::size_t i = 0; i < g.size(); ++i) dst.data()[i] += g.data()[i] * factor.data()[i];
  }

  std::vector<Node> nodes_;
  bool swept_ = false;
};

}  // namespace ucil
