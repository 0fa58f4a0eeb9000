// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#include "vqamix/graph.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <utility>

namespace vqamix {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MMap = Eigen::Map<RowMat>;
using CMap = Eigen::Map<const RowMat>;

CMap cmap(const Tensor& t, int r, int c) { return CMap(t.data(), r, c); }
MMap mmap(Tensor& t, int r, int c) { return MMap(t.data(), r, c); }

void check_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2)
    throw DimensionError(std::string(op) + ": expected a 2-d tensor, got " + t.shape_str());
}

Graph* common_graph(std::initializer_list<Var> vars, const char* op) {
  Graph* g = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw NumericError(std::string(op) + ": invalid operand");
    if (g == nullptr) g = v.graph();
    if (v.graph() != g) throw NumericError(std::string(op) + ": operands from different graphs");
  }
  return g;
}

// Rows/last-axis split for layernorm-style ops.
std::pair<int, int> flatten_last(const Tensor& t, const char* op) {
  if (t.ndim() < 1) throw DimensionError(std::string(op) + ": needs at least 1 dimension");
  int d = t.dim(t.ndim() - 1);
  int rows = 1;
  for (int i = 0; i + 1 < t.ndim(); ++i) rows *= t.dim(i);
  return {rows, d};
}

}  // namespace

const Tensor& Var::value() const {
  if (!valid()) throw NumericError("value() on an invalid Var");
  return g_->value(id_);
}

Var Graph::param(Parameter& p) {
  if (!grad_enabled_) return constant(p.value);
  auto it = leaf_ids_.find(&p);
  if (it != leaf_ids_.end()) return Var(this, it->second);
  Node n;
  n.value = p.value;
  n.leaf = &p;
  n.needs_grad = true;
  nodes_.push_back(std::move(n));
  int id = static_cast<int>(nodes_.size()) - 1;
  leaf_ids_.emplace(&p, id);
  return Var(this, id);
}

Var Graph::constant(Tensor t) {
  Node n;
  n.value = std::move(t);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Graph::make_node(Tensor value, std::vector<int> inputs, bool needs_grad, BackFn back) {
  Node n;
  n.value = std::move(value);
  n.inputs = std::move(inputs);
  n.needs_grad = needs_grad && grad_enabled_;
  if (n.needs_grad) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Tensor& Graph::grad_buf(int id) {
  Node& n = nodes_[static_cast<size_t>(id)];
  if (n.grad.shape() != n.value.shape()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

const Tensor* Graph::grad_of(Var v) const {
  if (!v.valid() || v.graph() != this) throw NumericError("grad_of: foreign Var");
  const Node& n = nodes_[static_cast<size_t>(v.id())];
  if (n.grad.shape() != n.value.shape()) return nullptr;
  return &n.grad;
}

void Graph::mark_output(Var root) {
  if (!root.valid() || root.graph() != this)
    throw NumericError("mark_output: Var does not belong to this graph");
  if (!value(root.id()).is_scalar())
    throw DimensionError("backward root must be a scalar, got " +
                         value(root.id()).shape_str());
  root_id_ = root.id();
  finalized_ = true;
}

void Graph::backward() {
  if (!finalized_) throw NumericError("backward: graph not finalized (no output designated)");
  if (backward_done_) throw NumericError("backward: already run on this graph; build a new graph");
  backward_done_ = true;
  grad_buf(root_id_)[0] = 1.0;
  for (int id = root_id_; id >= 0; --id) {
    Node& n = nodes_[static_cast<size_t>(id)];
    if (n.grad.shape() != n.value.shape()) continue;  // never reached
    if (n.leaf != nullptr) {
      if (!n.leaf->grad.same_shape(n.value))
        throw DimensionError("parameter '" + n.leaf->name + "' gradient shape mismatch");
      for (int i = 0; i < n.grad.size(); ++i) n.leaf->grad[i] += n.grad[i];
      n.leaf->grad_live = true;
    } else if (n.back) {
      n.back(*this, id);
    }
  }
}

// ---------------------------------------------------------------------------
// kernels
// ---------------------------------------------------------------------------

Var add(Var a, Var b) {
  Graph* g = common_graph({a, b}, "add");
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb))
    throw DimensionError("add: shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (int i = 0; i < out.size(); ++i) out[i] += tb[i];
  int ia = a.id(), ib = b.id();
  bool na = g->needs(ia), nb = g->needs(ib);
  return g->make_node(std::move(out), {ia, ib}, na || nb, [ia, ib, na, nb](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    if (na) {
      Tensor& da = gg.grad_buf(ia);
      for (int i = 0; i < go.size(); ++i) da[i] += go[i];
    }
    if (nb) {
      Tensor& db = gg.grad_buf(ib);
      for (int i = 0; i < go.size(); ++i) db[i] += go[i];
    }
  });
}

Var add_rowvec(Var m, Var row) {
  Graph* g = common_graph({m, row}, "add_rowvec");
  const Tensor& tm = m.value();
  const Tensor& tr = row.value();
  check_2d(tm, "add_rowvec");
  if (tr.ndim() != 1 || tr.dim(0) != tm.cols())
    throw DimensionError("add_rowvec: " + tm.shape_str() + " vs " + tr.shape_str());
  Tensor out = tm;
  int R = tm.rows(), C = tm.cols();
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) out.at(r, c) += tr[c];
  int im = m.id(), ir = row.id();
  bool nm = g->needs(im), nr = g->needs(ir);
  return g->make_node(std::move(out), {im, ir}, nm || nr,
                      [im, ir, nm, nr, R, C](Graph& gg, int self) {
                        const Tensor& go = gg.grad_buf(self);
                        if (nm) {
                          Tensor& dm = gg.grad_buf(im);
                          for (int i = 0; i < go.size(); ++i) dm[i] += go[i];
                        }
                        if (nr) {
                          Tensor& dr = gg.grad_buf(ir);
                          for (int r = 0; r < R; ++r)
                            for (int c = 0; c < C; ++c) dr[c] += go.at(r, c);
                        }
                      });
}

Var mul(Var a, Var b) {
  Graph* g = common_graph({a, b}, "mul");
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  if (!ta.same_shape(tb))
    throw DimensionError("mul: shape mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  Tensor out = ta;
  for (int i = 0; i < out.size(); ++i) out[i] *= tb[i];
  int ia = a.id(), ib = b.id();
  bool na = g->needs(ia), nb = g->needs(ib);
  return g->make_node(std::move(out), {ia, ib}, na || nb, [ia, ib, na, nb](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& va = gg.value(ia);
    const Tensor& vb = gg.value(ib);
    if (na) {
      Tensor& da = gg.grad_buf(ia);
      for (int i = 0; i < go.size(); ++i) da[i] += go[i] * vb[i];
    }
    if (nb) {
      Tensor& db = gg.grad_buf(ib);
      for (int i = 0; i < go.size(); ++i) db[i] += go[i] * va[i];
    }
  });
}

Var scale(Var a, double c) {
  Graph* g = common_graph({a}, "scale");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) out[i] *= c;
  int ia = a.id();
  bool na = g->needs(ia);
  return g->make_node(std::move(out), {ia}, na, [ia, c](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor& da = gg.grad_buf(ia);
    for (int i = 0; i < go.size(); ++i) da[i] += c * go[i];
  });
}

Var sum(Var a) {
  Graph* g = common_graph({a}, "sum");
  const Tensor& ta = a.value();
  double s = 0.0;
  for (int i = 0; i < ta.size(); ++i) s += ta[i];
  int ia = a.id();
  bool na = g->needs(ia);
  return g->make_node(Tensor::scalar(s), {ia}, na, [ia](Graph& gg, int self) {
    double go = gg.grad_buf(self)[0];
    Tensor& da = gg.grad_buf(ia);
    for (int i = 0; i < da.size(); ++i) da[i] += go;
  });
}

Var matmul(Var a, Var b) {
  Graph* g = common_graph({a, b}, "matmul");
  const Tensor& ta = a.value();
  const Tensor& tb = b.value();
  check_2d(ta, "matmul");
  check_2d(tb, "matmul");
  if (ta.cols() != tb.rows())
    throw DimensionError("matmul: inner dimensions disagree: " + ta.shape_str() + " vs " +
                         tb.shape_str());
  int m = ta.rows(), k = ta.cols(), n = tb.cols();
  Tensor out({m, n});
  mmap(out, m, n).noalias() = cmap(ta, m, k) * cmap(tb, k, n);
  int ia = a.id(), ib = b.id();
  bool na = g->needs(ia), nb = g->needs(ib);
  return g->make_node(std::move(out), {ia, ib}, na || nb,
                      [ia, ib, na, nb, m, k, n](Graph& gg, int self) {
                        const Tensor& go = gg.grad_buf(self);
                        CMap gmap = cmap(go, m, n);
                        if (na) {
                          MMap da = mmap(gg.grad_buf(ia), m, k);
                          da.noalias() += gmap * cmap(gg.value(ib), k, n).transpose();
                        }
                        if (nb) {
                          MMap db = mmap(gg.grad_buf(ib), k, n);
                          db.noalias() += cmap(gg.value(ia), m, k).transpose() * gmap;
                        }
                      });
}

Var transpose(Var a) {
  Graph* g = common_graph({a}, "transpose");
  const Tensor& ta = a.value();
  check_2d(ta, "transpose");
  int r = ta.rows(), c = ta.cols();
  Tensor out({c, r});
  mmap(out, c, r).noalias() = cmap(ta, r, c).transpose();
  int ia = a.id();
  bool na = g->needs(ia);
  return g->make_node(std::move(out), {ia}, na, [ia, r, c](Graph& gg, int self) {
    MMap da = mmap(gg.grad_buf(ia), r, c);
    da.noalias() += cmap(gg.grad_buf(self), c, r).transpose();
  });
}

Var reshape(Var a, std::vector<int> shape) {
  Graph* g = common_graph({a}, "reshape");
  const Tensor& ta = a.value();
  Tensor out = Tensor::from(std::move(shape), ta.vec());
  int ia = a.id();
  bool na = g->needs(ia);
  return g->make_node(std::move(out), {ia}, na, [ia](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor& da = gg.grad_buf(ia);
    for (int i = 0; i < go.size(); ++i) da[i] += go[i];
  });
}

namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

Var gelu(Var a) {
  Graph* g = common_graph({a}, "gelu");
  Tensor out = a.value();
  for (int i = 0; i < out.size(); ++i) {
    double x = out[i];
    out[i] = 0.5 * x * (1.0 + std::tanh(kGeluC * (x + kGeluA * x * x * x)));
  }
  int ia = a.id();
  bool na = g->needs(ia);
  return g->make_node(std::move(out), {ia}, na, [ia](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& x = gg.value(ia);
    Tensor& da = gg.grad_buf(ia);
    for (int i = 0; i < go.size(); ++i) {
      double xi = x[i];
      double u = kGeluC * (xi + kGeluA * xi * xi * xi);
      double t = std::tanh(u);
      double du = kGeluC * (1.0 + 3.0 * kGeluA * xi * xi);
      da[i] += go[i] * (0.5 * (1.0 + t) + 0.5 * xi * (1.0 - t * t) * du);
    }
  });
}

Var layernorm(Var x, Var gain, Var bias, double epsilon) {
  Graph* g = common_graph({x, gain, bias}, "layernorm");
  if (epsilon <= 0.0) throw NumericError("layernorm: epsilon must be positive");
  const Tensor& tx = x.value();
  auto [rows, d] = flatten_last(tx, "layernorm");
  if (d == 0) throw DimensionError("layernorm: last axis has zero extent");
  const Tensor& tg = gain.value();
  const Tensor& tb = bias.value();
  if (tg.size() != d || tb.size() != d)
    throw DimensionError("layernorm: gain/bias must have length " + std::to_string(d));

  auto xhat = std::make_shared<Tensor>(Tensor::zeros({rows, d}));
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(rows));
  Tensor out(tx.shape());
  for (int r = 0; r < rows; ++r) {
    const double* xr = tx.data() + static_cast<size_t>(r) * d;
    double mean = 0.0;
    for (int j = 0; j < d; ++j) mean += xr[j];
    mean /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
      double c = xr[j] - mean;
      var += c * c;
    }
    var /= d;
    double is = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[static_cast<size_t>(r)] = is;
    double* hr = xhat->data() + static_cast<size_t>(r) * d;
    double* orow = out.data() + static_cast<size_t>(r) * d;
    for (int j = 0; j < d; ++j) {
      hr[j] = (xr[j] - mean) * is;
      orow[j] = tg[j] * hr[j] + tb[j];
    }
  }
  int ix = x.id(), ig = gain.id(), ib = bias.id();
  bool nx = g->needs(ix), ng = g->needs(ig), nb = g->needs(ib);
  return g->make_node(
      std::move(out), {ix, ig, ib}, nx || ng || nb,
      [=](Graph& gg, int self) {
        const Tensor& go = gg.grad_buf(self);
        const Tensor& tgain = gg.value(ig);
        for (int r = 0; r < rows; ++r) {
          const double* gr = go.data() + static_cast<size_t>(r) * d;
          const double* hr = xhat->data() + static_cast<size_t>(r) * d;
          if (ng) {
            Tensor& dg = gg.grad_buf(ig);
            for (int j = 0; j < d; ++j) dg[j] += gr[j] * hr[j];
          }
          if (nb) {
            Tensor& db = gg.grad_buf(ib);
            for (int j = 0; j < d; ++j) db[j] += gr[j];
          }
          if (nx) {
            Tensor& dx = gg.grad_buf(ix);
            double* dxr = dx.data() + static_cast<size_t>(r) * d;
            double m1 = 0.0, m2 = 0.0;
            for (int j = 0; j < d; ++j) {
              double dh = gr[j] * tgain[j];
              m1 += dh;
              m2 += dh * hr[j];
            }
            m1 /= d;
            m2 /= d;
            double is = (*inv_std)[static_cast<size_t>(r)];
            for (int j = 0; j < d; ++j) {
              double dh = gr[j] * tgain[j];
              dxr[j] += is * (dh - m1 - hr[j] * m2);
            }
          }
        }
      });
}

Var softmax_rows(Var x) {
  Graph* g = common_graph({x}, "softmax_rows");
  const Tensor& tx = x.value();
  check_2d(tx, "softmax_rows");
  int R = tx.rows(), C = tx.cols();
  if (C == 0) throw DimensionError("softmax_rows: zero-width rows");
  Tensor out({R, C});
  for (int r = 0; r < R; ++r) {
    const double* xr = tx.data() + static_cast<size_t>(r) * C;
    double* orow = out.data() + static_cast<size_t>(r) * C;
    double m = xr[0];
    for (int j = 1; j < C; ++j) m = std::max(m, xr[j]);
    double z = 0.0;
    for (int j = 0; j < C; ++j) {
      orow[j] = std::exp(xr[j] - m);
      z += orow[j];
    }
    for (int j = 0; j < C; ++j) orow[j] /= z;
  }
  int ix = x.id();
  bool nx = g->needs(ix);
  return g->make_node(std::move(out), {ix}, nx, [ix, R, C](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    const Tensor& y = gg.value(self);
    Tensor& dx = gg.grad_buf(ix);
    for (int r = 0; r < R; ++r) {
      const double* gr = go.data() + static_cast<size_t>(r) * C;
      const double* yr = y.data() + static_cast<size_t>(r) * C;
      double* dxr = dx.data() + static_cast<size_t>(r) * C;
      double dot = 0.0;
      for (int j = 0; j < C; ++j) dot += gr[j] * yr[j];
      for (int j = 0; j < C; ++j) dxr[j] += yr[j] * (gr[j] - dot);
    }
  });
}

Var slice_cols(Var x, int start, int len) {
  Graph* g = common_graph({x}, "slice_cols");
  const Tensor& tx = x.value();
  check_2d(tx, "slice_cols");
  int R = tx.rows(), C = tx.cols();
  if (start < 0 || len < 0 || start + len > C)
    throw DimensionError("slice_cols: [" + std::to_string(start) + ", " +
                         std::to_string(start + len) + ") out of " + tx.shape_str());
  Tensor out({R, len});
  for (int r = 0; r < R; ++r)
    for (int j = 0; j < len; ++j) out.at(r, j) = tx.at(r, start + j);
  int ix = x.id();
  bool nx = g->needs(ix);
  return g->make_node(std::move(out), {ix}, nx, [ix, R, C, start, len](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor& dx = gg.grad_buf(ix);
    for (int r = 0; r < R; ++r)
      for (int j = 0; j < len; ++j) dx.data()[static_cast<size_t>(r) * C + start + j] +=
          go.data()[static_cast<size_t>(r) * len + j];
  });
}

namespace {
Var concat_impl(const std::vector<Var>& parts, bool by_rows) {
  const char* op = by_rows ? "concat_rows" : "concat_cols";
  if (parts.empty()) throw DimensionError(std::string(op) + ": no parts");
  Graph* g = parts[0].graph();
  std::vector<int> ids;
  bool needs = false;
  int other = -1, total = 0;
  for (const Var& p : parts) {
    common_graph({parts[0], p}, op);
    const Tensor& t = p.value();
    check_2d(t, op);
    int fixed = by_rows ? t.cols() : t.rows();
    int grow = by_rows ? t.rows() : t.cols();
    if (other == -1)
      other = fixed;
    else if (fixed != other)
      throw DimensionError(std::string(op) + ": incompatible part " + t.shape_str());
    total += grow;
    ids.push_back(p.id());
    needs = needs || g->needs(p.id());
  }
  int R = by_rows ? total : other;
  int C = by_rows ? other : total;
  Tensor out({R, C});
  int off = 0;
  for (const Var& p : parts) {
    const Tensor& t = p.value();
    if (by_rows) {
      std::copy(t.data(), t.data() + t.size(), out.data() + static_cast<size_t>(off) * C);
      off += t.rows();
    } else {
      for (int r = 0; r < R; ++r)
        std::copy(t.data() + static_cast<size_t>(r) * t.cols(),
                  t.data() + static_cast<size_t>(r) * t.cols() + t.cols(),
                  out.data() + static_cast<size_t>(r) * C + off);
      off += t.cols();
    }
  }
  std::vector<int> sizes;
  for (const Var& p : parts) sizes.push_back(by_rows ? p.value().rows() : p.value().cols());
  return g->make_node(std::move(out), ids, needs,
                      [ids, sizes, by_rows, R, C](Graph& gg, int self) {
                        const Tensor& go = gg.grad_buf(self);
                        int off = 0;
                        for (size_t k = 0; k < ids.size(); ++k) {
                          int sz = sizes[k];
                          if (gg.needs(ids[k])) {
                            Tensor& dp = gg.grad_buf(ids[k]);
                            if (by_rows) {
                              for (int i = 0; i < sz * C; ++i)
                                dp[i] += go.data()[static_cast<size_t>(off) * C + i];
                            } else {
                              for (int r = 0; r < R; ++r)
                                for (int j = 0; j < sz; ++j)
                                  dp.data()[static_cast<size_t>(r) * sz + j] +=
                                      go.data()[static_cast<size_t>(r) * C + off + j];
                            }
                          }
                          off += sz;
                        }
                      });
}
}  // namespace

Var concat_cols(const std::vector<Var>& parts) { return concat_impl(parts, false); }
Var concat_rows(const std::vector<Var>& parts) { return concat_impl(parts, true); }

Var embed_rows(Var table, const std::vector<int>& ids) {
  Graph* g = common_graph({table}, "embed_rows");
  const Tensor& tt = table.value();
  check_2d(tt, "embed_rows");
  int V = tt.rows(), d = tt.cols();
  for (int id : ids)
    if (id < 0 || id >= V)
      throw DimensionError("embed_rows: id " + std::to_string(id) + " out of table " +
                           tt.shape_str());
  int n = static_cast<int>(ids.size());
  Tensor out({n, d});
  for (int i = 0; i < n; ++i)
    std::copy(tt.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d,
              tt.data() + static_cast<size_t>(ids[static_cast<size_t>(i)]) * d + d,
              out.data() + static_cast<size_t>(i) * d);
  int it = table.id();
  bool nt = g->needs(it);
  auto idv = std::make_shared<std::vector<int>>(ids);
  return g->make_node(std::move(out), {it}, nt, [it, idv, d](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor& dt = gg.grad_buf(it);
    for (size_t i = 0; i < idv->size(); ++i) {
      double* drow = dt.data() + static_cast<size_t>((*idv)[i]) * d;
      const double* grow = go.data() + i * static_cast<size_t>(d);
      for (int j = 0; j < d; ++j) drow[j] += grow[j];
    }
  });
}

Var rel_bias(Var table, const IntMat& buckets, int head) {
  Graph* g = common_graph({table}, "rel_bias");
  const Tensor& tt = table.value();
  check_2d(tt, "rel_bias");
  int B = tt.rows(), H = tt.cols();
  if (head < 0 || head >= H) throw DimensionError("rel_bias: head out of range");
  Tensor out({buckets.rows, buckets.cols});
  for (int r = 0; r < buckets.rows; ++r)
    for (int c = 0; c < buckets.cols; ++c) {
      int32_t b = buckets.at(r, c);
      if (b < 0 || b >= B)
        throw DimensionError("rel_bias: bucket " + std::to_string(b) + " out of table " +
                             tt.shape_str());
      out.at(r, c) = tt.at(b, head);
    }
  int it = table.id();
  bool nt = g->needs(it);
  auto bk = std::make_shared<IntMat>(buckets);
  return g->make_node(std::move(out), {it}, nt, [it, bk, head](Graph& gg, int self) {
    const Tensor& go = gg.grad_buf(self);
    Tensor& dt = gg.grad_buf(it);
    for (int r = 0; r < bk->rows; ++r)
      for (int c = 0; c < bk->cols; ++c) dt.at(bk->at(r, c), head) += go.at(r, c);
  });
}

Var conv2d(Var input, Var kernel, Var bias, int stride, int pad) {
  Graph* g = common_graph({input, kernel, bias}, "conv2d");
  const Tensor& tx = input.value();
  const Tensor& tk = kernel.value();
  const Tensor& tb = bias.value();
  if (tx.ndim() != 3) throw DimensionError("conv2d: input must be [HxWxC], got " + tx.shape_str());
  if (tk.ndim() != 4)
    throw DimensionError("conv2d: kernel must be [khxkwxCinxCout], got " + tk.shape_str());
  int h = tx.dim(0), w = tx.dim(1), cin = tx.dim(2);
  int kh = tk.dim(0), kw = tk.dim(1), kcin = tk.dim(2), cout = tk.dim(3);
  if (kcin != cin)
    throw DimensionError("conv2d: channel mismatch: " + tx.shape_str() + " vs " + tk.shape_str());
  if (tb.size() != cout) throw DimensionError("conv2d: bias length must equal Cout");
  if (stride < 1 || pad < 0 || h + 2 * pad < kh || w + 2 * pad < kw)
    throw DimensionError("conv2d: kernel does not fit input");
  int ho = (h + 2 * pad - kh) / stride + 1;
  int wo = (w + 2 * pad - kw) / stride + 1;
  int patch = kh * kw * cin;

  auto col = std::make_shared<Tensor>(Tensor::zeros({ho * wo, patch}));
  for (int oy = 0; oy < ho; ++oy)
    for (int ox = 0; ox < wo; ++ox) {
      double* crow = col->data() + static_cast<size_t>(oy * wo + ox) * patch;
      for (int dy = 0; dy < kh; ++dy) {
        int iy = oy * stride + dy - pad;
        if (iy < 0 || iy >= h) continue;
        for (int dx = 0; dx < kw; ++dx) {
          int ix = ox * stride + dx - pad;
          if (ix < 0 || ix >= w) continue;
          const double* src = tx.data() + (static_cast<size_t>(iy) * w + ix) * cin;
          std::copy(src, src + cin, crow + (static_cast<size_t>(dy) * kw + dx) * cin);
        }
      }
    }

  Tensor out({ho, wo, cout});
  MMap o2d(out.data(), ho * wo, cout);
  o2d.noalias() = cmap(*col, ho * wo, patch) * cmap(tk, patch, cout);
  for (int r = 0; r < ho * wo; ++r)
    for (int c = 0; c < cout; ++c) out[r * cout + c] += tb[c];

  int ix = input.id(), ik = kernel.id(), ib = bias.id();
  bool nx = g->needs(ix), nk = g->needs(ik), nb = g->needs(ib);
  return g->make_node(
      std::move(out), {ix, ik, ib}, nx || nk || nb,
      [=](Graph& gg, int self) {
        const Tensor& go = gg.grad_buf(self);
        CMap g2d(go.data(), ho * wo, cout);
        if (nk) {
          MMap dk = mmap(gg.grad_buf(ik), patch, cout);
          dk.noalias() += cmap(*col, ho * wo, patch).transpose() * g2d;
        }
        if (nb) {
          Tensor& db = gg.grad_buf(ib);
          for (int r = 0; r < ho * wo; ++r)
            for (int c = 0; c < cout; ++c) db[c] += go[r * cout + c];
        }
        if (nx) {
          RowMat dcol = g2d * cmap(gg.value(ik), patch, cout).transpose();
          Tensor& dx = gg.grad_buf(ix);
          for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
              const double* crow = dcol.data() + static_cast<size_t>(oy * wo + ox) * patch;
              for (int dy = 0; dy < kh; ++dy) {
                int iy = oy * stride + dy - pad;
                if (iy < 0 || iy >= h) continue;
                for (int dxp = 0; dxp < kw; ++dxp) {
                  int ixp = ox * stride + dxp - pad;
                  if (ixp < 0 || ixp >= w) continue;
                  double* dst = dx.data() + (static_cast<size_t>(iy) * w + ixp) * cin;
                  const double* src = crow + (static_cast<size_t>(dy) * kw + dxp) * cin;
                  for (int c = 0; c < cin; ++c) dst[c] += src[c];
                }
              }
            }
        }
      });
}

Var softmax_cross_entropy(Var logits, const std::vector<int>& targets, int ignore_id) {
  Graph* g = common_graph({logits}, "softmax_cross_entropy");
  const Tensor& tl = logits.value();
  check_2d(tl, "softmax_cross_entropy");
  int T = tl.rows(), V = tl.cols();
  if (static_cast<int>(targets.size()) != T)
    throw DimensionError("softmax_cross_entropy: " + std::to_string(targets.size()) +
                         " targets for " + tl.shape_str() + " logits");
  for (int t : targets)
    if (t != ignore_id && (t < 0 || t >= V))
      throw DimensionError("softmax_cross_entropy: target " + std::to_string(t) +
                           " outside vocabulary of " + std::to_string(V));

  auto probs = std::make_shared<Tensor>(Tensor::zeros({T, V}));
  double total = 0.0;
  int cnt = 0;
  for (int r = 0; r < T; ++r) {
    const double* lr = tl.data() + static_cast<size_t>(r) * V;
    double* pr = probs->data() + static_cast<size_t>(r) * V;
    double m = lr[0];
    for (int j = 1; j < V; ++j) m = std::max(m, lr[j]);
    double z = 0.0;
    for (int j = 0; j < V; ++j) {
      pr[j] = std::exp(lr[j] - m);
      z += pr[j];
    }
    for (int j = 0; j < V; ++j) pr[j] /= z;
    int t = targets[static_cast<size_t>(r)];
    if (t == ignore_id) continue;
    total += std::log(z) + m - lr[t];
    ++cnt;
  }
  if (cnt == 0)
    throw NumericError("softmax_cross_entropy: every position carries the ignore id; "
                       "loss is undefined on an empty target set");
  double loss = total / cnt;
  if (loss < 0.0 && loss > -1e-12) loss = 0.0;  // absorb rounding, never NaN

  int il = logits.id();
  bool nl = g->needs(il);
  auto tgt = std::make_shared<std::vector<int>>(targets);
  return g->make_node(Tensor::scalar(loss), {il}, nl,
                      [il, tgt, probs, ignore_id, T, V, cnt](Graph& gg, int self) {
                        double go = gg.grad_buf(self)[0] / cnt;
                        Tensor& dl = gg.grad_buf(il);
                        for (int r = 0; r < T; ++r) {
                          int t = (*tgt)[static_cast<size_t>(r)];
                          if (t == ignore_id) continue;
                          const double* pr = probs->data() + static_cast<size_t>(r) * V;
                          double* dr = dl.data() + static_cast<size_t>(r) * V;
                          for (int j = 0; j < V; ++j) dr[j] += go * pr[j];
                          dr[t] -= go;
                        }
                      });
}

}  // namespace vqamix
