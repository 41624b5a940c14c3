#include "foda/tape.hpp"

#include <algorithm>
#include <cmath>

#include "foda/error.hpp"

namespace foda::ad {

const Matrix& Var::value() const { return tape->value(*this); }

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Matrix m) {
  Node n;
  n.own = std::move(m);
  return push(std::move(n));
}

Var Tape::constant_ref(const Matrix& m) {
  Node n;
  n.ref = &m;
  return push(std::move(n));
}

Var Tape::variable(Matrix m) {
  Node n;
  n.own = std::move(m);
  n.requires_grad = grad_enabled_;
  return push(std::move(n));
}

Var Tape::param(const ParamStore& store, const std::string& name) {
  if (auto it = param_index_.find(name); it != param_index_.end()) return Var{this, it->second};
  Node n;
  n.ref = &store.at(name).value;
  n.requires_grad = grad_enabled_;
  Var v = push(std::move(n));
  param_index_.emplace(name, v.id);
  param_leaves_.emplace_back(name, v.id);
  return v;
}

const Matrix& Tape::value(Var v) const {
  const Node& n = nodes_[v.id];
  return n.ref != nullptr ? *n.ref : n.own;
}

Var Tape::record(Matrix value, bool requires_grad, BackwardFn fn) {
  ensure_finite(value, "tape op");
  Node n;
  n.own = std::move(value);
  n.requires_grad = requires_grad && grad_enabled_;
  if (n.requires_grad) n.backward = std::move(fn);
  return push(std::move(n));
}

Matrix& Tape::grad_slot(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) {
    const Matrix& v = value_of(id);
    n.grad = Matrix(v.rows(), v.cols());
  }
  return n.grad;
}

void Tape::accumulate(std::uint32_t id, const Matrix& g) {
  if (!nodes_[id].requires_grad) return;
  Matrix& slot = grad_slot(id);
  add_into(slot, g);
}

void Tape::backward(Var output, double seed) {
  const Matrix& v = value(output);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("Tape::backward: scalar seed needs a 1x1 output, got " + v.shape_string());
  }
  backward(output, Matrix(1, 1, seed));
}

void Tape::backward(Var output, const Matrix& seed) {
  if (!grad_enabled_) throw CheckError("Tape::backward on a tape without gradients");
  if (!value(output).same_shape(seed)) {
    throw ShapeError("Tape::backward: seed " + seed.shape_string() + " vs output " +
                     value(output).shape_string());
  }
  accumulate(output.id, seed);
  for (std::uint32_t id = output.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }
}

void Tape::accumulate_param_grads(ParamStore& store, double scale_by) const {
  for (const auto& [name, id] : param_leaves_) {
    const Matrix& g = nodes_[id].grad;
    if (g.empty()) continue;
    Matrix& dst = store.at(name).grad;
    if (!dst.same_shape(g)) throw ShapeError("accumulate_param_grads: shape mismatch for " + name);
    auto dd = dst.data();
    auto gd = g.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += scale_by * gd[i];
  }
}

std::vector<std::pair<std::string, Matrix>> Tape::param_grads() const {
  std::vector<std::pair<std::string, Matrix>> out;
  for (const auto& [name, id] : param_leaves_)
    if (!nodes_[id].grad.empty()) out.emplace_back(name, nodes_[id].grad);
  return out;
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::Identity: return "identity";
    case Activation::ReLU: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::Sigmoid: return "sigmoid";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::Identity;
  if (s == "relu") return Activation::ReLU;
  if (s == "tanh") return Activation::Tanh;
  if (s == "sigmoid") return Activation::Sigmoid;
  throw ConfigError("unknown activation '" + s + "'");
}

namespace {

bool any_requires(Tape& t, std::initializer_list<Var> vs) {
  for (Var v : vs)
    if (t.requires_grad(v)) return true;
  return false;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw CheckError("ad: operands live on different tapes");
  return *a.tape;
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(foda::matmul(a.value(), b.value()), any_requires(t, {a, b}),
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    if (tp.needs(ia)) tp.accumulate(ia, matmul_nt(g, tp.value_of(ib)));
                    if (tp.needs(ib)) tp.accumulate(ib, matmul_tn(tp.value_of(ia), g));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(foda::matmul_nt(a.value(), b.value()), any_requires(t, {a, b}),
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    if (tp.needs(ia)) tp.accumulate(ia, foda::matmul(g, tp.value_of(ib)));
                    if (tp.needs(ib)) tp.accumulate(ib, matmul_tn(g, tp.value_of(ia)));
                  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(foda::add(a.value(), b.value()), any_requires(t, {a, b}),
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    tp.accumulate(ia, g);
                    tp.accumulate(ib, g);
                  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(foda::sub(a.value(), b.value()), any_requires(t, {a, b}),
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    tp.accumulate(ia, g);
                    if (tp.needs(ib)) tp.accumulate(ib, foda::scale(g, -1.0));
                  });
}

Var hadamard(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(foda::hadamard(a.value(), b.value()), any_requires(t, {a, b}),
                  [ia, ib](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    if (tp.needs(ia)) tp.accumulate(ia, foda::hadamard(g, tp.value_of(ib)));
                    if (tp.needs(ib)) tp.accumulate(ib, foda::hadamard(g, tp.value_of(ia)));
                  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape;
  const std::uint32_t ia = a.id;
  return t.record(foda::scale(a.value(), s), t.requires_grad(a),
                  [ia, s](Tape& tp, std::uint32_t self) {
                    tp.accumulate(ia, foda::scale(tp.grad_of(self), s));
                  });
}

Var add_row(Var a, Var r) {
  Tape& t = tape_of(a, r);
  const Matrix& av = a.value();
  const Matrix& rv = r.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw ShapeError("add_row: " + av.shape_string() + " + row " + rv.shape_string());
  }
  Matrix out = av;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += rv(0, j);
  }
  const std::uint32_t ia = a.id, ir = r.id;
  return t.record(std::move(out), any_requires(t, {a, r}), [ia, ir](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad_of(self);
    tp.accumulate(ia, g);
    if (tp.needs(ir)) {
      Matrix gr(1, g.cols());
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) gr(0, j) += g(i, j);
      tp.accumulate(ir, gr);
    }
  });
}

Var transpose(Var a) {
  Tape& t = *a.tape;
  const std::uint32_t ia = a.id;
  return t.record(foda::transpose(a.value()), t.requires_grad(a),
                  [ia](Tape& tp, std::uint32_t self) {
                    tp.accumulate(ia, foda::transpose(tp.grad_of(self)));
                  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  Tape& t = *parts.front().tape;
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  bool req = false;
  std::vector<std::uint32_t> ids;
  for (Var p : parts) {
    if (p.tape != &t) throw CheckError("ad: operands live on different tapes");
    if (p.rows() != rows) throw ShapeError("concat_cols: row mismatch " + p.value().shape_string());
    cols += p.cols();
    req = req || t.requires_grad(p);
    ids.push_back(p.id);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
    off += v.cols();
  }
  std::vector<std::size_t> widths;
  for (Var p : parts) widths.push_back(p.cols());
  return t.record(std::move(out), req, [ids, widths](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad_of(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs(ids[k])) tp.accumulate(ids[k], foda::slice_cols(g, o, widths[k]));
      o += widths[k];
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = *parts.front().tape;
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  bool req = false;
  std::vector<std::uint32_t> ids;
  for (Var p : parts) {
    if (p.tape != &t) throw CheckError("ad: operands live on different tapes");
    if (p.cols() != cols) throw ShapeError("concat_rows: column mismatch " + p.value().shape_string());
    rows += p.rows();
    req = req || t.requires_grad(p);
    ids.push_back(p.id);
  }
  std::vector<double> data;
  data.reserve(rows * cols);
  for (Var p : parts) data.insert(data.end(), p.value().data().begin(), p.value().data().end());
  std::vector<std::size_t> heights;
  for (Var p : parts) heights.push_back(p.rows());
  return t.record(Matrix(rows, cols, std::move(data)), req, [ids, heights](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad_of(self);
    std::size_t r0 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.needs(ids[k])) {
        std::vector<double> part(g.data().begin() + r0 * g.cols(),
                                 g.data().begin() + (r0 + heights[k]) * g.cols());
        tp.accumulate(ids[k], Matrix(heights[k], g.cols(), std::move(part)));
      }
      r0 += heights[k];
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape;
  const std::uint32_t ia = a.id;
  return t.record(foda::slice_cols(a.value(), begin, count), t.requires_grad(a),
                  [ia, begin](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    Matrix& dst = tp.grad_slot(ia);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) dst(i, begin + j) += g(i, j);
                  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  Tape& t = *a.tape;
  const Matrix& v = a.value();
  if (begin + count > v.rows()) throw ShapeError("slice_rows: out of range for " + v.shape_string());
  std::vector<double> data(v.data().begin() + begin * v.cols(),
                           v.data().begin() + (begin + count) * v.cols());
  const std::uint32_t ia = a.id;
  return t.record(Matrix(count, v.cols(), std::move(data)), t.requires_grad(a),
                  [ia, begin](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    Matrix& dst = tp.grad_slot(ia);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) dst(begin + i, j) += g(i, j);
                  });
}

Var gather_rows(Var table, std::span<const std::size_t> ids) {
  Tape& t = *table.tape;
  const Matrix& v = table.value();
  Matrix out(ids.size(), v.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= v.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(v.row(ids[i]).begin(), v.row(ids[i]).end(), out.row(i).begin());
  }
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  const std::uint32_t it = table.id;
  return t.record(std::move(out), t.requires_grad(table),
                  [it, idx = std::move(idx)](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    Matrix& dst = tp.grad_slot(it);
                    for (std::size_t i = 0; i < idx.size(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) dst(idx[i], j) += g(i, j);
                  });
}

namespace {

// Elementwise unary op whose derivative is expressed through the output y.
template <class F, class DF>
Var unary_by_output(Var a, F f, DF dfdy) {
  Tape& t = *a.tape;
  Matrix out = a.value();
  for (double& x : out.data()) x = f(x);
  const std::uint32_t ia = a.id;
  return t.record(std::move(out), t.requires_grad(a), [ia, dfdy](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& y = tp.value_of(self);
    Matrix& dst = tp.grad_slot(ia);
    auto dd = dst.data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += g.data()[i] * dfdy(y.data()[i]);
  });
}

}  // namespace

Var sigmoid(Var a) {
  return unary_by_output(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary_by_output(
      a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary_by_output(
      a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double y) { return y > 0.0 ? 1.0 : 0.0; });
}

Var activate(Var a, Activation act) {
  switch (act) {
    case Activation::Identity: return a;
    case Activation::ReLU: return relu(a);
    case Activation::Tanh: return tanh(a);
    case Activation::Sigmoid: return sigmoid(a);
  }
  return a;
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape;
  const std::uint32_t ia = a.id;
  return t.record(foda::softmax_rows(a.value()), t.requires_grad(a),
                  [ia](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    const Matrix& y = tp.value_of(self);
                    Matrix& dst = tp.grad_slot(ia);
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      double dot = 0.0;
                      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
                      for (std::size_t j = 0; j < y.cols(); ++j) dst(i, j) += y(i, j) * (g(i, j) - dot);
                    }
                  });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape;
  const std::uint32_t ia = a.id;
  return t.record(foda::log_softmax_rows(a.value()), t.requires_grad(a),
                  [ia](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    const Matrix& y = tp.value_of(self);
                    Matrix& dst = tp.grad_slot(ia);
                    for (std::size_t i = 0; i < y.rows(); ++i) {
                      double gs = 0.0;
                      for (std::size_t j = 0; j < y.cols(); ++j) gs += g(i, j);
                      for (std::size_t j = 0; j < y.cols(); ++j)
                        dst(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
                    }
                  });
}

Var pick(Var a, std::size_t r, std::size_t c) {
  Tape& t = *a.tape;
  const Matrix& v = a.value();
  if (r >= v.rows() || c >= v.cols()) throw ShapeError("pick: index out of range for " + v.shape_string());
  const std::uint32_t ia = a.id;
  return t.record(Matrix(1, 1, v(r, c)), t.requires_grad(a), [ia, r, c](Tape& tp, std::uint32_t self) {
    tp.grad_slot(ia)(r, c) += tp.grad_of(self)(0, 0);
  });
}

Var sum(Var a) {
  Tape& t = *a.tape;
  double s = 0.0;
  for (double x : a.value().data()) s += x;
  const std::uint32_t ia = a.id;
  return t.record(Matrix(1, 1, s), t.requires_grad(a), [ia](Tape& tp, std::uint32_t self) {
    const double g = tp.grad_of(self)(0, 0);
    for (double& x : tp.grad_slot(ia).data()) x += g;
  });
}

Var weighted_sum(Var a, const Matrix& w) {
  Tape& t = *a.tape;
  if (!a.value().same_shape(w)) throw ShapeError("weighted_sum: weights " + w.shape_string());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += a.value().data()[i] * w.data()[i];
  const std::uint32_t ia = a.id;
  return t.record(Matrix(1, 1, s), t.requires_grad(a), [ia, w](Tape& tp, std::uint32_t self) {
    const double g = tp.grad_of(self)(0, 0);
    auto dd = tp.grad_slot(ia).data();
    for (std::size_t i = 0; i < dd.size(); ++i) dd[i] += g * w.data()[i];
  });
}

Var neg_sq_dist(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) throw ShapeError("neg_sq_dist: " + av.shape_string() + " vs " + bv.shape_string());
  Matrix out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < bv.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < av.cols(); ++k) {
        const double d = av(i, k) - bv(j, k);
        s += d * d;
      }
      out(i, j) = -s;
    }
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia, ib](Tape& tp, std::uint32_t self) {
    const Matrix& g = tp.grad_of(self);
    const Matrix& x = tp.value_of(ia);
    const Matrix& y = tp.value_of(ib);
    const bool ra = tp.needs(ia), rb = tp.needs(ib);
    Matrix ga(x.rows(), x.cols());
    Matrix gb(y.rows(), y.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
      for (std::size_t j = 0; j < y.rows(); ++j) {
        const double gij = g(i, j);
        for (std::size_t k = 0; k < x.cols(); ++k) {
          const double d = x(i, k) - y(j, k);
          ga(i, k) -= 2.0 * gij * d;
          gb(j, k) += 2.0 * gij * d;
        }
      }
    if (ra) tp.accumulate(ia, ga);
    if (rb) tp.accumulate(ib, gb);
  });
}

Var cosine_sim(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  if (av.cols() != bv.cols()) throw ShapeError("cosine_sim: " + av.shape_string() + " vs " + bv.shape_string());
  auto norms = [](const Matrix& m) {
    std::vector<double> n(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      double s = 0.0;
      for (double x : m.row(i)) s += x * x;
      n[i] = std::sqrt(s);
    }
    return n;
  };
  const auto na = norms(av);
  const auto nb = norms(bv);
  Matrix dots = foda::matmul_nt(av, bv);
  Matrix out(av.rows(), bv.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < bv.rows(); ++j)
      out(i, j) = (na[i] == 0.0 || nb[j] == 0.0) ? 0.0 : dots(i, j) / (na[i] * nb[j]);
  const std::uint32_t ia = a.id, ib = b.id;
  return t.record(std::move(out), any_requires(t, {a, b}),
                  [ia, ib, na, nb](Tape& tp, std::uint32_t self) {
                    const Matrix& g = tp.grad_of(self);
                    const Matrix& c = tp.value_of(self);
                    const Matrix& x = tp.value_of(ia);
                    const Matrix& y = tp.value_of(ib);
                    Matrix ga(x.rows(), x.cols());
                    Matrix gb(y.rows(), y.cols());
                    for (std::size_t i = 0; i < x.rows(); ++i)
                      for (std::size_t j = 0; j < y.rows(); ++j) {
                        if (na[i] == 0.0 || nb[j] == 0.0) continue;
                        const double gij = g(i, j);
                        const double inv = 1.0 / (na[i] * nb[j]);
                        const double ca = c(i, j) / (na[i] * na[i]);
                        const double cb = c(i, j) / (nb[j] * nb[j]);
                        for (std::size_t k = 0; k < x.cols(); ++k) {
                          ga(i, k) += gij * (y(j, k) * inv - ca * x(i, k));
                          gb(j, k) += gij * (x(i, k) * inv - cb * y(j, k));
                        }
                      }
                    if (tp.needs(ia)) tp.accumulate(ia, ga);
                    if (tp.needs(ib)) tp.accumulate(ib, gb);
                  });
}

}  // namespace foda::ad
