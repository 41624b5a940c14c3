#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "foda/matrix.hpp"
#include "foda/params.hpp"

namespace foda::ad {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
};

/// Reverse-mode recorder. Every op stores its output value and, when any
/// input needs a gradient, a closure implementing its backward rule.
/// Nodes are replayed in reverse creation order by `backward`.
///
/// With `grad_enabled == false` the tape only evaluates, which is what the
/// decoders use at inference time.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::uint32_t self)>;

  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }

  Var constant(Matrix m);
  /// Refers to `m` without copying; `m` must outlive the tape.
  Var constant_ref(const Matrix& m);
  /// Leaf that receives a gradient (when gradients are enabled).
  Var variable(Matrix m);
  /// Leaf bound to a ParamStore entry, created once per name and reused.
  /// The store must outlive the tape and must not be modified meanwhile.
  Var param(const ParamStore& store, const std::string& name);

  const Matrix& value(Var v) const;
  /// Gradient accumulated for `v`; an empty matrix when none flowed.
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Seeds d(output)/d(output) = seed for a 1x1 output and propagates.
  void backward(Var output, double seed = 1.0);
  /// Seeds an arbitrary upstream gradient of output's shape.
  void backward(Var output, const Matrix& seed);

  /// Adds `scale` * gradient of every parameter leaf into `store` grads.
  void accumulate_param_grads(ParamStore& store, double scale = 1.0) const;
  /// (name, gradient) of every parameter leaf that received one.
  std::vector<std::pair<std::string, Matrix>> param_grads() const;

  // Op-authoring interface.
  Var record(Matrix value, bool requires_grad, BackwardFn fn);
  void accumulate(std::uint32_t id, const Matrix& g);
  /// Zero-initialised gradient buffer for `id`, allocated on first use.
  Matrix& grad_slot(std::uint32_t id);
  const Matrix& value_of(std::uint32_t id) const { return value(Var{nullptr, id}); }
  const Matrix& grad_of(std::uint32_t id) const { return nodes_[id].grad; }
  bool needs(std::uint32_t id) const { return nodes_[id].requires_grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix own;
    const Matrix* ref = nullptr;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  Var push(Node node);

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, std::uint32_t>> param_leaves_;
  std::unordered_map<std::string, std::uint32_t> param_index_;
};

enum class Activation { Identity, ReLU, Tanh, Sigmoid };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

// Differentiable ops. Shapes follow the plain kernels in matrix.hpp.
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var hadamard(Var a, Var b);
Var scale(Var a, double s);
/// Adds the 1 x c row `r` to every row of `a`.
Var add_row(Var a, Var r);
Var transpose(Var a);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
/// Rows of `table` selected by `ids` (embedding lookup).
Var gather_rows(Var table, std::span<const std::size_t> ids);
Var activate(Var a, Activation act);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// 1x1 node holding a(r, c).
Var pick(Var a, std::size_t r, std::size_t c);
/// 1x1 sum of all entries.
Var sum(Var a);
/// 1x1 sum of a .* w for a constant weight matrix w.
Var weighted_sum(Var a, const Matrix& w);
/// out(i, j) = -||a_i - b_j||^2 for rows a_i of a and b_j of b.
Var neg_sq_dist(Var a, Var b);
/// out(i, j) = cos(a_i, b_j); defined as 0 when either row is zero.
Var cosine_sim(Var a, Var b);

}  // namespace foda::ad
