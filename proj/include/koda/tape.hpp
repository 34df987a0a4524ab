#pragma once

#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "koda/array.hpp"

namespace koda {

class Tape;

// Handle to a value recorded on a tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Receives per-parent gradient contributions from a backward rule.
class GradSink {
 public:
  virtual void add(int parent_index, Var contribution) = 0;
  virtual ~GradSink() = default;
};

// A backward rule rebuilds the local vector-Jacobian product out of tape ops,
// so gradients are themselves differentiable values on the same tape.
using BackwardRule =
    std::function<void(Tape&, const std::vector<Var>& inputs, Var output, Var gout, GradSink&)>;

// Record of primitive ops in topological order. One tape is owned by one
// execution context for the duration of a step and discarded afterwards.
class Tape {
 public:
  Var leaf(Array value, bool trainable = false);
  Var constant(Array value) { return leaf(std::move(value), false); }

  // Generic node constructor; all primitives funnel through here. Checks the
  // result for non-finite values and rejects with the op name.
  Var make_node(std::string op, Array value, std::vector<Var> inputs, BackwardRule backward);

  // Returns by value: Array is a cheap shared handle, and node storage may
  // grow while a caller is still working with the result.
  Array val(Var v) const;
  Array val(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(Var v) const;
  const std::string& op_name(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // Symbolic reverse pass: gradients of `output` (seeded with `seed`) with
  // respect to each Var in `wrt`. Unreachable entries come back as zero
  // arrays of the target shape. The returned Vars live on this tape, so they
  // can participate in further ops (and be differentiated again).
  std::vector<Var> grad_vars(Var output, Var seed, const std::vector<Var>& wrt);

  // Gradient of a scalar loss for every trainable leaf. Rejects non-scalar
  // losses and losses with no trainable ancestry.
  std::unordered_map<int, Array> backward(Var loss);

  std::vector<int> trainable_leaves() const;

 private:
  struct Node {
    std::string op;
    Array value;
    std::vector<int> parents;
    BackwardRule backward;
    bool requires_grad = false;
  };
  std::deque<Node> nodes_;  // deque: growing the tape never moves nodes
};

// ---- primitive ops -------------------------------------------------------

namespace ops {

Var matmul(Var a, Var b);             // [M,K] @ [K,N]
Var transpose(Var a);                 // 2-D
Var add(Var a, Var b);                // equal shapes, scalar, or suffix-shape broadcast
Var sub(Var a, Var b);
Var mul(Var a, Var b);                // same broadcast rule as add
Var scale(Var a, double c);
Var neg(Var a);
Var tanh(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var square(Var a);
Var concat(const std::vector<Var>& parts, std::size_t axis);
Var slice(Var a, std::size_t axis, std::size_t start, std::size_t len);
Var pad_zeros(Var a, std::size_t axis, std::size_t before, std::size_t after);
Var reshape(Var a, Shape shape);
Var sum(Var a);                       // -> scalar (shape {1})
Var sum_axis(Var a, std::size_t axis);
Var expand_axis(Var a, std::size_t axis, std::size_t n);  // repeat along new axis
Var mean(Var a);
Var mean_axis(Var a, std::size_t axis);

// Mean squared difference of two equal-shaped values -> scalar.
Var mse(Var a, Var b);

}  // namespace ops

// One reverse pass seeded with `cotangent`: returns J^T v for the recorded
// map f evaluated at `point`, without materializing J.
Array vjp(const std::function<Var(Tape&, Var)>& f, const Array& point, const Array& cotangent);

}  // namespace koda
