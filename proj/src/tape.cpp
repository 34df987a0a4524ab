#include "koda/tape.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <utility>

namespace koda {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_same_tape(const char* op, std::initializer_list<Var> vars) {
  Tape* t = nullptr;
  for (const Var& v : vars) {
    if (!v.valid()) throw ValueError(std::string(op) + ": invalid Var");
    if (t == nullptr) t = v.tape;
    if (v.tape != t) throw ValueError(std::string(op) + ": operands live on different tapes");
  }
}

enum class Broadcast { same, a_small, b_small };

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

Broadcast resolve_broadcast(const char* op, const Shape& a, const Shape& b) {
  if (a == b) return Broadcast::same;
  if (shape_size(b) == 1 || is_suffix(b, a)) return Broadcast::b_small;
  if (shape_size(a) == 1 || is_suffix(a, b)) return Broadcast::a_small;
  throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                   " are neither equal nor leading-broadcastable");
}

// Sum a gradient down to the shape of a broadcast operand.
Var reduce_to(Var g, const Shape& target, Tape& tape) {
  const Shape gshape = tape.val(g).shape();
  if (gshape == target) return g;
  if (shape_size(target) == 1) {
    Var s = ops::sum(g);
    return target == Shape{1} ? s : ops::reshape(s, target);
  }
  Var r = g;
  while (tape.val(r).rank() > target.size()) r = ops::sum_axis(r, 0);
  if (tape.val(r).shape() != target) {
    throw ShapeError("reduce_to: cannot reduce " + shape_str(gshape) + " to " +
                     shape_str(target));
  }
  return r;
}

}  // namespace

// ---- Tape ------------------------------------------------------------------

Var Tape::leaf(Array value, bool trainable) {
  Node n;
  n.op = trainable ? "param" : "const";
  n.value = std::move(value);
  n.requires_grad = trainable;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::make_node(std::string op, Array value, std::vector<Var> inputs, BackwardRule backward) {
  if (!value.all_finite()) {
    throw NonFiniteError("op '" + op + "' produced a non-finite value");
  }
  Node n;
  n.op = std::move(op);
  n.value = std::move(value);
  n.parents.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape != this) throw ValueError("make_node: input from a different tape");
    n.parents.push_back(v.id);
    n.requires_grad = n.requires_grad || nodes_[static_cast<std::size_t>(v.id)].requires_grad;
  }
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size()) - 1};
}

Array Tape::val(Var v) const {
  if (v.tape != this) throw ValueError("val: Var from a different tape");
  return nodes_.at(static_cast<std::size_t>(v.id)).value;
}

bool Tape::requires_grad(Var v) const {
  return nodes_.at(static_cast<std::size_t>(v.id)).requires_grad;
}

std::vector<int> Tape::trainable_leaves() const {
  std::vector<int> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].op == "param") out.push_back(static_cast<int>(i));
  }
  return out;
}

namespace {

class FilteredSink : public GradSink {
 public:
  // Takes parents by value: the rule being run may grow the node vector and
  // invalidate references into it.
  FilteredSink(Tape& tape, std::vector<int> parents, const std::vector<char>& useful,
               std::vector<Var>& gmap)
      : tape_(tape), parents_(std::move(parents)), useful_(useful), gmap_(gmap) {}

  void add(int parent_index, Var contribution) override {
    const int pid = parents_.at(static_cast<std::size_t>(parent_index));
    if (!useful_[static_cast<std::size_t>(pid)]) return;
    const Shape cs = tape_.val(contribution).shape();
    const Shape ps = tape_.val(pid).shape();
    if (cs != ps) {
      throw ShapeError("gradient contribution shape " + shape_str(cs) +
                       " does not match parent shape " + shape_str(ps));
    }
    Var& slot = gmap_[static_cast<std::size_t>(pid)];
    slot = slot.valid() ? ops::add(slot, contribution) : contribution;
  }

 private:
  Tape& tape_;
  std::vector<int> parents_;
  const std::vector<char>& useful_;
  std::vector<Var>& gmap_;
};

}  // namespace

std::vector<Var> Tape::grad_vars(Var output, Var seed, const std::vector<Var>& wrt) {
  if (output.tape != this || seed.tape != this) {
    throw ValueError("grad_vars: output/seed from a different tape");
  }
  if (!val(seed).same_shape(val(output))) {
    throw ShapeError("grad_vars: seed shape " + shape_str(val(seed).shape()) +
                     " does not match output shape " + shape_str(val(output).shape()));
  }
  const std::size_t frozen = nodes_.size();

  // Ancestors of the output (including itself).
  std::vector<char> anc(frozen, 0);
  anc[static_cast<std::size_t>(output.id)] = 1;
  for (int id = output.id; id >= 0; --id) {
    if (!anc[static_cast<std::size_t>(id)]) continue;
    for (int p : nodes_[static_cast<std::size_t>(id)].parents) anc[static_cast<std::size_t>(p)] = 1;
  }
  // Nodes through which some wrt entry can influence the output.
  std::vector<char> useful(frozen, 0);
  for (const Var& w : wrt) {
    if (w.tape != this) throw ValueError("grad_vars: wrt Var from a different tape");
    if (static_cast<std::size_t>(w.id) < frozen && anc[static_cast<std::size_t>(w.id)]) {
      useful[static_cast<std::size_t>(w.id)] = 1;
    }
  }
  for (std::size_t id = 0; id < frozen; ++id) {
    if (!anc[id] || useful[id]) continue;
    for (int p : nodes_[id].parents) {
      if (useful[static_cast<std::size_t>(p)]) {
        useful[id] = 1;
        break;
      }
    }
  }

  std::vector<Var> gmap(frozen);
  gmap[static_cast<std::size_t>(output.id)] = seed;
  for (int id = output.id; id >= 0; --id) {
    const std::size_t uid = static_cast<std::size_t>(id);
    if (!gmap[uid].valid() || !anc[uid]) continue;
    // Copy the pieces of the node needed below: running the rule appends
    // nodes and may reallocate nodes_.
    if (!nodes_[uid].backward) continue;
    const std::vector<int> parents = nodes_[uid].parents;
    const BackwardRule rule = nodes_[uid].backward;
    bool any_useful_parent = false;
    for (int p : parents) {
      if (useful[static_cast<std::size_t>(p)]) {
        any_useful_parent = true;
        break;
      }
    }
    if (!any_useful_parent) continue;
    std::vector<Var> inputs;
    inputs.reserve(parents.size());
    for (int p : parents) inputs.push_back(Var{this, p});
    FilteredSink sink(*this, parents, useful, gmap);
    rule(*this, inputs, Var{this, id}, gmap[uid], sink);
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    Var g = gmap[static_cast<std::size_t>(w.id)];
    if (!g.valid()) g = constant(Array::zeros(val(w).shape()));
    out.push_back(g);
  }
  return out;
}

std::unordered_map<int, Array> Tape::backward(Var loss) {
  if (loss.tape != this) throw ValueError("backward: loss from a different tape");
  if (val(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " + shape_str(val(loss).shape()));
  }
  if (!requires_grad(loss)) {
    throw ValueError("backward: loss is detached from every trainable leaf");
  }
  std::vector<int> leaves = trainable_leaves();
  std::vector<Var> wrt;
  wrt.reserve(leaves.size());
  for (int id : leaves) wrt.push_back(Var{this, id});
  Var seed = constant(Array::full(val(loss).shape(), 1.0));
  std::vector<Var> grads = grad_vars(loss, seed, wrt);
  std::unordered_map<int, Array> out;
  for (std::size_t i = 0; i < leaves.size(); ++i) out[leaves[i]] = val(grads[i]);
  return out;
}

// ---- primitives ------------------------------------------------------------

namespace ops {

Var matmul(Var a, Var b) {
  check_same_tape("matmul", {a, b});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  const Array& bv = t.val(b);
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw ShapeError("matmul: incompatible shapes " + shape_str(av.shape()) + " @ " +
                     shape_str(bv.shape()));
  }
  const auto m = static_cast<Eigen::Index>(av.dim(0));
  const auto k = static_cast<Eigen::Index>(av.dim(1));
  const auto n = static_cast<Eigen::Index>(bv.dim(1));
  Array out = Array::zeros({av.dim(0), bv.dim(1)});
  Eigen::Map<const RowMat> A(av.data(), m, k);
  Eigen::Map<const RowMat> B(bv.data(), k, n);
  Eigen::Map<RowMat> C(out.mut(), m, n);
  C.noalias() = A * B;
  return t.make_node("matmul", std::move(out), {a, b},
                     [](Tape&, const std::vector<Var>& in, Var, Var gout, GradSink& sink) {
                       sink.add(0, matmul(gout, transpose(in[1])));
                       sink.add(1, matmul(transpose(in[0]), gout));
                     });
}

Var transpose(Var a) {
  check_same_tape("transpose", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  if (av.rank() != 2) throw ShapeError("transpose: expected rank 2, got " + shape_str(av.shape()));
  const std::size_t m = av.dim(0), n = av.dim(1);
  Array out = Array::zeros({n, m});
  const double* src = av.data();
  double* dst = out.mut();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) dst[j * m + i] = src[i * n + j];
  }
  return t.make_node("transpose", std::move(out), {a},
                     [](Tape&, const std::vector<Var>&, Var, Var gout, GradSink& sink) {
                       sink.add(0, transpose(gout));
                     });
}

namespace {

template <typename F>
Var binary_broadcast(const char* name, Var a, Var b, F&& f, BackwardRule rule) {
  check_same_tape(name, {a, b});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  const Array& bv = t.val(b);
  const Broadcast bc = resolve_broadcast(name, av.shape(), bv.shape());
  const Array& big = (bc == Broadcast::a_small) ? bv : av;
  Array out = Array::zeros(big.shape());
  double* o = out.mut();
  const double* pa = av.data();
  const double* pb = bv.data();
  const std::size_t n = big.size();
  const std::size_t na = av.size();
  const std::size_t nb = bv.size();
  if (bc == Broadcast::same) {
    for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i], pb[i]);
  } else if (bc == Broadcast::b_small) {
    for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i], pb[i % nb]);
  } else {
    for (std::size_t i = 0; i < n; ++i) o[i] = f(pa[i % na], pb[i]);
  }
  return t.make_node(name, std::move(out), {a, b}, std::move(rule));
}

}  // namespace

Var add(Var a, Var b) {
  return binary_broadcast(
      "add", a, b, [](double x, double y) { return x + y; },
      [](Tape& t, const std::vector<Var>& in, Var, Var gout, GradSink& sink) {
        sink.add(0, reduce_to(gout, t.val(in[0]).shape(), t));
        sink.add(1, reduce_to(gout, t.val(in[1]).shape(), t));
      });
}

Var mul(Var a, Var b) {
  return binary_broadcast(
      "multiply", a, b, [](double x, double y) { return x * y; },
      [](Tape& t, const std::vector<Var>& in, Var, Var gout, GradSink& sink) {
        sink.add(0, reduce_to(mul(gout, in[1]), t.val(in[0]).shape(), t));
        sink.add(1, reduce_to(mul(gout, in[0]), t.val(in[1]).shape(), t));
      });
}

Var sub(Var a, Var b) { return add(a, neg(b)); }

Var scale(Var a, double c) {
  check_same_tape("scale", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  Array out = Array::zeros(av.shape());
  double* o = out.mut();
  const double* p = av.data();
  for (std::size_t i = 0; i < av.size(); ++i) o[i] = c * p[i];
  return t.make_node("scale", std::move(out), {a},
                     [c](Tape&, const std::vector<Var>&, Var, Var gout, GradSink& sink) {
                       sink.add(0, scale(gout, c));
                     });
}

Var neg(Var a) { return scale(a, -1.0); }

namespace {

template <typename F>
Var unary(const char* name, Var a, F&& f, BackwardRule rule) {
  check_same_tape(name, {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  Array out = Array::zeros(av.shape());
  double* o = out.mut();
  const double* p = av.data();
  for (std::size_t i = 0; i < av.size(); ++i) o[i] = f(p[i]);
  return t.make_node(name, std::move(out), {a}, std::move(rule));
}

Var ones_like(Tape& t, const Array& a) { return t.constant(Array::full(a.shape(), 1.0)); }

}  // namespace

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](Tape& t, const std::vector<Var>&, Var out, Var gout, GradSink& sink) {
        sink.add(0, mul(gout, sub(ones_like(t, t.val(out)), square(out))));
      });
}

Var relu(Var a) {
  return unary(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](Tape& t, const std::vector<Var>& in, Var, Var gout, GradSink& sink) {
        // Piecewise-constant slope; recorded as a constant mask (zero at 0).
        const Array& x = t.val(in[0]);
        Array mask = Array::zeros(x.shape());
        double* m = mask.mut();
        for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] > 0.0 ? 1.0 : 0.0;
        sink.add(0, mul(gout, t.constant(std::move(mask))));
      });
}

Var sigmoid(Var a) {
  return unary(
      "sigmoid", a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](Tape& t, const std::vector<Var>&, Var out, Var gout, GradSink& sink) {
        sink.add(0, mul(gout, mul(out, sub(ones_like(t, t.val(out)), out))));
      });
}

Var square(Var a) {
  return unary(
      "square", a, [](double x) { return x * x; },
      [](Tape&, const std::vector<Var>& in, Var, Var gout, GradSink& sink) {
        sink.add(0, scale(mul(gout, in[0]), 2.0));
      });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw ValueError("concat: no parts");
  Tape& t = *parts[0].tape;
  for (const Var& p : parts) check_same_tape("concat", {parts[0], p});
  const Array& first = t.val(parts[0]);
  const std::size_t rank = first.rank();
  if (axis >= rank) throw ShapeError("concat: axis out of range");
  Shape out_shape = first.shape();
  std::size_t axis_total = 0;
  for (const Var& p : parts) {
    const Array& pv = t.val(p);
    if (pv.rank() != rank) throw ShapeError("concat: rank mismatch");
    for (std::size_t d = 0; d < rank; ++d) {
      if (d != axis && pv.dim(d) != first.dim(d)) {
        throw ShapeError("concat: shape mismatch " + shape_str(pv.shape()) + " vs " +
                         shape_str(first.shape()));
      }
    }
    axis_total += pv.dim(axis);
  }
  out_shape[axis] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= first.dim(d);
  for (std::size_t d = axis + 1; d < rank; ++d) inner *= first.dim(d);

  Array out = Array::zeros(out_shape);
  double* o = out.mut();
  const std::size_t out_stride = axis_total * inner;
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Array& pv = t.val(p);
    const std::size_t len = pv.dim(axis) * inner;
    const double* src = pv.data();
    for (std::size_t i = 0; i < outer; ++i) {
      std::memcpy(o + i * out_stride + offset, src + i * len, len * sizeof(double));
    }
    offset += len;
  }

  std::vector<std::size_t> starts;
  std::size_t pos = 0;
  for (const Var& p : parts) {
    starts.push_back(pos);
    pos += t.val(p).dim(axis);
  }
  std::vector<std::size_t> lens;
  for (const Var& p : parts) lens.push_back(t.val(p).dim(axis));
  return t.make_node("concat", std::move(out), parts,
                     [axis, starts, lens](Tape&, const std::vector<Var>&, Var, Var gout,
                                          GradSink& sink) {
                       for (std::size_t i = 0; i < starts.size(); ++i) {
                         sink.add(static_cast<int>(i), slice(gout, axis, starts[i], lens[i]));
                       }
                     });
}

Var slice(Var a, std::size_t axis, std::size_t start, std::size_t len) {
  check_same_tape("slice", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  if (axis >= av.rank()) throw ShapeError("slice: axis out of range");
  if (start + len > av.dim(axis)) {
    throw ShapeError("slice: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                     ") exceeds dim " + std::to_string(av.dim(axis)));
  }
  Shape out_shape = av.shape();
  out_shape[axis] = len;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= av.dim(d);
  for (std::size_t d = axis + 1; d < av.rank(); ++d) inner *= av.dim(d);
  Array out = Array::zeros(out_shape);
  double* o = out.mut();
  const double* src = av.data();
  const std::size_t src_stride = av.dim(axis) * inner;
  const std::size_t dst_stride = len * inner;
  for (std::size_t i = 0; i < outer; ++i) {
    std::memcpy(o + i * dst_stride, src + i * src_stride + start * inner,
                dst_stride * sizeof(double));
  }
  const std::size_t after = av.dim(axis) - start - len;
  return t.make_node("slice", std::move(out), {a},
                     [axis, start, after](Tape&, const std::vector<Var>&, Var, Var gout,
                                          GradSink& sink) {
                       sink.add(0, pad_zeros(gout, axis, start, after));
                     });
}

Var pad_zeros(Var a, std::size_t axis, std::size_t before, std::size_t after) {
  check_same_tape("pad_zeros", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  if (axis >= av.rank()) throw ShapeError("pad_zeros: axis out of range");
  Shape out_shape = av.shape();
  out_shape[axis] += before + after;
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= av.dim(d);
  for (std::size_t d = axis + 1; d < av.rank(); ++d) inner *= av.dim(d);
  Array out = Array::zeros(out_shape);
  double* o = out.mut();
  const double* src = av.data();
  const std::size_t src_stride = av.dim(axis) * inner;
  const std::size_t dst_stride = out_shape[axis] * inner;
  for (std::size_t i = 0; i < outer; ++i) {
    std::memcpy(o + i * dst_stride + before * inner, src + i * src_stride,
                src_stride * sizeof(double));
  }
  const std::size_t len = av.dim(axis);
  return t.make_node("pad_zeros", std::move(out), {a},
                     [axis, before, len](Tape&, const std::vector<Var>&, Var, Var gout,
                                         GradSink& sink) {
                       sink.add(0, slice(gout, axis, before, len));
                     });
}

Var reshape(Var a, Shape shape) {
  check_same_tape("reshape", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  if (shape_size(shape) != av.size()) {
    throw ShapeError("reshape: cannot view " + shape_str(av.shape()) + " as " + shape_str(shape));
  }
  Array out = Array::from(shape, std::vector<double>(av.data(), av.data() + av.size()));
  const Shape orig = av.shape();
  return t.make_node("reshape", std::move(out), {a},
                     [orig](Tape&, const std::vector<Var>&, Var, Var gout, GradSink& sink) {
                       sink.add(0, reshape(gout, orig));
                     });
}

Var sum(Var a) {
  check_same_tape("sum", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  double acc = 0.0;
  const double* p = av.data();
  for (std::size_t i = 0; i < av.size(); ++i) acc += p[i];
  const Shape orig = av.shape();
  return t.make_node("sum", Array::scalar(acc), {a},
                     [orig](Tape& tt, const std::vector<Var>&, Var, Var gout, GradSink& sink) {
                       sink.add(0, mul(tt.constant(Array::full(orig, 1.0)), gout));
                     });
}

Var sum_axis(Var a, std::size_t axis) {
  check_same_tape("sum_axis", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  if (axis >= av.rank()) throw ShapeError("sum_axis: axis out of range");
  Shape out_shape;
  for (std::size_t d = 0; d < av.rank(); ++d) {
    if (d != axis) out_shape.push_back(av.dim(d));
  }
  if (out_shape.empty()) out_shape = {1};
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= av.dim(d);
  for (std::size_t d = axis + 1; d < av.rank(); ++d) inner *= av.dim(d);
  const std::size_t n = av.dim(axis);
  Array out = Array::zeros(out_shape);
  double* o = out.mut();
  const double* p = av.data();
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      const double* row = p + (i * n + k) * inner;
      double* orow = o + i * inner;
      for (std::size_t j = 0; j < inner; ++j) orow[j] += row[j];
    }
  }
  return t.make_node("sum_axis", std::move(out), {a},
                     [axis, n](Tape&, const std::vector<Var>&, Var, Var gout, GradSink& sink) {
                       sink.add(0, expand_axis(gout, axis, n));
                     });
}

Var expand_axis(Var a, std::size_t axis, std::size_t n) {
  check_same_tape("expand_axis", {a});
  Tape& t = *a.tape;
  const Array& av = t.val(a);
  // Treat a {1}-shaped scalar as rank 0 so expand(sum_axis(x)) round-trips.
  Shape base = av.shape();
  if (base == Shape{1} && axis == 0) base = {};
  if (axis > base.size()) throw ShapeError("expand_axis: axis out of range");
  Shape out_shape = base;
  out_shape.insert(out_shape.begin() + static_cast<std::ptrdiff_t>(axis), n);
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= base[d];
  for (std::size_t d = axis; d < base.size(); ++d) inner *= base[d];
  Array out = Array::zeros(out_shape);
  double* o = out.mut();
  const double* p = av.data();
  for (std::size_t i = 0; i < outer; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      std::memcpy(o + (i * n + k) * inner, p + i * inner, inner * sizeof(double));
    }
  }
  return t.make_node("expand_axis", std::move(out), {a},
                     [axis](Tape& tt, const std::vector<Var>& in, Var, Var gout, GradSink& sink) {
                       Var g = sum_axis(gout, axis);
                       const Shape& want = tt.val(in[0]).shape();
                       if (tt.val(g).shape() != want) g = reshape(g, want);
                       sink.add(0, g);
                     });
}

Var mean(Var a) {
  const std::size_t n = a.tape->val(a).size();
  if (n == 0) throw ShapeError("mean: empty array");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mean_axis(Var a, std::size_t axis) {
  const Array& av = a.tape->val(a);
  if (axis >= av.rank()) throw ShapeError("mean_axis: axis out of range");
  const std::size_t n = av.dim(axis);
  if (n == 0) throw ShapeError("mean_axis: empty axis");
  return scale(sum_axis(a, axis), 1.0 / static_cast<double>(n));
}

Var mse(Var a, Var b) {
  const Array& av = a.tape->val(a);
  const Array& bv = b.tape->val(b);
  if (!av.same_shape(bv)) {
    throw ShapeError("mse: shapes " + shape_str(av.shape()) + " and " + shape_str(bv.shape()) +
                     " differ");
  }
  return mean(square(sub(a, b)));
}

}  // namespace ops

Array vjp(const std::function<Var(Tape&, Var)>& f, const Array& point, const Array& cotangent) {
  Tape tape;
  Var x = tape.leaf(point, true);
  Var y = f(tape, x);
  if (!tape.val(y).same_shape(cotangent)) {
    throw ShapeError("vjp: cotangent shape " + shape_str(cotangent.shape()) +
                     " does not match output shape " + shape_str(tape.val(y).shape()));
  }
  Var seed = tape.constant(cotangent);
  std::vector<Var> g = tape.grad_vars(y, seed, {x});
  return tape.val(g[0]);
}

}  // namespace koda
