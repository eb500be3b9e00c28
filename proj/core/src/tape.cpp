#include "vlo/tape.hpp"

#include <cmath>

#include "vlo/error.hpp"

namespace vlo::ad {

const Tape::Node& Tape::node(Var v) const {
  if (!v.valid() || static_cast<std::size_t>(v.id()) >= nodes_.size()) {
    fail(ErrorCode::kInvalidArgument, "variable does not belong to this tape");
  }
  return nodes_[static_cast<std::size_t>(v.id())];
}

Tape::Node& Tape::node(Var v) { return const_cast<Node&>(std::as_const(*this).node(v)); }

Var Tape::variable(Grid value) {
  nodes_.push_back(Node{std::move(value), {}, {}, true, true});
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Tape::constant(Grid value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, false});
  return Var(static_cast<int>(nodes_.size() - 1));
}

Var Tape::record(Grid value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (Var p : parents) needs = needs || node(p).requires_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : Backward{}, needs, false});
  return Var(static_cast<int>(nodes_.size() - 1));
}

const Grid& Tape::value(Var v) const { return node(v).value; }

double Tape::scalar(Var v) const {
  const Grid& g = node(v).value;
  if (g.size() != 1) fail(ErrorCode::kInvalidArgument, "node is not a scalar");
  return g[0];
}

bool Tape::requires_grad(Var v) const { return node(v).requires_grad; }

Grid* Tape::grad_buffer(Var v) {
  Node& n = node(v);
  if (!n.requires_grad) return nullptr;
  if (n.grad.size() != n.value.size()) {
    n.grad = Grid(n.value.height(), n.value.width(), n.value.channels(), 0.0);
  }
  return &n.grad;
}

void Tape::backward(Var root) {
  if (node(root).value.size() != 1) fail(ErrorCode::kInvalidArgument, "backward needs a scalar root");
  for (auto& n : nodes_) {
    n.grad = n.is_variable ? Grid(n.value.height(), n.value.width(), n.value.channels(), 0.0) : Grid();
  }
  has_gradients_ = true;
  Grid* seed = grad_buffer(root);
  if (!seed) return;
  (*seed)[0] = 1.0;
  for (int i = root.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.backward || n.grad.empty()) continue;
    // Callbacks only touch parents, which precede this node; n.grad stays put.
    n.backward(*this, n.grad);
  }
}

const Grid& Tape::gradient(Var v) const {
  if (!has_gradients_) fail(ErrorCode::kInvalidArgument, "gradient requested before backward()");
  const Node& n = node(v);
  if (!n.is_variable && n.grad.empty()) fail(ErrorCode::kInvalidArgument, "node has no gradient");
  return n.grad;
}

namespace {

void require_same(const Grid& a, const Grid& b, const char* op) {
  if (!a.same_shape(b)) fail(ErrorCode::kInvalidArgument, std::string(op) + ": operand shapes differ");
}

Grid like(const Grid& g) { return Grid(g.height(), g.width(), g.channels(), 0.0); }

}  // namespace

Var add(Tape& tape, Var a, Var b) {
  const Grid& x = tape.value(a);
  const Grid& y = tape.value(b);
  require_same(x, y, "add");
  Grid out = like(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Grid& g) {
    for (Var p : {a, b}) {
      if (Grid* d = t.grad_buffer(p)) {
        for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
      }
    }
  });
}

Var sub(Tape& tape, Var a, Var b) {
  const Grid& x = tape.value(a);
  const Grid& y = tape.value(b);
  require_same(x, y, "sub");
  Grid out = like(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Grid& g) {
    if (Grid* d = t.grad_buffer(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i];
    }
    if (Grid* d = t.grad_buffer(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] -= g[i];
    }
  });
}

Var mul(Tape& tape, Var a, Var b) {
  const Grid& x = tape.value(a);
  const Grid& y = tape.value(b);
  require_same(x, y, "mul");
  Grid out = like(x);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return tape.record(std::move(out), {a, b}, [a, b](Tape& t, const Grid& g) {
    const Grid& xv = t.value(a);
    const Grid& yv = t.value(b);
    if (Grid* d = t.grad_buffer(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * yv[i];
    }
    if (Grid* d = t.grad_buffer(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * xv[i];
    }
  });
}

Var scale(Tape& tape, Var a, double factor) {
  Grid out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
  return tape.record(std::move(out), {a}, [a, factor](Tape& t, const Grid& g) {
    if (Grid* d = t.grad_buffer(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += factor * g[i];
    }
  });
}

Var square(Tape& tape, Var a) { return mul(tape, a, a); }

Var exp(Tape& tape, Var a) {
  Grid out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(out[i]);
  return tape.record(std::move(out), {a}, [a](Tape& t, const Grid& g) {
    if (Grid* d = t.grad_buffer(a)) {
      const Grid& x = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += g[i] * std::exp(x[i]);
    }
  });
}

Var abs(Tape& tape, Var a) {
  Grid out = tape.value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(out[i]);
  return tape.record(std::move(out), {a}, [a](Tape& t, const Grid& g) {
    if (Grid* d = t.grad_buffer(a)) {
      const Grid& x = t.value(a);
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double s = x[i] > 0.0 ? 1.0 : (x[i] < 0.0 ? -1.0 : 0.0);
        (*d)[i] += g[i] * s;
      }
    }
  });
}

Var sum(Tape& tape, Var a) {
  double acc = 0.0;
  for (double x : tape.value(a).values()) acc += x;
  return tape.record(Grid::scalar(acc), {a}, [a](Tape& t, const Grid& g) {
    if (Grid* d = t.grad_buffer(a)) {
      for (std::size_t i = 0; i < d->size(); ++i) (*d)[i] += g[0];
    }
  });
}

Var mean(Tape& tape, Var a) {
  const std::size_t n = tape.value(a).size();
  if (n == 0) fail(ErrorCode::kInvalidArgument, "mean of an empty grid");
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(n));
}

Var linear_combination(Tape& tape, std::span<const Var> terms, std::span<const double> weights) {
  if (terms.empty() || terms.size() != weights.size()) {
    fail(ErrorCode::kInvalidArgument, "linear_combination needs one weight per term");
  }
  Grid out = like(tape.value(terms[0]));
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const Grid& x = tape.value(terms[k]);
    require_same(out, x, "linear_combination");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += weights[k] * x[i];
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<double> ws(weights.begin(), weights.end());
  return tape.record(std::move(out), ts, [ts, ws](Tape& t, const Grid& g) {
    for (std::size_t k = 0; k < ts.size(); ++k) {
      if (Grid* d = t.grad_buffer(ts[k])) {
        for (std::size_t i = 0; i < g.size(); ++i) (*d)[i] += ws[k] * g[i];
      }
    }
  });
}

}  // namespace vlo::ad
