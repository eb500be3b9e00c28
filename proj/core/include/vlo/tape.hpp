#pragma once

#include <functional>
#include <span>
#include <vector>

#include "vlo/grid.hpp"

namespace vlo::ad {

class Tape;

// Handle to a node on a Tape. Only meaningful together with the tape that issued it.
class Var {
 public:
  Var() = default;
  int id() const { return id_; }
  bool valid() const { return id_ >= 0; }

 private:
  explicit Var(int id) : id_(id) {}
  int id_ = -1;
  friend class Tape;
};

// Records grid-valued operations in creation order and replays them backwards.
// Nodes only reference earlier nodes, so the graph is acyclic by construction.
// A tape is single-threaded; use one tape per optimization thread.
class Tape {
 public:
  // Receives the gradient of the node's output and accumulates into its parents via grad_buffer().
  using Backward = std::function<void(Tape&, const Grid& output_grad)>;

  Var variable(Grid value);
  Var constant(Grid value);
  Var record(Grid value, std::span<const Var> parents, Backward backward);
  Var record(Grid value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }

  const Grid& value(Var v) const;
  double scalar(Var v) const;
  bool requires_grad(Var v) const;

  // Accumulation buffer of v (zero-initialised on first use), or nullptr when v needs no gradient.
  Grid* grad_buffer(Var v);

  // Runs the chain rule from a scalar root. Every variable receives a gradient (zero if unused).
  void backward(Var root);
  const Grid& gradient(Var v) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Grid value;
    Grid grad;
    Backward backward;
    bool requires_grad = false;
    bool is_variable = false;
  };

  const Node& node(Var v) const;
  Node& node(Var v);

  std::vector<Node> nodes_;
  bool has_gradients_ = false;
};

Var add(Tape& tape, Var a, Var b);
Var sub(Tape& tape, Var a, Var b);
Var mul(Tape& tape, Var a, Var b);
Var scale(Tape& tape, Var a, double factor);
Var square(Tape& tape, Var a);
Var exp(Tape& tape, Var a);
// Subgradient 0 at 0.
Var abs(Tape& tape, Var a);
Var sum(Tape& tape, Var a);
Var mean(Tape& tape, Var a);
// sum_i weights[i] * terms[i]; terms must share a shape.
Var linear_combination(Tape& tape, std::span<const Var> terms, std::span<const double> weights);

}  // namespace vlo::ad
