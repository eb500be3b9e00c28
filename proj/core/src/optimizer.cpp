#include "vlo/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace vlo {

void OptimizerConfig::validate() const {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "Adam decay rates must lie in [0, 1)");
  }
  if (!(lr > 0.0) || !(epsilon > 0.0)) fail(ErrorCode::kInvalidArgument, "learning rate must be positive");
  if (lr_halving_interval <= 0 || max_iters < 0 || convergence_window <= 0 || divergence_patience <= 0) {
    fail(ErrorCode::kInvalidArgument, "iteration counts must be positive");
  }
  if (!(convergence_tol >= 0.0) || !(divergence_factor > 1.0)) {
    fail(ErrorCode::kInvalidArgument, "invalid convergence or divergence threshold");
  }
  if (!(depth_range.min > 0.0) || !(depth_range.max > depth_range.min)) {
    fail(ErrorCode::kInvalidArgument, "invalid depth range");
  }
}

DenseDepthMap initialize_depth(const SparseDepthMap& sparse, DepthInit method, DepthRange range) {
  const int h = sparse.height(), w = sparse.width();
  std::vector<double> values;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (sparse.valid(r, c)) values.push_back(sparse(r, c));
    }
  }
  if (values.empty()) fail(ErrorCode::kEmptyMask, "depth initialisation needs at least one valid sample");
  auto clamp = [&](double d) { return std::clamp(d, range.min, range.max); };

  if (method == DepthInit::kConstant) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    const double median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    return DenseDepthMap(h, w, clamp(median));
  }

  Grid out(h, w, 1, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      // Square rings of growing radius; stop once the ring cannot beat the best distance.
      long best_d2 = std::numeric_limits<long>::max();
      int br = 0, bc = 0;
      for (int rad = 0; rad < std::max(h, w); ++rad) {
        if (static_cast<long>(rad) * rad > best_d2) break;
        for (int rr = r - rad; rr <= r + rad; ++rr) {
          if (rr < 0 || rr >= h) continue;
          const bool edge_row = rr == r - rad || rr == r + rad;
          const int step = edge_row ? 1 : 2 * rad;
          for (int cc = c - rad; cc <= c + rad; cc += std::max(step, 1)) {
            if (cc < 0 || cc >= w || !sparse.valid(rr, cc)) continue;
            const long d2 = static_cast<long>(rr - r) * (rr - r) + static_cast<long>(cc - c) * (cc - c);
            if (d2 < best_d2 || (d2 == best_d2 && (rr < br || (rr == br && cc < bc)))) {
              best_d2 = d2;
              br = rr;
              bc = cc;
            }
          }
        }
      }
      out(r, c) = clamp(sparse(br, bc));
    }
  }
  return DenseDepthMap(std::move(out), range);
}

namespace {

struct AdamParam {
  Grid value, m, v;
  explicit AdamParam(Grid x)
      : value(std::move(x)), m(value.height(), value.width(), value.channels(), 0.0), v(m) {}
};

Grid log_grid(const Grid& g) {
  Grid out = g;
  for (auto& x : out.values()) x = std::log(x);
  return out;
}

DenseDepthMap depth_from_log(const Grid& log_depth, DepthRange range) {
  Grid d = log_depth;
  for (auto& x : d.values()) x = std::clamp(std::exp(x), range.min, range.max);
  return DenseDepthMap(std::move(d), range);
}

struct RunResult {
  std::vector<Grid> best;
  std::vector<LossBreakdown> history;
  int best_iteration = 0;
  bool converged = false;
};

using Projection = std::function<void(std::vector<AdamParam>&)>;

// Adam over `params`. Parameters in `depth_slots` are held fixed when depth optimisation is off.
// `evaluate` builds the objective from tape nodes created for each parameter; `project` runs after
// every update.
RunResult run_adam(std::vector<AdamParam>& params, const std::vector<std::size_t>& depth_slots,
                   const OptimizerConfig& cfg,
                   const std::function<Objective(ad::Tape&, const std::vector<ad::Var>&)>& evaluate,
                   const Projection& project) {
  std::vector<bool> trainable(params.size(), true);
  if (!cfg.optimize_depth) {
    for (std::size_t slot : depth_slots) trainable[slot] = false;
  }
  RunResult res;
  double initial = 0.0, best = std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  int above = 0;
  for (int it = 0;; ++it) {
    ad::Tape tape;
    std::vector<ad::Var> vars;
    for (std::size_t k = 0; k < params.size(); ++k) {
      vars.push_back(trainable[k] ? tape.variable(params[k].value) : tape.constant(params[k].value));
    }
    Objective obj;
    try {
      obj = evaluate(tape, vars);
    } catch (const Error& e) {
      if (it == 0 || e.code() != ErrorCode::kDegenerateWarp) throw;
      throw DivergenceError(std::string("iterate left the valid warp region: ") + e.what(), res.history);
    }
    const double loss = obj.breakdown.total;
    res.history.push_back(obj.breakdown);
    if (it == 0) {
      initial = loss;
      if (!std::isfinite(loss)) throw DivergenceError("initial loss is not finite", res.history);
    }
    if (loss < best) {
      best = loss;
      res.best_iteration = it;
      res.best.clear();
      for (const auto& p : params) res.best.push_back(p.value);
    }
    above = (std::isfinite(loss) && loss <= cfg.divergence_factor * initial) ? 0 : above + 1;
    if (above >= cfg.divergence_patience) {
      throw DivergenceError("loss exceeded " + std::to_string(cfg.divergence_factor) + "x its initial value for " +
                                std::to_string(cfg.divergence_patience) + " iterations",
                            res.history);
    }
    trace.push_back(loss);
    if (it >= cfg.convergence_window) {
      const double past = trace[static_cast<std::size_t>(it - cfg.convergence_window)];
      if (std::abs(past - loss) <= cfg.convergence_tol * std::abs(past)) {
        res.converged = true;
        break;
      }
    }
    if (it >= cfg.max_iters) break;

    tape.backward(obj.root);
    const double lr = cfg.lr * std::pow(0.5, it / cfg.lr_halving_interval);
    const double bc1 = 1.0 - std::pow(cfg.beta1, it + 1);
    const double bc2 = 1.0 - std::pow(cfg.beta2, it + 1);
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!trainable[k]) continue;
      AdamParam& p = params[k];
      const Grid& g = tape.gradient(vars[k]);
      for (std::size_t i = 0; i < p.value.size(); ++i) {
        p.m[i] = cfg.beta1 * p.m[i] + (1.0 - cfg.beta1) * g[i];
        p.v[i] = cfg.beta2 * p.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
        p.value[i] -= lr * (p.m[i] / bc1) / (std::sqrt(p.v[i] / bc2) + cfg.epsilon);
      }
    }
    project(params);
  }
  return res;
}

// Horizontal mirror of a depth grid, or the flip_pose sign pattern of a pose grid.
Grid mirror(const Grid& g, bool image) {
  if (image) return hflip(g);
  Grid out = g;
  out[0] = -out[0];
  out[4] = -out[4];
  out[5] = -out[5];
  return out;
}

ad::Var mirror_op(ad::Tape& tape, ad::Var x, bool image) {
  return tape.record(mirror(tape.value(x), image), {x}, [x, image](ad::Tape& t, const Grid& g) {
    if (Grid* gx = t.grad_buffer(x)) {
      const Grid m = mirror(g, image);
      for (std::size_t i = 0; i < m.size(); ++i) (*gx)[i] += m[i];
    }
  });
}

Grid lincomb(const Grid& x, double a, const Grid& y, double b) {
  Grid out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x[i] + b * y[i];
  return out;
}

Projection clamp_log_depth(std::size_t slot, const DepthRange& range) {
  const double lo = std::log(range.min), hi = std::log(range.max);
  return [=](std::vector<AdamParam>& params) {
    for (auto& x : params[slot].value.values()) x = std::clamp(x, lo, hi);
  };
}

// Parameter layout of one branch: [log depth, pose_0, pose_1, ...].
void push_branch(std::vector<AdamParam>& params, const Snippet& s, const OptimizerConfig& cfg,
                 const InitialState& init) {
  const DenseDepthMap d0 = init.depth ? *init.depth : initialize_depth(s.sparse, cfg.depth_init, cfg.depth_range);
  if (d0.height() != s.k.height || d0.width() != s.k.width) {
    fail(ErrorCode::kInvalidArgument, "initial depth does not match the snippet");
  }
  params.emplace_back(log_grid(d0.grid()));
  if (!init.poses.empty() && init.poses.size() != s.sources.size()) {
    fail(ErrorCode::kInvalidArgument, "initial state needs one pose per source");
  }
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    params.emplace_back(pose_to_grid(init.poses.empty() ? Pose6{} : init.poses[i]));
  }
}

BranchVars branch_vars(ad::Tape& tape, const std::vector<ad::Var>& vars, std::size_t offset, std::size_t n_poses) {
  BranchVars b;
  b.depth = ad::exp(tape, vars[offset]);
  for (std::size_t i = 0; i < n_poses; ++i) b.poses.push_back(vars[offset + 1 + i]);
  return b;
}

SnippetEstimate make_estimate(const RunResult& r, const std::vector<Grid>& best, std::size_t offset, std::size_t n_poses,
                              const OptimizerConfig& cfg) {
  SnippetEstimate e;
  e.depth = depth_from_log(best[offset], cfg.depth_range);
  for (std::size_t i = 0; i < n_poses; ++i) e.poses.push_back(grid_to_pose(best[offset + 1 + i]));
  e.loss_history = r.history;
  e.best_iteration = r.best_iteration;
  e.converged = r.converged;
  return e;
}

}  // namespace

SnippetEstimate optimize_snippet(const Snippet& s, const OptimizerConfig& cfg, const LossWeights& w,
                                 const InitialState& init) {
  s.validate();
  cfg.validate();
  w.validate();
  std::vector<AdamParam> params;
  push_branch(params, s, cfg, init);
  const std::size_t np = s.sources.size();
  const RunResult r = run_adam(
      params, {0}, cfg,
      [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
        return single_objective(tape, s, branch_vars(tape, vars, 0, np), w, cfg.objective);
      },
      clamp_log_depth(0, cfg.depth_range));
  return make_estimate(r, r.best, 0, np, cfg);
}

SnippetEstimate optimize_snippet(const std::array<Image, 3>& images, const std::array<SparseDepthMap, 3>& sparse,
                                 const Intrinsics& k, const OptimizerConfig& cfg, const LossWeights& w) {
  Snippet s{images[1], {images[0], images[2]}, sparse[1], k};
  return optimize_snippet(s, cfg, w);
}

std::pair<SnippetEstimate, SnippetEstimate> optimize_snippet_siamese(const Snippet& s, const OptimizerConfig& cfg,
                                                                     const LossWeights& w, const InitialState& init,
                                                                     const InitialState& init_flipped) {
  s.validate();
  cfg.validate();
  w.validate();
  const Snippet sf = flip_snippet(s, cfg.flip);
  std::vector<AdamParam> orig, flipped;
  push_branch(orig, s, cfg, init);
  InitialState fi = init_flipped;
  if (!fi.depth) fi.depth = hflip(DenseDepthMap(depth_from_log(orig[0].value, cfg.depth_range)));
  push_branch(flipped, sf, cfg, fi);

  // Variables are the consensus a and half-difference b of the two branches, both in the original
  // frame: original = a + b, flipped = mirror(a - b). The consistency terms then only see b.
  const std::size_t np = s.sources.size();
  const std::size_t off_b = np + 1;
  std::vector<AdamParam> params;
  for (std::size_t k = 0; k < off_b; ++k) {
    params.emplace_back(lincomb(orig[k].value, 0.5, mirror(flipped[k].value, k == 0), 0.5));
  }
  for (std::size_t k = 0; k < off_b; ++k) {
    params.emplace_back(lincomb(orig[k].value, 0.5, mirror(flipped[k].value, k == 0), -0.5));
  }
  auto split = [&](const std::vector<Grid>& ab) {
    std::vector<Grid> out;
    for (std::size_t k = 0; k < off_b; ++k) out.push_back(lincomb(ab[k], 1.0, ab[off_b + k], 1.0));
    for (std::size_t k = 0; k < off_b; ++k) out.push_back(mirror(lincomb(ab[k], 1.0, ab[off_b + k], -1.0), k == 0));
    return out;
  };
  const double lo = std::log(cfg.depth_range.min), hi = std::log(cfg.depth_range.max);
  const RunResult r = run_adam(
      params, {0, off_b}, cfg,
      [&](ad::Tape& tape, const std::vector<ad::Var>& vars) {
        std::vector<ad::Var> branches;
        for (std::size_t k = 0; k < off_b; ++k) branches.push_back(ad::add(tape, vars[k], vars[off_b + k]));
        for (std::size_t k = 0; k < off_b; ++k) {
          branches.push_back(mirror_op(tape, ad::sub(tape, vars[k], vars[off_b + k]), k == 0));
        }
        return siamese_objective(tape, s, sf, branch_vars(tape, branches, 0, np),
                                 branch_vars(tape, branches, off_b, np), w, cfg.objective);
      },
      [&](std::vector<AdamParam>& p) {
        Grid& a = p[0].value;
        Grid& b = p[off_b].value;
        for (std::size_t i = 0; i < a.size(); ++i) {
          const double u = std::clamp(a[i] + b[i], lo, hi), v = std::clamp(a[i] - b[i], lo, hi);
          a[i] = 0.5 * (u + v);
          b[i] = 0.5 * (u - v);
        }
      });
  const std::vector<Grid> best = split(r.best);
  return {make_estimate(r, best, 0, np, cfg), make_estimate(r, best, off_b, np, cfg)};
}

}  // namespace vlo
