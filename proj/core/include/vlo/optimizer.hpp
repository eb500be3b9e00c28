#pragma once

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include "vlo/error.hpp"
#include "vlo/objective.hpp"

namespace vlo {

enum class OptimizerMode { kSingle, kSiamese };
enum class DepthInit { kSparseInterpolation, kConstant };

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr = 2e-4;
  int lr_halving_interval = 2000;
  int max_iters = 10000;
  // Stop once the loss changed by at most tol * |loss| over the last `window` iterations.
  double convergence_tol = 1e-7;
  int convergence_window = 50;
  double divergence_factor = 10.0;
  int divergence_patience = 100;
  OptimizerMode mode = OptimizerMode::kSingle;
  DepthInit depth_init = DepthInit::kSparseInterpolation;
  DepthRange depth_range = kDefaultDepthRange;
  FlipConvention flip = FlipConvention::kPixelEdge;
  ObjectiveOptions objective;
  bool optimize_depth = true;  // false keeps the initial depth and only fits poses

  void validate() const;
};

struct SnippetEstimate {
  DenseDepthMap depth;
  std::vector<Pose6> poses;
  std::vector<LossBreakdown> loss_history;  // one entry per evaluated iterate
  int best_iteration = 0;
  bool converged = false;
};

// Thrown when the loss stays above divergence_factor times its initial value.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& message, std::vector<LossBreakdown> history)
      : Error(ErrorCode::kDivergence, message), history_(std::move(history)) {}
  const std::vector<LossBreakdown>& history() const { return history_; }

 private:
  std::vector<LossBreakdown> history_;
};

// Constant: median of the valid samples. Sparse interpolation: value of the nearest valid pixel
// (ties go to the smaller row, then column). Results are clamped into `range`.
DenseDepthMap initialize_depth(const SparseDepthMap& sparse, DepthInit method,
                               DepthRange range = kDefaultDepthRange);

// Optional starting point overriding the default initialisation.
struct InitialState {
  std::optional<DenseDepthMap> depth;
  std::vector<Pose6> poses;  // empty means zero motion
};

SnippetEstimate optimize_snippet(const Snippet& s, const OptimizerConfig& cfg, const LossWeights& w,
                                 const InitialState& init = {});

// Frames ordered (t-k, t, t+k); the middle frame is the target and its sparse map feeds fidelity.
SnippetEstimate optimize_snippet(const std::array<Image, 3>& images, const std::array<SparseDepthMap, 3>& sparse,
                                 const Intrinsics& k, const OptimizerConfig& cfg, const LossWeights& w);

// Joint optimisation of the original branch and the branch fed with mirrored inputs.
// The flipped estimate lives in the mirrored frame.
std::pair<SnippetEstimate, SnippetEstimate> optimize_snippet_siamese(const Snippet& s, const OptimizerConfig& cfg,
                                                                     const LossWeights& w,
                                                                     const InitialState& init = {},
                                                                     const InitialState& init_flipped = {});

}  // namespace vlo
