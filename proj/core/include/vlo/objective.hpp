#pragma once

#include <optional>
#include <span>
#include <vector>

#include "vlo/geometry.hpp"
#include "vlo/imaging.hpp"
#include "vlo/losses.hpp"
#include "vlo/tape.hpp"

namespace vlo {

// Target frame plus source frames; poses map target coordinates into each source.
struct Snippet {
  Image target;
  std::vector<Image> sources;
  SparseDepthMap sparse;  // lidar samples of the target frame
  Intrinsics k;

  void validate() const;
};

// Mirrors every image and the sparse map, and flips the intrinsics.
Snippet flip_snippet(const Snippet& s, FlipConvention convention = FlipConvention::kPixelEdge);

// Tape handles of one branch. `depth` is in meters; it may be a variable or derived from one.
struct BranchVars {
  ad::Var depth;
  std::vector<ad::Var> poses;
};

struct BranchTerms {
  ad::Var vs;
  ad::Var df;  // invalid when fidelity is disabled
  ad::Var ds;
  ad::Var vlo;
};

struct ObjectiveOptions {
  bool use_fidelity = true;
  bool clamp_phi = true;
  PoseConsistencyMode pose_mode = PoseConsistencyMode::kComponentWise;
  std::optional<double> fixed_phi;  // overrides the adaptive weight
};

// lambda_vs L_vs + lambda_df L_df + lambda_ds L_ds for one branch.
BranchTerms branch_terms(ad::Tape& tape, const Snippet& s, const BranchVars& vars, const LossWeights& w,
                         const ObjectiveOptions& opt = {}, std::span<const WarpPlan> frozen = {},
                         std::vector<WarpPlan>* plans_out = nullptr);

struct Objective {
  ad::Var root;
  LossBreakdown breakdown;
};

Objective single_objective(ad::Tape& tape, const Snippet& s, const BranchVars& vars, const LossWeights& w,
                           const ObjectiveOptions& opt = {}, std::span<const WarpPlan> frozen = {},
                           std::vector<WarpPlan>* plans_out = nullptr);

// L_vlo + L_vlo^f + phi (L_dfc + L_pfc); phi is a constant of the current iterate.
Objective siamese_objective(ad::Tape& tape, const Snippet& s, const Snippet& s_flipped, const BranchVars& vars,
                            const BranchVars& vars_flipped, const LossWeights& w, const ObjectiveOptions& opt = {},
                            std::span<const WarpPlan> frozen = {}, std::span<const WarpPlan> frozen_flipped = {},
                            std::vector<WarpPlan>* plans_out = nullptr,
                            std::vector<WarpPlan>* plans_out_flipped = nullptr);

}  // namespace vlo
