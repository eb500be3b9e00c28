#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vlo/geometry.hpp"
#include "vlo/imaging.hpp"
#include "vlo/tape.hpp"

namespace vlo {

// Scaling factors of the objective. Defaults are the published training values.
struct LossWeights {
  double vs = 2.0;       // view synthesis
  double df = 0.2;       // depth fidelity
  double ds = 40.0;      // depth smoothness
  double fc = 2.5;       // flip consistency (lambda_fc inside the adaptive weight)
  double alpha_s = 0.85; // SSIM share of the photometric term
  double alpha_r = 2.0;  // rotation share of the pose consistency term
  double sigma = 0.2;    // temperature of the adaptive weight

  void validate() const;
};

enum class PoseConsistencyMode {
  kComponentWise,  // one absolute value per component
  kSignedSum,      // signed sums inside a single absolute value
};

struct LossBreakdown {
  double vs = 0.0;
  double df = 0.0;
  double ds = 0.0;
  double dfc = 0.0;
  double pfc = 0.0;
  double vlo = 0.0;
  double total = 0.0;
  double phi = 0.0;

  // "vs=... df=... ds=... dfc=... pfc=... vlo=... total=... phi=..."
  std::string to_record() const;
  static LossBreakdown parse_record(std::string_view text);
};

// --- Differentiable building blocks -------------------------------------------------------
// Images and sparse maps passed to these ops are referenced, not copied, by the recorded
// backward closures and must outlive the tape.

// Pose variables are 1x1x6 grids in Pose6 order.
Grid pose_to_grid(const Pose6& p);
Pose6 grid_to_pose(const Grid& g);

struct WarpNode {
  ad::Var image;
  WarpPlan plan;
};

// Bilinear inverse warp of `src` into the target frame. Gradients reach depth and pose.
WarpNode warp_op(ad::Tape& tape, const Image& src, ad::Var depth, ad::Var pose, const Intrinsics& k,
                 const WarpPlan* frozen = nullptr);

// (1 - alpha) * mean L1 over warp-valid pixels + alpha * mean (1 - SSIM) over pixels whose 3x3
// window is entirely warp-valid. Throws kDegenerateWarp when either set is empty.
ad::Var photometric_op(ad::Tape& tape, const Image& target, const WarpNode& warped, double alpha_s);

// Sum over sources of photometric_op. `frozen` (one plan per source) pins sampling cells and masks.
ad::Var view_synthesis_op(ad::Tape& tape, const Image& target, std::span<const Image> sources, ad::Var depth,
                          std::span<const ad::Var> poses, const Intrinsics& k, double alpha_s,
                          std::span<const WarpPlan> frozen = {}, std::vector<WarpPlan>* plans_out = nullptr);

ad::Var depth_fidelity_op(ad::Tape& tape, const SparseDepthMap& sparse, ad::Var depth);
ad::Var smoothness_op(ad::Tape& tape, const Image& image, ad::Var depth);
ad::Var flip_depth_op(ad::Tape& tape, ad::Var depth, ad::Var depth_flipped);
ad::Var flip_pose_op(ad::Tape& tape, ad::Var pose, ad::Var pose_flipped, double alpha_r,
                     PoseConsistencyMode mode = PoseConsistencyMode::kComponentWise);

// --- Value-level API ---------------------------------------------------------------------

double view_synthesis_loss(const Image& target, std::span<const Image> sources, const DenseDepthMap& depth,
                           std::span<const Pose6> poses, const Intrinsics& k, double alpha_s);
// Mean |D - D_hat| over valid sparse pixels. Throws kEmptyMask without any.
double depth_fidelity_loss(const SparseDepthMap& sparse, const DenseDepthMap& pred);
double smoothness_loss(const Image& image, const DenseDepthMap& depth);
double flip_consistency_depth(const DenseDepthMap& pred, const DenseDepthMap& pred_flipped);
double flip_consistency_pose(const Pose6& p, const Pose6& pf, double alpha_r,
                             PoseConsistencyMode mode = PoseConsistencyMode::kComponentWise);

double vlo_loss(double vs, double df, double ds, const LossWeights& w);

// phi = lambda_fc * exp(-L_vs / sigma), optionally capped at 1.
double adaptive_weight(double l_vs, double lambda_fc, double sigma, bool clamp = true);

// L_vlo + L_vlo^f + phi * (L_dfc + L_pfc).
double combine_total(double vlo, double vlo_flipped, double dfc, double pfc, double phi);

// Full siamese total with phi evaluated on the mean L_vs of both branches.
double total_loss(const LossBreakdown& branch, const LossBreakdown& branch_flipped, double dfc, double pfc,
                  const LossWeights& w, bool clamp_phi = true);

}  // namespace vlo
