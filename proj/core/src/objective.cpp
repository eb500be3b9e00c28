#include "vlo/objective.hpp"

#include <array>

#include "vlo/error.hpp"

namespace vlo {

void Snippet::validate() const {
  k.validate();
  if (target.height() != k.height || target.width() != k.width) {
    fail(ErrorCode::kInvalidArgument, "snippet target does not match intrinsics");
  }
  if (sources.empty()) fail(ErrorCode::kInvalidArgument, "snippet needs at least one source view");
  for (const Image& src : sources) {
    if (!src.grid().same_shape(target.grid())) fail(ErrorCode::kInvalidArgument, "snippet frames differ in shape");
  }
  if (sparse.height() != k.height || sparse.width() != k.width) {
    fail(ErrorCode::kInvalidArgument, "sparse depth does not match intrinsics");
  }
}

Snippet flip_snippet(const Snippet& s, FlipConvention convention) {
  Snippet f;
  f.target = hflip(s.target);
  for (const Image& src : s.sources) f.sources.push_back(hflip(src));
  f.sparse = hflip(s.sparse);
  f.k = flip_intrinsics(s.k, convention);
  return f;
}

BranchTerms branch_terms(ad::Tape& tape, const Snippet& s, const BranchVars& vars, const LossWeights& w,
                         const ObjectiveOptions& opt, std::span<const WarpPlan> frozen,
                         std::vector<WarpPlan>* plans_out) {
  BranchTerms t;
  t.vs = view_synthesis_op(tape, s.target, s.sources, vars.depth, vars.poses, s.k, w.alpha_s, frozen, plans_out);
  t.ds = smoothness_op(tape, s.target, vars.depth);
  if (opt.use_fidelity) {
    t.df = depth_fidelity_op(tape, s.sparse, vars.depth);
    const std::array<ad::Var, 3> terms{t.vs, t.df, t.ds};
    const std::array<double, 3> weights{w.vs, w.df, w.ds};
    t.vlo = ad::linear_combination(tape, terms, weights);
  } else {
    const std::array<ad::Var, 2> terms{t.vs, t.ds};
    const std::array<double, 2> weights{w.vs, w.ds};
    t.vlo = ad::linear_combination(tape, terms, weights);
  }
  return t;
}

namespace {

void fill_branch(const ad::Tape& tape, const BranchTerms& t, LossBreakdown& b) {
  b.vs = tape.scalar(t.vs);
  b.df = t.df.valid() ? tape.scalar(t.df) : 0.0;
  b.ds = tape.scalar(t.ds);
  b.vlo = tape.scalar(t.vlo);
}

}  // namespace

Objective single_objective(ad::Tape& tape, const Snippet& s, const BranchVars& vars, const LossWeights& w,
                           const ObjectiveOptions& opt, std::span<const WarpPlan> frozen,
                           std::vector<WarpPlan>* plans_out) {
  const BranchTerms t = branch_terms(tape, s, vars, w, opt, frozen, plans_out);
  Objective o{t.vlo, {}};
  fill_branch(tape, t, o.breakdown);
  o.breakdown.total = o.breakdown.vlo;
  return o;
}

Objective siamese_objective(ad::Tape& tape, const Snippet& s, const Snippet& s_flipped, const BranchVars& vars,
                            const BranchVars& vars_flipped, const LossWeights& w, const ObjectiveOptions& opt,
                            std::span<const WarpPlan> frozen, std::span<const WarpPlan> frozen_flipped,
                            std::vector<WarpPlan>* plans_out, std::vector<WarpPlan>* plans_out_flipped) {
  if (vars.poses.size() != vars_flipped.poses.size()) {
    fail(ErrorCode::kInvalidArgument, "siamese branches need the same number of poses");
  }
  const BranchTerms a = branch_terms(tape, s, vars, w, opt, frozen, plans_out);
  const BranchTerms b = branch_terms(tape, s_flipped, vars_flipped, w, opt, frozen_flipped, plans_out_flipped);
  const ad::Var dfc = flip_depth_op(tape, vars.depth, vars_flipped.depth);
  std::vector<ad::Var> pose_terms;
  for (std::size_t i = 0; i < vars.poses.size(); ++i) {
    pose_terms.push_back(flip_pose_op(tape, vars.poses[i], vars_flipped.poses[i], w.alpha_r, opt.pose_mode));
  }
  const ad::Var pfc = ad::linear_combination(tape, pose_terms, std::vector<double>(pose_terms.size(), 1.0));

  LossBreakdown fb;
  Objective o;
  fill_branch(tape, a, o.breakdown);
  fill_branch(tape, b, fb);
  const double phi =
      opt.fixed_phi ? *opt.fixed_phi : adaptive_weight(0.5 * (o.breakdown.vs + fb.vs), w.fc, w.sigma, opt.clamp_phi);
  const std::array<ad::Var, 4> terms{a.vlo, b.vlo, dfc, pfc};
  const std::array<double, 4> weights{1.0, 1.0, phi, phi};
  o.root = ad::linear_combination(tape, terms, weights);

  // Branch components are reported as the mean of both branches.
  LossBreakdown& r = o.breakdown;
  r.vs = 0.5 * (r.vs + fb.vs);
  r.df = 0.5 * (r.df + fb.df);
  r.ds = 0.5 * (r.ds + fb.ds);
  r.vlo = 0.5 * (r.vlo + fb.vlo);
  r.dfc = tape.scalar(dfc);
  r.pfc = tape.scalar(pfc);
  r.phi = phi;
  r.total = tape.scalar(o.root);
  return o;
}

}  // namespace vlo
