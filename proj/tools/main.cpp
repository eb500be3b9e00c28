#include <cstdlib>
#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "commands.hpp"
#include "vlo/error.hpp"

namespace {

using namespace vlo;
using namespace vlo::cli;

void add_weights(CLI::App* cmd, LossWeights& w) {
  cmd->add_option("--w-vs", w.vs, "view synthesis weight")->capture_default_str();
  cmd->add_option("--w-df", w.df, "depth fidelity weight")->capture_default_str();
  cmd->add_option("--w-ds", w.ds, "depth smoothness weight")->capture_default_str();
  cmd->add_option("--w-fc", w.fc, "flip consistency weight")->capture_default_str();
  cmd->add_option("--alpha-s", w.alpha_s, "SSIM share of the photometric term")->capture_default_str();
  cmd->add_option("--alpha-r", w.alpha_r, "rotation share of the pose consistency term")->capture_default_str();
  cmd->add_option("--sigma", w.sigma, "adaptive weight temperature")->capture_default_str();
}

void add_optimizer(CLI::App* cmd, OptimizerConfig& o, bool& no_clamp, bool& literal) {
  cmd->add_option("--lr", o.lr, "Adam learning rate")->capture_default_str();
  cmd->add_option("--lr-halving", o.lr_halving_interval, "iterations between learning-rate halvings")
      ->capture_default_str();
  cmd->add_option("--iters", o.max_iters, "iteration cap")->capture_default_str();
  cmd->add_option("--conv-tol", o.convergence_tol, "relative loss change for convergence")->capture_default_str();
  cmd->add_option("--conv-window", o.convergence_window, "iterations spanned by the convergence test")
      ->capture_default_str();
  cmd->add_option("--mode", o.mode, "single or siamese")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, OptimizerMode>{{"single", OptimizerMode::kSingle}, {"siamese", OptimizerMode::kSiamese}},
          CLI::ignore_case));
  cmd->add_option("--depth-init", o.depth_init, "sparse or constant")
      ->transform(CLI::CheckedTransformer(std::map<std::string, DepthInit>{{"sparse", DepthInit::kSparseInterpolation},
                                                                           {"constant", DepthInit::kConstant}},
                                          CLI::ignore_case));
  cmd->add_flag("--no-phi-clamp", no_clamp, "do not cap the adaptive weight at 1");
  cmd->add_flag("--literal-pose-consistency", literal, "signed sums inside one absolute value");
}

std::string dataset_root_default() {
  const char* env = std::getenv("VLO_DATASET_ROOT");
  return env ? env : "";
}

}  // namespace

int main(int argc, char** argv) {
#ifdef __GLIBC__
  mallopt(M_TOP_PAD, 16 << 20);
#endif
  CLI::App app{"Direct visual-lidar odometry toolkit"};
  app.set_config("--config", "", "key = value file; command-line flags take precedence");
  app.require_subcommand(1);

  ProjectArgs pa;
  auto* project = app.add_subcommand("project", "project a velodyne scan to a sparse depth PNG");
  project->add_option("--scan", pa.scan)->required()->check(CLI::ExistingFile);
  project->add_option("--calib", pa.calib)->required()->check(CLI::ExistingFile);
  project->add_option("--camera", pa.camera)->capture_default_str();
  project->add_option("--width", pa.width)->required();
  project->add_option("--height", pa.height)->required();
  project->add_option("--out", pa.out)->required();

  WarpArgs wa;
  std::string warp_pose;
  auto* warp = app.add_subcommand("warp", "inverse-warp a source image into the target frame");
  warp->add_option("--source", wa.source)->required()->check(CLI::ExistingFile);
  warp->add_option("--depth", wa.depth, "16-bit target depth PNG")->required()->check(CLI::ExistingFile);
  warp->add_option("--calib", wa.calib)->required()->check(CLI::ExistingFile);
  warp->add_option("--camera", wa.camera)->capture_default_str();
  warp->add_option("--pose", warp_pose, "tx,ty,tz,rx,ry,rz (target to source)")->required();
  warp->add_option("--out", wa.out)->required();
  warp->add_option("--mask-out", wa.mask_out);

  LossArgs la;
  std::vector<std::string> loss_poses;
  auto* loss = app.add_subcommand("loss", "evaluate the single-branch objective");
  loss->add_option("--target", la.target)->required()->check(CLI::ExistingFile);
  loss->add_option("--source", la.sources)->required()->check(CLI::ExistingFile);
  loss->add_option("--pose", loss_poses, "one per source")->required();
  loss->add_option("--depth", la.depth)->required()->check(CLI::ExistingFile);
  loss->add_option("--sparse", la.sparse)->check(CLI::ExistingFile);
  loss->add_option("--calib", la.calib)->required()->check(CLI::ExistingFile);
  loss->add_option("--camera", la.camera)->capture_default_str();
  add_weights(loss, la.weights);

  OptimizeArgs oa;
  std::string root = dataset_root_default();
  bool mono = false, no_clamp = false, literal = false;
  auto* optimize = app.add_subcommand("optimize", "estimate frame-to-frame motion over a frame range");
  optimize->add_option("--root", root, "dataset root (default $VLO_DATASET_ROOT)");
  optimize->add_option("--sequence", oa.sequence)->required();
  optimize->add_option("--camera", oa.camera)->capture_default_str();
  optimize->add_option("--first", oa.first, "first frame")->capture_default_str();
  optimize->add_option("--last", oa.last, "last frame")->required();
  optimize->add_option("--pyramid", oa.pyramid_levels, "image halvings before optimizing")->capture_default_str();
  optimize->add_flag("--mono", mono, "disable the lidar fidelity term");
  optimize->add_option("--jobs", oa.jobs, "snippets optimized in parallel")->capture_default_str();
  optimize->add_option("--out", oa.out)->required();
  add_weights(optimize, oa.weights);
  add_optimizer(optimize, oa.optimizer, no_clamp, literal);

  EvalArgs ea;
  auto* eval = app.add_subcommand("eval", "KITTI relative-error metrics");
  eval->add_option("--est", ea.est)->required()->check(CLI::ExistingFile);
  eval->add_option("--gt", ea.gt)->required()->check(CLI::ExistingFile);
  eval->add_flag("--align-scale", ea.align_scale, "per-snippet scale alignment (monocular estimates)");
  eval->add_option("--out", ea.out);

  SampleStatsArgs sa;
  std::string stats_root = dataset_root_default();
  auto* stats = app.add_subcommand("sample-stats", "snippet speed histograms with and without augmentation");
  stats->add_option("--root", stats_root, "dataset root (default $VLO_DATASET_ROOT)");
  stats->add_option("--sequence", sa.sequence);
  stats->add_option("--poses", sa.poses, "pose file used instead of a dataset sequence")->check(CLI::ExistingFile);
  stats->add_option("--frame-rate", sa.frame_rate)->capture_default_str();
  stats->add_option("--p-wide", sa.sampler.p_wide)->capture_default_str();
  stats->add_option("--min-speed", sa.sampler.min_speed, "km/h")->capture_default_str();
  stats->add_option("--seed", sa.sampler.seed)->capture_default_str();
  stats->add_option("--out", sa.out);

  SynthArgs ya;
  auto* synth = app.add_subcommand("synth", "write the synthetic suite as a KITTI-style dataset");
  synth->add_option("--seed", ya.seed)->capture_default_str();
  synth->add_option("--out", ya.out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*project) {
      cmd_project(pa, std::cout);
    } else if (*warp) {
      wa.pose = parse_pose(warp_pose);
      cmd_warp(wa, std::cout);
    } else if (*loss) {
      for (const auto& p : loss_poses) la.poses.push_back(parse_pose(p));
      cmd_loss(la, std::cout);
    } else if (*optimize) {
      if (root.empty()) throw Error(ErrorCode::kInvalidArgument, "no dataset root: pass --root or set VLO_DATASET_ROOT");
      oa.root = root;
      oa.fused = !mono;
      oa.optimizer.objective.clamp_phi = !no_clamp;
      if (literal) oa.optimizer.objective.pose_mode = PoseConsistencyMode::kSignedSum;
      oa.weights.validate();
      oa.optimizer.validate();
      const OptimizeSummary s = cmd_optimize(oa, std::cout);
      (void)s;
    } else if (*eval) {
      cmd_eval(ea, std::cout);
    } else if (*stats) {
      if (sa.poses.empty()) {
        if (stats_root.empty() || sa.sequence.empty()) {
          throw Error(ErrorCode::kInvalidArgument, "pass --poses, or --sequence with --root / VLO_DATASET_ROOT");
        }
        sa.root = stats_root;
      }
      cmd_sample_stats(sa, std::cout);
    } else if (*synth) {
      cmd_synth(ya, std::cout);
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
