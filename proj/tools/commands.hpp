#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vlo/geometry.hpp"
#include "vlo/kitti_io.hpp"
#include "vlo/losses.hpp"
#include "vlo/optimizer.hpp"

namespace vlo::cli {

namespace fs = std::filesystem;

struct ProjectArgs {
  fs::path scan;
  fs::path calib;
  int camera = 2;
  int width = 0;
  int height = 0;
  fs::path out;
};

struct ProjectSummary {
  std::size_t valid = 0;
  double min_depth = 0.0;
  double max_depth = 0.0;
};

ProjectSummary cmd_project(const ProjectArgs& a, std::ostream& log);

struct WarpArgs {
  fs::path source;
  fs::path depth;  // 16-bit depth PNG covering every pixel
  fs::path calib;
  int camera = 2;
  Pose6 pose;
  fs::path out;
  fs::path mask_out;  // optional
};

std::size_t cmd_warp(const WarpArgs& a, std::ostream& log);

struct LossArgs {
  fs::path target;
  std::vector<fs::path> sources;
  std::vector<Pose6> poses;
  fs::path depth;
  fs::path sparse;  // optional
  fs::path calib;
  int camera = 2;
  LossWeights weights;
};

LossBreakdown cmd_loss(const LossArgs& a, std::ostream& log);

struct OptimizeArgs {
  fs::path root;
  std::string sequence;
  int camera = 2;
  int first = 0;  // first and last trajectory frame
  int last = 0;
  int pyramid_levels = 0;  // halvings applied to images and intrinsics
  bool fused = true;       // lidar fidelity on
  int jobs = 1;
  LossWeights weights;
  OptimizerConfig optimizer;
  fs::path out;
};

struct OptimizeSummary {
  std::size_t snippets = 0;
  std::size_t diverged = 0;
  Trajectory trajectory;
};

// Centers first..last-1 each estimate the motion to the next frame from the snippet
// (c - 1, c, c + 1); the previous frame is dropped when it precedes the sequence.
OptimizeSummary cmd_optimize(const OptimizeArgs& a, std::ostream& log);

struct EvalArgs {
  fs::path est;
  fs::path gt;
  bool align_scale = false;  // per-snippet scale alignment for monocular estimates
  fs::path out;
};

MetricReport cmd_eval(const EvalArgs& a, std::ostream& log);

struct SampleStatsArgs {
  fs::path root;
  std::string sequence;
  fs::path poses;  // overrides root/sequence when set
  double frame_rate = 10.0;
  SamplerConfig sampler;
  fs::path out;
};

struct SampleStats {
  SpeedHistogram da_off;
  SpeedHistogram da_on;
};

SampleStats cmd_sample_stats(const SampleStatsArgs& a, std::ostream& log);

struct SynthArgs {
  std::uint64_t seed = 2024;
  fs::path out;
};

// One three-frame sequence per suite scene under out/sequences/NN with image_2, velodyne,
// calib.txt and out/poses/NN.txt. Calibration is identity, so scans are camera-frame points.
void cmd_synth(const SynthArgs& a, std::ostream& log);

// Six comma separated numbers.
Pose6 parse_pose(const std::string& text);

}  // namespace vlo::cli
