#include "commands.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "vlo/error.hpp"
#include "vlo/evaluation.hpp"
#include "vlo/lidar_projection.hpp"
#include "vlo/png_io.hpp"
#include "vlo/synth_scenes.hpp"

namespace vlo::cli {

namespace {

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::kIo, "cannot write " + path.string());
  f << text;
  if (!f) fail(ErrorCode::kIo, "write failed for " + path.string());
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

std::string frame_name(int i, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06d%s", i, ext);
  return buf;
}

std::string pose_text(const Pose6& p) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (int i = 0; i < Pose6::kSize; ++i) os << (i ? " " : "") << p[i];
  return os.str();
}

Intrinsics pyramid(Intrinsics k, int levels) {
  for (int i = 0; i < levels; ++i) k = downsample2(k);
  return k;
}

Image pyramid(Image img, int levels) {
  for (int i = 0; i < levels; ++i) img = downsample2(img);
  return img;
}

}  // namespace

Pose6 parse_pose(const std::string& text) {
  std::array<double, Pose6::kSize> v{};
  std::string s = text;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::istringstream is(s);
  for (auto& x : v) {
    if (!(is >> x)) fail(ErrorCode::kParse, "pose needs six numbers: '" + text + "'");
  }
  std::string rest;
  if (is >> rest) fail(ErrorCode::kParse, "pose needs six numbers: '" + text + "'");
  return Pose6(v);
}

ProjectSummary cmd_project(const ProjectArgs& a, std::ostream& log) {
  const KittiCalib calib = read_calib(a.calib);
  const Intrinsics k = calib.intrinsics(a.camera, a.width, a.height);
  const PointCloud cloud = read_velodyne_bin(a.scan);
  const SparseDepthMap map = project_to_sparse_depth(cloud, calib.velo_to_cam(a.camera), k);
  ensure_parent(a.out);
  write_depth_png(a.out, map.grid());

  ProjectSummary s;
  s.valid = map.valid_count();
  bool first = true;
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      if (!map.valid(r, c)) continue;
      s.min_depth = first ? map(r, c) : std::min(s.min_depth, map(r, c));
      s.max_depth = first ? map(r, c) : std::max(s.max_depth, map(r, c));
      first = false;
    }
  }
  log << "points=" << cloud.size() << " valid=" << s.valid << " min_depth=" << s.min_depth
      << " max_depth=" << s.max_depth << "\n";
  return s;
}

std::size_t cmd_warp(const WarpArgs& a, std::ostream& log) {
  const Image src = read_image_png(a.source);
  const SparseDepthMap raw = read_depth_png(a.depth);
  if (raw.valid_count() != static_cast<std::size_t>(raw.height()) * raw.width()) {
    fail(ErrorCode::kInvalidArgument, a.depth.string() + ": dense depth has missing pixels");
  }
  const Intrinsics k = read_calib(a.calib).intrinsics(a.camera, src.width(), src.height());
  const WarpResult w = warp_source_to_target(src, DenseDepthMap(raw.grid()), a.pose, k);
  ensure_parent(a.out);
  write_image_png(a.out, w.image);
  if (!a.mask_out.empty()) {
    ensure_parent(a.mask_out);
    write_mask_png(a.mask_out, w.mask);
  }
  log << "valid=" << w.mask.count() << "\n";
  return w.mask.count();
}

LossBreakdown cmd_loss(const LossArgs& a, std::ostream& log) {
  if (a.sources.size() != a.poses.size()) fail(ErrorCode::kInvalidArgument, "need one pose per source image");
  Snippet s;
  s.target = read_image_png(a.target);
  for (const auto& p : a.sources) s.sources.push_back(read_image_png(p));
  s.k = read_calib(a.calib).intrinsics(a.camera, s.target.width(), s.target.height());
  const SparseDepthMap raw = read_depth_png(a.depth);
  if (raw.valid_count() != static_cast<std::size_t>(raw.height()) * raw.width()) {
    fail(ErrorCode::kInvalidArgument, a.depth.string() + ": dense depth has missing pixels");
  }
  ObjectiveOptions opt;
  if (a.sparse.empty()) {
    s.sparse = SparseDepthMap(s.k.height, s.k.width);
    opt.use_fidelity = false;
  } else {
    s.sparse = read_depth_png(a.sparse);
  }
  ad::Tape tape;
  BranchVars vars;
  vars.depth = tape.constant(raw.grid());
  for (const Pose6& p : a.poses) vars.poses.push_back(tape.constant(pose_to_grid(p)));
  const LossBreakdown b = single_objective(tape, s, vars, a.weights, opt).breakdown;
  log << b.to_record() << "\n";
  return b;
}

OptimizeSummary cmd_optimize(const OptimizeArgs& a, std::ostream& log) {
  OptimizeSummary out;
  if (a.jobs < 1) fail(ErrorCode::kInvalidArgument, "--jobs must be at least 1");
  const SequenceIndex seq = load_sequence(a.root, a.sequence, a.camera);
  if (a.out.empty()) fail(ErrorCode::kInvalidArgument, "optimize needs an output directory");
  fs::create_directories(a.out / "losses");

  const int n = static_cast<int>(seq.images.size());
  const int first = std::max(a.first, 0);
  const int last = std::min(a.last, n - 1);
  std::vector<int> centers;
  for (int c = first; c < last; ++c) centers.push_back(c);

  if (!centers.empty() && a.fused && seq.scans.empty()) {
    fail(ErrorCode::kIo, "fused mode needs lidar scans in " + (a.root / "sequences" / a.sequence / "velodyne").string() +
                             " (or pass --mono)");
  }
  const Intrinsics k = pyramid(seq.k, a.pyramid_levels);
  OptimizerConfig cfg = a.optimizer;
  cfg.objective.use_fidelity = a.fused;

  struct Result {
    Pose6 pose;
    bool diverged = false;
    std::string message;
    SnippetEstimate estimate;
  };
  std::vector<Result> results(centers.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;

  auto work = [&] {
    for (std::size_t j = next++; j < centers.size(); j = next++) {
      const int c = centers[j];
      Snippet s;
      s.k = k;
      s.target = pyramid(read_image_png(seq.images[static_cast<std::size_t>(c)]), a.pyramid_levels);
      if (c > 0) s.sources.push_back(pyramid(read_image_png(seq.images[static_cast<std::size_t>(c - 1)]), a.pyramid_levels));
      s.sources.push_back(pyramid(read_image_png(seq.images[static_cast<std::size_t>(c + 1)]), a.pyramid_levels));
      InitialState init;
      if (a.fused) {
        s.sparse = project_to_sparse_depth(read_velodyne_bin(seq.scans[static_cast<std::size_t>(c)]), seq.velo_to_cam, k);
      } else {
        s.sparse = SparseDepthMap(k.height, k.width);
        init.depth = DenseDepthMap(k.height, k.width, 10.0);
      }
      Result& r = results[j];
      try {
        r.estimate = cfg.mode == OptimizerMode::kSiamese ? optimize_snippet_siamese(s, cfg, a.weights, init).first
                                                         : optimize_snippet(s, cfg, a.weights, init);
        r.pose = r.estimate.poses.back();
      } catch (const DivergenceError& e) {
        r.diverged = true;
        r.message = e.what();
        r.estimate.loss_history = e.history();
      }
      std::lock_guard lock(log_mutex);
      log << "frame " << c << (r.diverged ? " diverged: " + r.message : " done") << "\n";
    }
  };
  std::vector<std::thread> pool;
  const int workers = std::min<int>(a.jobs, static_cast<int>(std::max<std::size_t>(centers.size(), 1)));
  for (int i = 1; i < workers; ++i) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::ostringstream est;
  est << "# frame next status best_iteration iterations converged tx ty tz rx ry rz\n";
  std::vector<Pose6> relative;
  for (std::size_t j = 0; j < centers.size(); ++j) {
    const Result& r = results[j];
    const int c = centers[j];
    out.diverged += r.diverged ? 1 : 0;
    relative.push_back(r.pose);
    est << c << ' ' << c + 1 << ' ' << (r.diverged ? "diverged" : "ok") << ' ' << r.estimate.best_iteration << ' '
        << r.estimate.loss_history.size() << ' ' << (r.estimate.converged ? 1 : 0) << ' ' << pose_text(r.pose) << "\n";
    std::string hist;
    for (const LossBreakdown& b : r.estimate.loss_history) hist += b.to_record() + "\n";
    write_text(a.out / "losses" / frame_name(c, ".txt"), hist);
  }
  out.snippets = centers.size();
  out.trajectory = centers.empty() ? Trajectory() : accumulate(relative);
  write_text(a.out / "estimates.txt", est.str());
  write_text(a.out / "trajectory.txt", format_poses(out.trajectory));
  if (out.diverged) log << "warning: " << out.diverged << " diverged snippet(s) skipped (identity motion used)\n";
  log << "snippets=" << out.snippets << " diverged=" << out.diverged << "\n";
  return out;
}

MetricReport cmd_eval(const EvalArgs& a, std::ostream& log) {
  const Trajectory gt = read_poses(a.gt);
  Trajectory est = read_poses(a.est);
  if (est.size() != gt.size()) {
    fail(ErrorCode::kInvalidArgument, "trajectory lengths differ: " + std::to_string(est.size()) + " estimated vs " +
                                          std::to_string(gt.size()) + " ground truth");
  }
  if (a.align_scale) est = scale_align(est, gt, ScaleMode::kPerSnippet);
  MetricReport r = kitti_metrics(est, gt);
  const std::vector<LengthStats> axes = per_axis_errors(est, gt);
  for (std::size_t i = 0; i < r.per_length.size() && i < axes.size(); ++i) r.per_length[i].axes = axes[i].axes;
  if (!a.out.empty()) {
    write_text(a.out / "metrics.txt", format_metric_table(r));
    write_text(a.out / "metrics.rec", format_metric_record(r));
    write_text(a.out / "length_curve.txt", format_length_curve(r));
    write_text(a.out / "axis_curve.txt", format_axis_curve(r));
  }
  log << format_metric_table(r);
  return r;
}

SampleStats cmd_sample_stats(const SampleStatsArgs& a, std::ostream& log) {
  Trajectory traj;
  double rate = a.frame_rate;
  if (!a.poses.empty()) {
    traj = read_poses(a.poses);
  } else {
    const SequenceIndex seq = load_sequence(a.root, a.sequence);
    if (!seq.gt_poses) fail(ErrorCode::kIo, "no ground-truth poses under " + (a.root / "poses").string());
    traj = *seq.gt_poses;
    rate = seq.frame_rate;
  }
  SampleStats s;
  const SamplerConfig off{0.0, 0.0, a.sampler.seed};
  const auto off_samples = sample_snippets(traj, rate, off);
  const auto on_samples = sample_snippets(traj, rate, a.sampler);
  s.da_off = speed_histogram(off_samples);
  s.da_on = speed_histogram(on_samples);
  if (!a.out.empty()) {
    write_text(a.out / "hist_da_off.txt", format_histogram(s.da_off));
    write_text(a.out / "hist_da_on.txt", format_histogram(s.da_on));
  }
  log << "snippets da_off=" << off_samples.size() << " da_on=" << on_samples.size() << "\n";
  return s;
}

void cmd_synth(const SynthArgs& a, std::ostream& log) {
  if (a.out.empty()) fail(ErrorCode::kInvalidArgument, "synth needs an output directory");
  const std::vector<SceneSpec> specs = suite(a.seed);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const SceneSpec& spec = specs[i];
    char id[8];
    std::snprintf(id, sizeof id, "%02zu", i);
    const fs::path dir = a.out / "sequences" / id;
    fs::create_directories(dir / "image_2");
    fs::create_directories(dir / "velodyne");

    KittiCalib calib;
    Projection p = Projection::Zero();
    p.leftCols<3>() = spec.k.matrix();
    calib.p.fill(p);
    write_text(dir / "calib.txt", format_calib(calib));

    const Pose6 prev = transform_to_pose(invert(pose_to_transform(spec.gt_pose)));
    const std::array<Pose6, 3> views{prev, Pose6{}, spec.gt_pose};
    for (int f = 0; f < 3; ++f) {
      write_image_png(dir / "image_2" / frame_name(f, ".png"), render_view(spec, views[static_cast<std::size_t>(f)]), 16);
      const DenseDepthMap depth = render_depth(spec, views[static_cast<std::size_t>(f)]);
      const std::uint64_t seed = f == 1 ? spec.seed : spec.seed + static_cast<std::uint64_t>(f) + 1;
      write_velodyne_bin(dir / "velodyne" / frame_name(f, ".bin"),
                         back_project(sample_sparse(depth, spec.sparsity, seed), spec.k));
    }
    const std::array<Pose6, 2> motion{spec.gt_pose, spec.gt_pose};
    write_text(a.out / "poses" / (std::string(id) + ".txt"), format_poses(accumulate(motion)));
  }
  log << "scenes=" << specs.size() << " out=" << a.out.string() << "\n";
}

}  // namespace vlo::cli
