#include <benchmark/benchmark.h>

#include <random>

#include "vlo/evaluation.hpp"
#include "vlo/lidar_projection.hpp"
#include "vlo/objective.hpp"
#include "vlo/optimizer.hpp"
#include "vlo/synth_scenes.hpp"

namespace {

using namespace vlo;

const RenderedSnippet& scene() {
  static const RenderedSnippet rs = render_snippet(suite()[7]);
  return rs;
}

void BM_PlanWarp(benchmark::State& st) {
  const RenderedSnippet& rs = scene();
  for (auto _ : st) benchmark::DoNotOptimize(plan_warp(rs.depth.grid(), rs.gt_poses[1], rs.snippet.k));
}
BENCHMARK(BM_PlanWarp);

void BM_Ssim(benchmark::State& st) {
  const RenderedSnippet& rs = scene();
  const WarpResult w = warp_source_to_target(rs.snippet.sources[1], rs.depth, rs.gt_poses[1], rs.snippet.k);
  for (auto _ : st) benchmark::DoNotOptimize(ssim(rs.snippet.target, w.image));
}
BENCHMARK(BM_Ssim);

// One forward and backward pass of the single-branch objective.
void BM_ObjectiveGradient(benchmark::State& st) {
  SceneSpec spec = suite()[7];
  spec.channels = static_cast<int>(st.range(0));
  const RenderedSnippet rs = render_snippet(spec);
  const Grid log_depth = [&] {
    Grid g = rs.depth.grid();
    for (double& x : g.values()) x = std::log(x);
    return g;
  }();
  const LossWeights w = suite_weights();
  for (auto _ : st) {
    ad::Tape tape;
    BranchVars v;
    v.depth = ad::exp(tape, tape.variable(log_depth));
    for (const Pose6& p : rs.gt_poses) v.poses.push_back(tape.variable(pose_to_grid(p)));
    const Objective o = single_objective(tape, rs.snippet, v, w);
    tape.backward(o.root);
    benchmark::DoNotOptimize(o.breakdown.total);
  }
}
BENCHMARK(BM_ObjectiveGradient)->Arg(1)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_OptimizeSnippet(benchmark::State& st) {
  const RenderedSnippet& rs = scene();
  OptimizerConfig cfg;
  cfg.max_iters = static_cast<int>(st.range(0));
  cfg.convergence_tol = 0.0;
  for (auto _ : st) benchmark::DoNotOptimize(optimize_snippet(rs.snippet, cfg, suite_weights()).poses);
  st.SetItemsProcessed(st.iterations() * st.range(0));
}
BENCHMARK(BM_OptimizeSnippet)->Arg(200)->Unit(benchmark::kMillisecond);

void BM_ProjectScan(benchmark::State& st) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-40.0, 40.0), z(1.0, 80.0);
  PointCloud cloud;
  for (int i = 0; i < 120000; ++i) cloud.points.emplace_back(u(rng), u(rng) / 4, z(rng));
  const Intrinsics k = make_intrinsics(721.5, 721.5, 609.6, 172.9, 1242, 375);
  for (auto _ : st) benchmark::DoNotOptimize(project_to_sparse_depth(cloud, {TransformSE3::identity()}, k));
}
BENCHMARK(BM_ProjectScan)->Unit(benchmark::kMillisecond);

void BM_KittiMetrics(benchmark::State& st) {
  std::vector<Pose6> rel(static_cast<std::size_t>(st.range(0)), Pose6(0.01, 0, -1.0, 0, 0.002, 0));
  const Trajectory gt = accumulate(rel);
  for (Pose6& p : rel) p = Pose6(p.tx(), p.ty(), p.tz() * 1.01, p.rx(), p.ry(), p.rz());
  const Trajectory est = accumulate(rel);
  for (auto _ : st) benchmark::DoNotOptimize(kitti_metrics(est, gt));
}
BENCHMARK(BM_KittiMetrics)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
