#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "test_support.hpp"
#include "vlo/error.hpp"
#include "vlo/optimizer.hpp"
#include "vlo/synth_scenes.hpp"

using namespace vlo;

namespace {

// Back wall, ground and a side wall, textured in colour.
SceneSpec corridor(const Pose6& pose) {
  SceneSpec s;
  s.k = suite_intrinsics();
  s.planes.push_back({Eigen::Vector3d(0.1, -0.05, 1.0).normalized(), 8.0, 77});
  s.planes.push_back({Eigen::Vector3d(0, 1, 0), 1.5, 77});
  s.planes.push_back({Eigen::Vector3d(-1, 0, 0), 4.0, 77});
  s.gt_pose = pose;
  s.sparsity = 0.05;
  s.seed = 31;
  s.channels = 3;
  return s;
}

double rotation_error_deg(const Pose6& a, const Pose6& b) {
  const Eigen::Matrix3d r = pose_to_transform(a).rotation().transpose() * pose_to_transform(b).rotation();
  return std::acos(std::clamp((r.trace() - 1) / 2, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

SparseDepthMap sparse_from(const Grid& g) { return SparseDepthMap(g); }

}  // namespace

TEST_CASE("constant initialisation uses the median sample") {
  Grid g(3, 4, 1, 0.0);
  g(0, 0) = 4.0;
  g(2, 3) = 6.0;
  const DenseDepthMap d = initialize_depth(sparse_from(g), DepthInit::kConstant);
  for (double v : d.grid().values()) CHECK(v == 5.0);

  g(1, 1) = 100.0;
  CHECK_THROWS_AS(initialize_depth(sparse_from(g), DepthInit::kConstant, DepthRange{0.1, 5.5}), Error);
}

TEST_CASE("nearest-sample initialisation") {
  vlo::test::Rng rng(41);
  const Grid dense = rng.grid(6, 7, 1, 1.0, 50.0);
  CHECK(initialize_depth(sparse_from(dense), DepthInit::kSparseInterpolation).grid() == dense);

  Grid checker(9, 11, 1, 0.0);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 11; ++c)
      if ((r / 3 + c / 3) % 2 == 0 && (r + 2 * c) % 5 == 0) checker(r, c) = rng.uniform(1.0, 50.0);
  const DenseDepthMap got = initialize_depth(sparse_from(checker), DepthInit::kSparseInterpolation);
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 11; ++c) {
      // Brute force over all samples, ties to the smaller row then column.
      long best = -1;
      double want = 0.0;
      for (int rr = 0; rr < 9; ++rr)
        for (int cc = 0; cc < 11; ++cc) {
          if (checker(rr, cc) == 0.0) continue;
          const long d2 = static_cast<long>(rr - r) * (rr - r) + static_cast<long>(cc - c) * (cc - c);
          if (best < 0 || d2 < best) {
            best = d2;
            want = checker(rr, cc);
          }
        }
      CHECK(got(r, c) == want);
    }
  }

  try {
    initialize_depth(sparse_from(Grid(4, 4, 1, 0.0)), DepthInit::kConstant);
    FAIL("empty sparse map accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyMask);
  }
}

TEST_CASE("stationary snippet stays at zero motion") {
  SceneSpec s = corridor(Pose6{});
  s.channels = 1;
  const RenderedSnippet rs = render_snippet(s);
  OptimizerConfig cfg;
  cfg.max_iters = 300;
  InitialState init;
  init.depth = rs.depth;
  const SnippetEstimate e = optimize_snippet(rs.snippet, cfg, LossWeights{}, init);
  for (const Pose6& p : e.poses)
    for (int i = 0; i < Pose6::kSize; ++i) CHECK(std::abs(p[i]) <= 1e-4);
  CHECK(e.loss_history[static_cast<std::size_t>(e.best_iteration)].total <= e.loss_history.front().total);
}

TEST_CASE("recovers a sideways step with a small yaw") {
  const Pose6 gt(0.10, 0, 0, 0, 0.017, 0);
  const RenderedSnippet rs = render_snippet(corridor(gt));
  const SnippetEstimate e = optimize_snippet(rs.snippet, OptimizerConfig{}, suite_weights());
  const Pose6& est = e.poses[1];
  INFO("estimate " << est[0] << " " << est[1] << " " << est[2] << " " << est[3] << " " << est[4] << " " << est[5]);
  CHECK((est.translation() - gt.translation()).norm() <= 0.002);
  CHECK(rotation_error_deg(est, gt) <= 0.05);

  // Depth error at textured pixels.
  const Image& img = rs.snippet.target;
  const auto [gx, gy] = spatial_gradients(img.grid());
  double err = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      bool textured = false;
      for (int ch = 0; ch < img.channels(); ++ch) textured |= gx(r, c, ch) != 0.0 || gy(r, c, ch) != 0.0;
      if (!textured) continue;
      err += std::abs(e.depth(r, c) - rs.depth(r, c)) / rs.depth(r, c);
      ++n;
    }
  CHECK(err / static_cast<double>(n) < 0.02);

  for (double d : e.depth.grid().values()) {
    CHECK(d >= kDefaultDepthRange.min);
    CHECK(d <= kDefaultDepthRange.max);
  }
  CHECK(e.loss_history[static_cast<std::size_t>(e.best_iteration)].total <= e.loss_history.front().total);
}

TEST_CASE("runaway step size is reported as divergence") {
  const RenderedSnippet rs = render_snippet(suite()[5]);
  OptimizerConfig cfg;
  cfg.divergence_patience = 10;
  cfg.max_iters = 500;

  SUBCASE("loss stays above the threshold") {
    cfg.lr = 0.05;
    cfg.divergence_factor = 1.05;
    try {
      optimize_snippet(rs.snippet, cfg, LossWeights{});
      FAIL("divergence not detected");
    } catch (const DivergenceError& e) {
      CHECK(e.code() == ErrorCode::kDivergence);
      CHECK(e.history().size() >= 10);
      CHECK(std::string(e.what()).find("initial value") != std::string::npos);
    }
  }
  SUBCASE("poses leave the region with valid warps") {
    cfg.lr = 0.5;
    try {
      optimize_snippet(rs.snippet, cfg, LossWeights{});
      FAIL("divergence not detected");
    } catch (const DivergenceError& e) {
      CHECK(e.code() == ErrorCode::kDivergence);
      CHECK(!e.history().empty());
    }
  }
}

TEST_CASE("invalid configuration") {
  const RenderedSnippet rs = render_snippet(suite()[0]);
  OptimizerConfig cfg;
  cfg.lr = 0.0;
  CHECK_THROWS_AS(optimize_snippet(rs.snippet, cfg, LossWeights{}), Error);
  cfg = OptimizerConfig{};
  InitialState bad;
  bad.poses.resize(3);
  CHECK_THROWS_AS(optimize_snippet(rs.snippet, cfg, LossWeights{}, bad), Error);
}

TEST_CASE("siamese branches start consistent from mirrored initial states") {
  SceneSpec s = suite()[6];
  const RenderedSnippet rs = render_snippet(s);
  OptimizerConfig cfg;
  cfg.mode = OptimizerMode::kSiamese;
  cfg.max_iters = 200;
  InitialState a, b;
  a.depth = rs.depth;
  a.poses = rs.gt_poses;
  b.depth = hflip(rs.depth);
  for (const Pose6& p : rs.gt_poses) b.poses.push_back(flip_pose(p));
  const auto [orig, flipped] = optimize_snippet_siamese(rs.snippet, cfg, LossWeights{}, a, b);
  CHECK(orig.loss_history.front().dfc == 0.0);
  CHECK(orig.loss_history.front().pfc == 0.0);
  for (std::size_t i = 0; i < orig.poses.size(); ++i) {
    const Pose6 want = flip_pose(orig.poses[i]);
    for (int k = 0; k < Pose6::kSize; ++k) CHECK(std::abs(flipped.poses[i][k] - want[k]) <= 1e-3);
  }
}

TEST_CASE("single-branch optimum commutes with mirroring the snippet") {
  const RenderedSnippet rs = render_snippet(suite()[7]);
  const Snippet mirrored = flip_snippet(rs.snippet, FlipConvention::kPixelCenter);
  const SnippetEstimate a = optimize_snippet(rs.snippet, OptimizerConfig{}, suite_weights());
  const SnippetEstimate b = optimize_snippet(mirrored, OptimizerConfig{}, suite_weights());
  for (std::size_t i = 0; i < a.poses.size(); ++i) {
    const Pose6 want = flip_pose(a.poses[i]);
    for (int k = 0; k < Pose6::kSize; ++k) CHECK(std::abs(b.poses[i][k] - want[k]) <= 1e-2);
  }
}
