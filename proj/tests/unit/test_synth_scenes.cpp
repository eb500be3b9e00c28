#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_support.hpp"
#include "vlo/error.hpp"
#include "vlo/synth_scenes.hpp"

using namespace vlo;

namespace {

SceneSpec fronto_parallel(double z, const Pose6& pose) {
  SceneSpec s;
  s.k = make_intrinsics(100, 100, 63.5, 23.5, 128, 48);
  s.planes.push_back({Eigen::Vector3d(0, 0, 1), z, 99});
  s.gt_pose = pose;
  s.seed = 5;
  return s;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

double angle_deg(const Pose6& p) {
  const Eigen::Matrix3d r = pose_to_transform(p).rotation();
  return std::acos(std::clamp((r.trace() - 1) / 2, -1.0, 1.0)) * 180.0 / std::numbers::pi;
}

}  // namespace

TEST_CASE("zero motion renders identical frames") {
  for (SceneSpec s : suite()) {
    s.gt_pose = Pose6{};
    const RenderedScene r = render(s);
    CHECK(r.source.grid() == r.target.grid());
  }
}

TEST_CASE("pinhole shift of a fronto-parallel plane") {
  const RenderedScene r = render(fronto_parallel(10.0, Pose6(0.5, 0, 0, 0, 0, 0)));
  double worst = 0.0;
  for (int row = 0; row < 48; ++row)
    for (int c = 0; c + 5 < 128; ++c) worst = std::max(worst, std::abs(r.source.grid()(row, c + 5) - r.target.grid()(row, c)));
  CHECK(worst <= 1e-9);
}

TEST_CASE("ground-truth depth matches analytic ray-plane intersection") {
  for (const SceneSpec& s : suite()) {
    const DenseDepthMap d = render_depth(s);
    double worst = 0.0;
    for (int r = 0; r < s.k.height; ++r) {
      for (int c = 0; c < s.k.width; ++c) {
        const Eigen::Vector3d ray((c - s.k.cx) / s.k.fx, (r - s.k.cy) / s.k.fy, 1.0);
        double z = std::numeric_limits<double>::infinity();
        for (const ScenePlane& p : s.planes) {
          const double denom = p.normal.dot(ray);
          if (denom > 0) z = std::min(z, p.offset / denom);
        }
        worst = std::max(worst, std::abs(d.grid()(r, c) - z));
      }
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("suite is deterministic and spans the stated ranges") {
  const auto a = suite(), b = suite();
  REQUIRE(a.size() == 20);
  double t_lo = 1e9, t_hi = 0, r_lo = 1e9, r_hi = 0, s_lo = 1, s_hi = 0;
  std::array<int, 4> planes{};
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].gt_pose == b[i].gt_pose);
    CHECK(a[i].seed == b[i].seed);
    CHECK(render(a[i]).source.grid() == render(b[i]).source.grid());
    const double t = a[i].gt_pose.translation().norm(), r = angle_deg(a[i].gt_pose);
    t_lo = std::min(t_lo, t);
    t_hi = std::max(t_hi, t);
    r_lo = std::min(r_lo, r);
    r_hi = std::max(r_hi, r);
    s_lo = std::min(s_lo, a[i].sparsity);
    s_hi = std::max(s_hi, a[i].sparsity);
    ++planes[a[i].planes.size()];
  }
  CHECK(std::abs(t_lo - 0.05) <= 1e-9);
  CHECK(std::abs(t_hi - 0.5) <= 1e-9);
  CHECK(std::abs(r_lo - 0.2) <= 1e-6);
  CHECK(std::abs(r_hi - 2.0) <= 1e-6);
  CHECK(std::abs(s_lo - 0.02) <= 1e-12);
  CHECK(std::abs(s_hi - 0.10) <= 1e-12);
  CHECK(planes[1] > 0);
  CHECK(planes[2] > 0);
  CHECK(planes[3] > 0);
  CHECK(suite(7)[0].gt_pose != a[0].gt_pose);
}

TEST_CASE("texture has gradients almost everywhere") {
  for (const SceneSpec& s : suite()) {
    const Image img = render(s).target;
    const auto [gx, gy] = spatial_gradients(img.grid());
    std::size_t textured = 0;
    for (int r = 0; r < gx.height(); ++r)
      for (int c = 0; c < gx.width(); ++c) textured += (gx(r, c) != 0.0 || gy(r, c) != 0.0);
    CHECK(static_cast<double>(textured) > 0.95 * gx.height() * gx.width());
  }
}

TEST_CASE("sparse samples") {
  const SceneSpec s = suite()[3];
  const RenderedScene r = render(s);
  const auto n = static_cast<double>(s.k.width * s.k.height);
  CHECK(r.sparse.valid_count() == static_cast<std::size_t>(std::llround(s.sparsity * n)));
  for (int row = 0; row < s.k.height; ++row)
    for (int c = 0; c < s.k.width; ++c)
      if (r.sparse.valid(row, c)) CHECK(r.sparse(row, c) == r.depth.grid()(row, c));
  CHECK(sample_sparse(r.depth, 0.3, 11) == sample_sparse(r.depth, 0.3, 11));
  CHECK_FALSE(sample_sparse(r.depth, 0.3, 11) == sample_sparse(r.depth, 0.3, 12));
  CHECK(sample_sparse(r.depth, 1.0, 1).valid_count() == r.depth.grid().size());
  CHECK(code_of([&] { sample_sparse(r.depth, 0.0, 1); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([&] { sample_sparse(r.depth, 1.5, 1); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("invalid specs") {
  SceneSpec behind = fronto_parallel(10.0, Pose6{});
  behind.planes[0].offset = -2.0;
  CHECK(code_of([&] { render(behind); }) == ErrorCode::kInvalidSpec);

  CHECK(code_of([&] { render(fronto_parallel(10.0, Pose6(0, 0, -12.0, 0, 0, 0))); }) == ErrorCode::kInvalidSpec);
  CHECK(code_of([&] { render(fronto_parallel(200.0, Pose6{})); }) == ErrorCode::kInvalidSpec);

  SceneSpec sparse = fronto_parallel(10.0, Pose6{});
  sparse.sparsity = 0.0;
  CHECK(code_of([&] { render(sparse); }) == ErrorCode::kInvalidSpec);

  SceneSpec open = fronto_parallel(10.0, Pose6{});
  open.planes[0].normal = Eigen::Vector3d(0, 1, 0);
  open.planes[0].offset = 1.5;
  CHECK(code_of([&] { render(open); }) == ErrorCode::kInvalidSpec);
}

TEST_CASE("snippet frames") {
  const SceneSpec s = suite()[4];
  const RenderedSnippet sn = render_snippet(s);
  REQUIRE(sn.gt_poses.size() == 2);
  CHECK(sn.gt_poses[1] == s.gt_pose);
  const TransformSE3 round = compose(pose_to_transform(sn.gt_poses[0]), pose_to_transform(sn.gt_poses[1]));
  CHECK((round.matrix() - Eigen::Matrix4d::Identity()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(sn.snippet.sources[1].grid() == render(s).source.grid());
  CHECK(sn.snippet.sparse == render(s).sparse);

  // Source camera sits 0.5 m behind the target along the optical axis.
  const SceneSpec f = fronto_parallel(10.0, Pose6(0, 0, 0.5, 0, 0, 0));
  const DenseDepthMap far = render_depth(f, Pose6(0, 0, 0.5, 0, 0, 0));
  for (double d : far.grid().values()) CHECK(std::abs(d - 10.5) <= 1e-12);
}
