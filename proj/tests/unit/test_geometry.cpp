#include <cmath>
#include <numbers>

#include "doctest.h"
#include "test_support.hpp"
#include "vlo/error.hpp"
#include "vlo/geometry.hpp"

using namespace vlo;
using vlo::test::Rng;

namespace {

double max_entry(const Eigen::MatrixXd& m) { return m.cwiseAbs().maxCoeff(); }

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("pose_to_transform basics") {
  const TransformSE3 id = pose_to_transform(Pose6{});
  CHECK(max_entry(id.matrix() - Eigen::Matrix4d::Identity()) == 0.0);

  const TransformSE3 t = pose_to_transform(Pose6(1, 2, 3, 0, 0, 0));
  CHECK(max_entry(t.rotation() - Eigen::Matrix3d::Identity()) == 0.0);
  CHECK(t.translation() == Eigen::Vector3d(1, 2, 3));

  const TransformSE3 small = pose_to_transform(Pose6(0, 0, 0, 0.01, 0.02, 0.03));
  Eigen::Matrix3d skew;
  skew << 0, -0.03, 0.02, 0.03, 0, -0.01, -0.02, 0.01, 0;
  CHECK(max_entry(small.rotation() - (Eigen::Matrix3d::Identity() + skew)) < 1e-3);
  CHECK(max_entry(small.rotation() - test::oracle_rotation(0.01, 0.02, 0.03)) < 1e-15);
}

TEST_CASE("pose construction rejects invalid values") {
  CHECK(code_of([] { Pose6(std::nan(""), 0, 0, 0, 0, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { Pose6(0, 0, 0, 4.0, 0, 0); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { Pose6(0, 0, 0, 0, 0, std::numbers::pi); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("transform_to_pose round trip") {
  CHECK(transform_to_pose(TransformSE3::identity()) == Pose6{});
  Rng rng(1);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose6 p = rng.pose(5.0, 1.0);
    const Pose6 q = transform_to_pose(pose_to_transform(p));
    for (int j = 0; j < 6; ++j) worst = std::max(worst, std::abs(p[j] - q[j]));
  }
  CHECK(worst <= 1e-9);

  const TransformSE3 gimbal(rot_y(std::numbers::pi / 2 - 1e-8), Eigen::Vector3d::Zero());
  CHECK(code_of([&] { transform_to_pose(gimbal); }) == ErrorCode::kDegenerateAngle);
}

TEST_CASE("compose and invert") {
  Rng rng(2);
  const TransformSE3 a = pose_to_transform(rng.pose(3, 1)), b = pose_to_transform(rng.pose(3, 1));
  CHECK(max_entry(compose(TransformSE3::identity(), a).matrix() - a.matrix()) == 0.0);
  CHECK(max_entry(compose(a, invert(a)).matrix() - Eigen::Matrix4d::Identity()) <= 1e-12);
  CHECK(invert(pose_to_transform(Pose6(1, 2, 3, 0, 0, 0))).translation() == Eigen::Vector3d(-1, -2, -3));

  const Eigen::Matrix4d oracle = a.matrix() * b.matrix();
  const TransformSE3 ab = compose(a, b);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d x(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-10, 10));
    const Eigen::Vector4d y = oracle * Eigen::Vector4d(x.x(), x.y(), x.z(), 1.0);
    worst = std::max(worst, (ab.apply(x) - y.head<3>()).cwiseAbs().maxCoeff());
    worst = std::max(worst, (ab.apply(x) - a.apply(b.apply(x))).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("composition chains stay orthonormal") {
  Rng rng(3);
  TransformSE3 t;
  for (int i = 0; i < 1000; ++i) t = compose(t, pose_to_transform(rng.pose(1, 0.5)));
  CHECK(orthonormality_error(t.rotation()) <= 1e-9);
}

TEST_CASE("TransformSE3 rejects non-orthonormal rotations") {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r(0, 0) = 1.001;
  CHECK(code_of([&] { TransformSE3(r, Eigen::Vector3d::Zero()); }) == ErrorCode::kInvalidArgument);
  CHECK(orthonormality_error(TransformSE3::orthonormalized(r, Eigen::Vector3d::Zero()).rotation()) <= 1e-12);
}

TEST_CASE("pixel_transform") {
  const Intrinsics k = make_intrinsics(100, 100, 150, 60, 300, 120);
  const auto id = pixel_transform({100, 50}, 7.5, Pose6{}, k);
  CHECK(id.valid);
  CHECK(id.pixel.x() == doctest::Approx(100).epsilon(1e-15));
  CHECK(id.pixel.y() == doctest::Approx(50).epsilon(1e-15));
  CHECK(id.depth == 7.5);

  const auto shift = pixel_transform({200, 100}, 10.0, Pose6(0.5, 0, 0, 0, 0, 0), k);
  CHECK(std::abs(shift.pixel.x() - 205.0) < 1e-12);
  CHECK(std::abs(shift.pixel.y() - 100.0) < 1e-12);
  CHECK(shift.depth == doctest::Approx(10.0));

  Rng rng(4);
  double worst = 0.0;
  for (int i = 0; i < 500; ++i) {
    const Pose6 p = rng.pose(1.0, 0.3);
    const double u = rng.uniform(0, 299), v = rng.uniform(0, 119), d = rng.uniform(2, 60);
    const auto r = pixel_transform({u, v}, d, p, k);
    const Eigen::Vector3d o = test::oracle_pixel(u, v, d, p, k);
    if (o.z() <= kMinSourceDepth) continue;
    worst = std::max({worst, std::abs(r.pixel.x() - o.x()), std::abs(r.pixel.y() - o.y())});
  }
  CHECK(worst <= 1e-9);

  CHECK_FALSE(pixel_transform({150, 60}, 5.0, Pose6(0, 0, -6.0, 0, 0, 0), k).valid);
}

TEST_CASE("flip_pose") {
  CHECK(flip_pose(Pose6(1, 2, 3, 0.1, 0.2, 0.3)) == Pose6(-1, 2, 3, 0.1, -0.2, -0.3));
  CHECK(flip_pose(Pose6{}) == Pose6{});
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    const Pose6 p = rng.pose(2, 1);
    CHECK(flip_pose(flip_pose(p)) == p);
  }
}

TEST_CASE("flip_intrinsics") {
  const Intrinsics k = make_intrinsics(100, 100, 300, 90, 624, 180);
  const Intrinsics f = flip_intrinsics(k);
  CHECK(f.cx == 324.0);
  CHECK(f.fx == k.fx);
  CHECK(f.fy == k.fy);
  CHECK(f.cy == k.cy);
  CHECK(flip_intrinsics(f) == k);
  CHECK(flip_intrinsics(make_intrinsics(100, 100, 312, 90, 624, 180)).cx == 312.0);
  CHECK(flip_intrinsics(k, FlipConvention::kPixelCenter).cx == 323.0);
  CHECK(flip_intrinsics(flip_intrinsics(k, FlipConvention::kPixelCenter), FlipConvention::kPixelCenter) == k);
}

TEST_CASE("flip conjugation") {
  Eigen::Matrix4d f = Eigen::Matrix4d::Identity();
  f(0, 0) = -1;
  Rng rng(6);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Pose6 p = rng.pose(5, 3.0);
    worst = std::max(worst, max_entry(pose_to_transform(flip_pose(p)).matrix() - f * pose_to_transform(p).matrix() * f));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("mirrored pixel transform") {
  Rng rng(7);
  for (FlipConvention conv : {FlipConvention::kPixelEdge, FlipConvention::kPixelCenter}) {
    const Intrinsics k = make_intrinsics(120, 110, 170.3, 60.2, 320, 120);
    const Intrinsics kf = flip_intrinsics(k, conv);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const Pose6 p = rng.pose(0.5, 0.1);
      const double u = rng.uniform(1, 318), v = rng.uniform(0, 119), d = rng.uniform(3, 50);
      const auto a = pixel_transform({u, v}, d, p, k);
      const auto b = pixel_transform({mirror_u(u, k.width, conv), v}, d, flip_pose(p), kf);
      worst = std::max({worst, std::abs(mirror_u(a.pixel.x(), k.width, conv) - b.pixel.x()),
                        std::abs(a.pixel.y() - b.pixel.y())});
    }
    CHECK(worst <= 1e-9);
  }
}

TEST_CASE("intrinsics validation") {
  CHECK(code_of([] { make_intrinsics(0, 1, 1, 1, 10, 10); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { make_intrinsics(1, 1, 10, 1, 10, 10); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { make_intrinsics(1, 1, 1, -1, 10, 10); }) == ErrorCode::kInvalidArgument);
}
