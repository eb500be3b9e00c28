#include <cmath>
#include <numbers>

#include <Eigen/LU>

#include "doctest.h"
#include "test_support.hpp"
#include "vlo/error.hpp"
#include "vlo/evaluation.hpp"

using namespace vlo;
using vlo::test::Rng;

namespace {

// Gently curving drive: about 1 m per frame with small heading changes.
Trajectory random_drive(Rng& rng, int frames) {
  std::vector<Pose6> rel;
  for (int i = 0; i + 1 < frames; ++i) {
    rel.emplace_back(rng.uniform(-0.05, 0.05), rng.uniform(-0.02, 0.02), -rng.uniform(0.8, 1.2),
                     rng.uniform(-0.002, 0.002), rng.uniform(-0.02, 0.02), rng.uniform(-0.002, 0.002));
  }
  return accumulate(rel);
}

Trajectory straight(int frames, double step) {
  std::vector<TransformSE3> poses;
  for (int i = 0; i < frames; ++i) poses.emplace_back(Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, step * i));
  return Trajectory(std::move(poses));
}

// Independent per-length average of |E| components, ZYX Euler angles read off the matrix.
std::vector<std::array<double, 6>> oracle_axes(const Trajectory& est, const Trajectory& gt) {
  std::vector<std::array<double, 6>> sums(kKittiLengths.size());
  std::vector<int> counts(kKittiLengths.size(), 0);
  std::vector<double> dist{0.0};
  for (std::size_t i = 1; i < gt.size(); ++i) {
    dist.push_back(dist.back() + (gt[i].matrix().block<3, 1>(0, 3) - gt[i - 1].matrix().block<3, 1>(0, 3)).norm());
  }
  for (std::size_t first = 0; first < gt.size(); first += 10) {
    for (std::size_t li = 0; li < kKittiLengths.size(); ++li) {
      std::size_t last = first;
      while (last < gt.size() && dist[last] < dist[first] + kKittiLengths[li]) ++last;
      if (last == gt.size()) continue;
      const Eigen::Matrix4d rg = gt[first].matrix().inverse() * gt[last].matrix();
      const Eigen::Matrix4d re = est[first].matrix().inverse() * est[last].matrix();
      const Eigen::Matrix4d e = rg.inverse() * re;
      const double len = kKittiLengths[li];
      const std::array<double, 6> v{std::abs(e(0, 3)),
                                    std::abs(e(1, 3)),
                                    std::abs(e(2, 3)),
                                    std::abs(std::atan2(e(2, 1), e(2, 2))),
                                    std::abs(std::asin(-e(2, 0))),
                                    std::abs(std::atan2(e(1, 0), e(0, 0)))};
      for (std::size_t a = 0; a < 6; ++a) sums[li][a] += v[a] / len;
      ++counts[li];
    }
  }
  for (std::size_t li = 0; li < sums.size(); ++li) {
    if (counts[li] == 0) continue;
    for (std::size_t a = 0; a < 6; ++a) {
      sums[li][a] *= (a < 3 ? 100.0 : 18000.0 / std::numbers::pi) / counts[li];
    }
  }
  return sums;
}

}  // namespace

TEST_CASE("accumulate") {
  const std::vector<Pose6> zeros(5);
  const Trajectory id = accumulate(zeros);
  REQUIRE(id.size() == 6);
  for (const auto& t : id.poses()) CHECK(t.matrix() == Eigen::Matrix4d::Identity());

  const std::vector<Pose6> forward(7, Pose6(0, 0, 1, 0, 0, 0));
  const Trajectory line = accumulate(forward);
  for (std::size_t i = 0; i < line.size(); ++i) {
    CHECK(line[i].translation().norm() == static_cast<double>(i));
    CHECK(line.path_lengths()[i] == static_cast<double>(i));
  }

  Rng rng(51);
  const Trajectory gt = random_drive(rng, 200);
  const Trajectory back = accumulate(decompose(gt));
  double worst = 0.0;
  for (std::size_t i = 0; i < gt.size(); ++i) worst = std::max(worst, (back[i].matrix() - gt[i].matrix()).cwiseAbs().maxCoeff());
  CHECK(worst <= 1e-9);
}

TEST_CASE("scale_align") {
  Rng rng(52);
  const Trajectory gt = random_drive(rng, 100);
  for (ScaleMode mode : {ScaleMode::kPerSnippet, ScaleMode::kGlobal}) {
    const Trajectory same = scale_align(gt, gt, mode);
    for (std::size_t i = 0; i < gt.size(); ++i) CHECK((same[i].matrix() - gt[i].matrix()).cwiseAbs().maxCoeff() <= 1e-12);
  }

  std::vector<Pose6> half;
  for (const Pose6& p : decompose(gt)) half.emplace_back(p.tx() / 2, p.ty() / 2, p.tz() / 2, p.rx(), p.ry(), p.rz());
  const Trajectory est = accumulate(half);
  for (ScaleMode mode : {ScaleMode::kPerSnippet, ScaleMode::kGlobal}) {
    const Trajectory fixed = scale_align(est, gt, mode);
    double worst = 0.0;
    for (std::size_t i = 0; i < gt.size(); ++i) worst = std::max(worst, (fixed[i].matrix() - gt[i].matrix()).cwiseAbs().maxCoeff());
    CHECK(worst <= 1e-9);
  }

  std::vector<Pose6> scaled;
  for (const Pose6& p : decompose(gt)) {
    const double s = rng.uniform(0.2, 3.0);
    scaled.emplace_back(p.tx() * s, p.ty() * s, p.tz() * s, p.rx(), p.ry(), p.rz());
  }
  const Trajectory noisy = accumulate(scaled);
  const Trajectory fixed = scale_align(noisy, gt, ScaleMode::kPerSnippet);
  double worst = 0.0;
  for (std::size_t i = 0; i + 1 < gt.size(); ++i) {
    const double a = compose(invert(fixed[i]), fixed[i + 1]).translation().norm();
    const double b = compose(invert(gt[i]), gt[i + 1]).translation().norm();
    worst = std::max(worst, std::abs(a - b));
    CHECK(fixed[i].rotation() == noisy[i].rotation());
  }
  CHECK(worst <= 1e-9);

  CHECK_THROWS_AS(scale_align(noisy, straight(3, 1.0), ScaleMode::kGlobal), Error);
}

TEST_CASE("kitti_metrics on identical trajectories") {
  Rng rng(53);
  const Trajectory gt = random_drive(rng, 1200);
  const MetricReport r = kitti_metrics(gt, gt);
  CHECK_FALSE(r.empty);
  CHECK(r.t_rel == 0.0);
  CHECK(r.r_rel == 0.0);
  for (double a : r.axes) CHECK(a == 0.0);
  for (const LengthStats& ls : per_axis_errors(gt, gt))
    for (double a : ls.axes) CHECK(a == 0.0);
}

TEST_CASE("kitti_metrics scale error on a straight line") {
  const Trajectory gt = straight(1000, 1.0);
  const Trajectory est = straight(1000, 1.01);
  const MetricReport r = kitti_metrics(est, gt);
  CHECK(std::abs(r.t_rel - 1.0) <= 1e-9);
  CHECK(r.r_rel == 0.0);
  for (const LengthStats& ls : r.per_length) {
    CHECK(ls.count > 0);
    CHECK(ls.axes[0] <= 1e-12);
    CHECK(ls.axes[1] <= 1e-12);
    CHECK(ls.axes[2] > 0.0);
  }
}

TEST_CASE("kitti_metrics ignores a consistent change of world frame") {
  Rng rng(54);
  const Trajectory gt = random_drive(rng, 900);
  std::vector<Pose6> rel = decompose(gt);
  for (Pose6& p : rel) p = Pose6(p.tx() * 1.02, p.ty(), p.tz(), p.rx() + 1e-3, p.ry(), p.rz());
  const Trajectory est = accumulate(rel);
  const TransformSE3 g = pose_to_transform(Pose6(3, -2, 5, 0.3, -0.7, 0.2));
  std::vector<TransformSE3> moved;
  for (const auto& t : est.poses()) moved.push_back(compose(g, t));
  const MetricReport a = kitti_metrics(est, gt), b = kitti_metrics(Trajectory(moved), gt);
  CHECK(a.t_rel > 0.0);
  CHECK(std::abs(a.t_rel - b.t_rel) <= 1e-9);
  CHECK(std::abs(a.r_rel - b.r_rel) <= 1e-9);

  std::vector<TransformSE3> gt_moved, est_moved;
  for (std::size_t i = 0; i < gt.size(); ++i) {
    gt_moved.push_back(compose(g, gt[i]));
    est_moved.push_back(compose(g, est[i]));
  }
  const MetricReport c = kitti_metrics(Trajectory(est_moved), Trajectory(gt_moved));
  CHECK(std::abs(a.t_rel - c.t_rel) <= 1e-9);
  CHECK(std::abs(a.r_rel - c.r_rel) <= 1e-9);
}

TEST_CASE("per-axis decomposition matches a transcription oracle") {
  Rng rng(55);
  const Trajectory gt = random_drive(rng, 1000);
  std::vector<Pose6> rel = decompose(gt);
  for (Pose6& p : rel) {
    p = Pose6(p.tx() + rng.uniform(-0.01, 0.01), p.ty() + rng.uniform(-0.01, 0.01), p.tz() * rng.uniform(0.98, 1.02),
              p.rx() + rng.uniform(-1e-3, 1e-3), p.ry() + rng.uniform(-1e-3, 1e-3), p.rz() + rng.uniform(-1e-3, 1e-3));
  }
  const Trajectory est = accumulate(rel);
  const auto got = per_axis_errors(est, gt);
  const auto want = oracle_axes(est, gt);
  double worst = 0.0;
  for (std::size_t li = 0; li < got.size(); ++li)
    for (std::size_t a = 0; a < 6; ++a) worst = std::max(worst, std::abs(got[li].axes[a] - want[li][a]));
  CHECK(worst <= 1e-12);
}

TEST_CASE("short or mismatched trajectories") {
  const Trajectory gt = straight(50, 1.0);
  const MetricReport r = kitti_metrics(gt, gt);
  CHECK(r.empty);
  CHECK(r.subsequences == 0);
  CHECK(format_metric_table(r).find("no sub-sequence") != std::string::npos);
  try {
    kitti_metrics(straight(10, 1.0), gt);
    FAIL("length mismatch accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidArgument);
  }
}

TEST_CASE("sequence-weighted mean") {
  MetricReport a, b, empty;
  a.empty = b.empty = false;
  a.t_rel = 2.58;
  b.t_rel = 2.67;
  a.r_rel = 1.0;
  b.r_rel = 3.0;
  a.subsequences = 10;
  b.subsequences = 1000;
  const std::vector<MetricReport> rs{a, b, empty};
  const MetricReport m = mean_report(rs);
  CHECK(std::abs(m.t_rel - 2.625) <= 1e-12);
  CHECK(m.r_rel == 2.0);
  CHECK(m.subsequences == 1010);
}

TEST_CASE("report formats") {
  const MetricReport r = kitti_metrics(straight(1000, 1.01), straight(1000, 1.0));
  const std::string rec = format_metric_record(r);
  const auto pos = rec.find("t_rel=");
  REQUIRE(pos != std::string::npos);
  CHECK(std::abs(std::stod(rec.substr(pos + 6)) - 1.0) <= 1e-9);
  CHECK(rec.find("axis_tz=") != std::string::npos);
  CHECK(format_length_curve(r).find("100 ") != std::string::npos);
  CHECK(format_axis_curve(r).find("# length tx ty tz rx ry rz") == 0);
  CHECK(format_metric_table(r).find("mean") != std::string::npos);
}
