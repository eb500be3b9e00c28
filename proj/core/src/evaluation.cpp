#include "vlo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "vlo/error.hpp"

namespace vlo {

Trajectory::Trajectory(std::vector<TransformSE3> poses) : poses_(std::move(poses)) {
  lengths_.resize(poses_.size(), 0.0);
  for (std::size_t i = 1; i < poses_.size(); ++i) {
    lengths_[i] = lengths_[i - 1] + (poses_[i].translation() - poses_[i - 1].translation()).norm();
  }
}

Trajectory accumulate(std::span<const Pose6> relative) {
  std::vector<TransformSE3> poses{TransformSE3::identity()};
  for (const Pose6& p : relative) poses.push_back(compose(poses.back(), invert(pose_to_transform(p))));
  return Trajectory(std::move(poses));
}

std::vector<Pose6> decompose(const Trajectory& traj) {
  std::vector<Pose6> out;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    out.push_back(transform_to_pose(invert(compose(invert(traj[i - 1]), traj[i]))));
  }
  return out;
}

namespace {

void require_same_length(const Trajectory& a, const Trajectory& b) {
  if (a.size() != b.size()) {
    fail(ErrorCode::kInvalidArgument, "trajectory lengths differ: " + std::to_string(a.size()) + " vs " +
                                          std::to_string(b.size()));
  }
}

// Translation of T_{i+1} relative to T_i, expressed in frame i.
Eigen::Vector3d relative_translation(const Trajectory& t, std::size_t i) {
  return t[i].rotation().transpose() * (t[i + 1].translation() - t[i].translation());
}

double rotation_angle(const Eigen::Matrix3d& r) {
  return std::acos(std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0));
}

}  // namespace

Trajectory scale_align(const Trajectory& est, const Trajectory& gt, ScaleMode mode) {
  require_same_length(est, gt);
  if (est.empty()) return est;
  const std::size_t n = est.size();
  std::vector<double> scales(n > 0 ? n - 1 : 0, 1.0);
  if (mode == ScaleMode::kPerSnippet) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double ne = relative_translation(est, i).norm();
      scales[i] = ne < 1e-9 ? 1.0 : relative_translation(gt, i).norm() / ne;
    }
  } else {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const Eigen::Vector3d te = relative_translation(est, i);
      num += te.dot(relative_translation(gt, i));
      den += te.dot(te);
    }
    std::fill(scales.begin(), scales.end(), den < 1e-18 ? 1.0 : num / den);
  }
  std::vector<TransformSE3> out{est[0]};
  Eigen::Vector3d position = est[0].translation();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    position += scales[i] * (est[i + 1].translation() - est[i].translation());
    out.emplace_back(est[i + 1].rotation(), position);
  }
  return Trajectory(std::move(out));
}

namespace {

struct SubsequenceError {
  std::size_t length_index = 0;
  double t_err = 0.0;  // per meter
  double r_err = 0.0;  // rad per meter
  AxisErrors axes{};   // per meter / rad per meter
};

std::vector<SubsequenceError> subsequence_errors(const Trajectory& est, const Trajectory& gt,
                                                 std::span<const double> lengths, int stride) {
  require_same_length(est, gt);
  if (stride <= 0) fail(ErrorCode::kInvalidArgument, "stride must be positive");
  const auto& dist = gt.path_lengths();
  std::vector<SubsequenceError> errs;
  for (std::size_t first = 0; first < gt.size(); first += static_cast<std::size_t>(stride)) {
    for (std::size_t li = 0; li < lengths.size(); ++li) {
      const double len = lengths[li];
      const auto it = std::lower_bound(dist.begin() + static_cast<long>(first), dist.end(), dist[first] + len);
      if (it == dist.end()) continue;
      const std::size_t last = static_cast<std::size_t>(it - dist.begin());
      const TransformSE3 rel_gt = compose(invert(gt[first]), gt[last]);
      const TransformSE3 rel_est = compose(invert(est[first]), est[last]);
      SubsequenceError s;
      s.length_index = li;
      if (rel_gt.matrix() == rel_est.matrix()) {
        errs.push_back(s);
        continue;
      }
      const TransformSE3 e = compose(invert(rel_gt), rel_est);
      s.t_err = e.translation().norm() / len;
      s.r_err = rotation_angle(e.rotation()) / len;
      const Pose6 p = transform_to_pose(e);
      for (int a = 0; a < 6; ++a) s.axes[static_cast<std::size_t>(a)] = std::abs(p[a]) / len;
      errs.push_back(s);
    }
  }
  return errs;
}

constexpr double kRadPerMToDegPer100m = 180.0 / std::numbers::pi * 100.0;

AxisErrors to_report_units(const AxisErrors& a) {
  AxisErrors out{};
  for (std::size_t i = 0; i < 3; ++i) out[i] = a[i] * 100.0;
  for (std::size_t i = 3; i < 6; ++i) out[i] = a[i] * kRadPerMToDegPer100m;
  return out;
}

}  // namespace

MetricReport kitti_metrics(const Trajectory& est, const Trajectory& gt, std::span<const double> lengths,
                           int stride) {
  const auto errs = subsequence_errors(est, gt, lengths, stride);
  MetricReport r;
  r.per_length.resize(lengths.size());
  for (std::size_t li = 0; li < lengths.size(); ++li) r.per_length[li].length = lengths[li];
  if (errs.empty()) return r;
  r.empty = false;
  r.subsequences = errs.size();
  AxisErrors axes{};
  for (const auto& e : errs) {
    r.t_rel += e.t_err;
    r.r_rel += e.r_err;
    LengthStats& ls = r.per_length[e.length_index];
    ++ls.count;
    ls.t_err += e.t_err;
    ls.r_err += e.r_err;
    for (std::size_t a = 0; a < 6; ++a) {
      axes[a] += e.axes[a];
      ls.axes[a] += e.axes[a];
    }
  }
  const double n = static_cast<double>(errs.size());
  r.t_rel = r.t_rel / n * 100.0;
  r.r_rel = r.r_rel / n * kRadPerMToDegPer100m;
  for (auto& a : axes) a /= n;
  r.axes = to_report_units(axes);
  for (LengthStats& ls : r.per_length) {
    if (ls.count == 0) continue;
    const double c = static_cast<double>(ls.count);
    ls.t_err = ls.t_err / c * 100.0;
    ls.r_err = ls.r_err / c * kRadPerMToDegPer100m;
    for (auto& a : ls.axes) a /= c;
    ls.axes = to_report_units(ls.axes);
  }
  return r;
}

std::vector<LengthStats> per_axis_errors(const Trajectory& est, const Trajectory& gt, std::span<const double> lengths,
                                         int stride) {
  return kitti_metrics(est, gt, lengths, stride).per_length;
}

MetricReport mean_report(std::span<const MetricReport> reports) {
  MetricReport m;
  std::size_t n = 0;
  for (const MetricReport& r : reports) {
    if (r.empty) continue;
    if (n == 0) {
      m.per_length = r.per_length;
      for (auto& ls : m.per_length) ls = LengthStats{ls.length};
    }
    ++n;
    m.subsequences += r.subsequences;
    m.t_rel += r.t_rel;
    m.r_rel += r.r_rel;
    for (std::size_t a = 0; a < 6; ++a) m.axes[a] += r.axes[a];
  }
  if (n == 0) return m;
  m.empty = false;
  m.t_rel /= static_cast<double>(n);
  m.r_rel /= static_cast<double>(n);
  for (auto& a : m.axes) a /= static_cast<double>(n);
  return m;
}

std::string format_metric_table(const MetricReport& r) {
  std::ostringstream os;
  char buf[160];
  if (r.empty) return "no sub-sequence reaches the shortest evaluation length\n";
  std::snprintf(buf, sizeof buf, "%-8s %6s %10s %14s\n", "length", "count", "t_err[%]", "r_err[deg/100m]");
  os << buf;
  for (const LengthStats& ls : r.per_length) {
    if (ls.count == 0) continue;
    std::snprintf(buf, sizeof buf, "%-8.0f %6zu %10.4f %14.4f\n", ls.length, ls.count, ls.t_err, ls.r_err);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "%-8s %6zu %10.4f %14.4f\n", "mean", r.subsequences, r.t_rel, r.r_rel);
  os << buf;
  return os.str();
}

std::string format_metric_record(const MetricReport& r) {
  static constexpr std::array<const char*, 6> kAxis{"tx", "ty", "tz", "rx", "ry", "rz"};
  std::ostringstream os;
  os.precision(17);
  os << "empty=" << (r.empty ? 1 : 0) << "\nsubsequences=" << r.subsequences << "\nt_rel=" << r.t_rel
     << "\nr_rel=" << r.r_rel << "\n";
  for (std::size_t a = 0; a < 6; ++a) os << "axis_" << kAxis[a] << "=" << r.axes[a] << "\n";
  return os.str();
}

std::string format_length_curve(const MetricReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "# length count t_err r_err\n";
  for (const LengthStats& ls : r.per_length) os << ls.length << " " << ls.count << " " << ls.t_err << " " << ls.r_err << "\n";
  return os.str();
}

std::string format_axis_curve(const MetricReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "# length tx ty tz rx ry rz\n";
  for (const LengthStats& ls : r.per_length) {
    os << ls.length;
    for (double a : ls.axes) os << " " << a;
    os << "\n";
  }
  return os.str();
}

}  // namespace vlo
