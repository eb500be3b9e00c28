#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "vlo/geometry.hpp"

namespace vlo {

// Camera-to-world poses with the cumulative distance travelled up to each frame.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(std::vector<TransformSE3> poses);

  std::size_t size() const { return poses_.size(); }
  bool empty() const { return poses_.empty(); }
  const TransformSE3& operator[](std::size_t i) const { return poses_[i]; }
  const std::vector<TransformSE3>& poses() const { return poses_; }
  const std::vector<double>& path_lengths() const { return lengths_; }

 private:
  std::vector<TransformSE3> poses_;
  std::vector<double> lengths_;
};

// T_w(0) = I and T_w(t+1) = T_w(t) * invert(pose_to_transform(P_{t -> t+1})).
Trajectory accumulate(std::span<const Pose6> relative);
// Inverse of accumulate: P_{t -> t+1} for every consecutive pair.
std::vector<Pose6> decompose(const Trajectory& traj);

enum class ScaleMode { kPerSnippet, kGlobal };

// Rescales the relative translations of `est`; rotations are copied untouched.
Trajectory scale_align(const Trajectory& est, const Trajectory& gt, ScaleMode mode);

inline constexpr std::array<double, 8> kKittiLengths{100, 200, 300, 400, 500, 600, 700, 800};
inline constexpr int kKittiStride = 10;

// Per-axis sub-sequence errors: |tx|, |ty|, |tz| in percent of the length and |rx|, |ry|, |rz| in deg/100 m.
using AxisErrors = std::array<double, 6>;

struct LengthStats {
  double length = 0.0;
  std::size_t count = 0;
  double t_err = 0.0;  // percent
  double r_err = 0.0;  // deg / 100 m
  AxisErrors axes{};
};

struct MetricReport {
  bool empty = true;  // true when no sub-sequence reaches the shortest length
  std::size_t subsequences = 0;
  double t_rel = 0.0;  // percent
  double r_rel = 0.0;  // deg / 100 m
  AxisErrors axes{};
  std::vector<LengthStats> per_length;
};

// Throws kInvalidArgument when the trajectories differ in length.
MetricReport kitti_metrics(const Trajectory& est, const Trajectory& gt,
                           std::span<const double> lengths = kKittiLengths, int stride = kKittiStride);

// Per-length averages of the six axis errors (same sub-sequences as kitti_metrics).
std::vector<LengthStats> per_axis_errors(const Trajectory& est, const Trajectory& gt,
                                         std::span<const double> lengths = kKittiLengths,
                                         int stride = kKittiStride);

// Sequence-weighted mean of several reports (each non-empty report counts once).
MetricReport mean_report(std::span<const MetricReport> reports);

std::string format_metric_table(const MetricReport& r);
// "name=value" lines.
std::string format_metric_record(const MetricReport& r);
// Columns: length count t_err r_err.
std::string format_length_curve(const MetricReport& r);
// Columns: length tx ty tz rx ry rz.
std::string format_axis_curve(const MetricReport& r);

}  // namespace vlo
