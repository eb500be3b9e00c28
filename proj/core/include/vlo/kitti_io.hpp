#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vlo/evaluation.hpp"
#include "vlo/geometry.hpp"
#include "vlo/lidar_projection.hpp"

namespace vlo {

using Projection = Eigen::Matrix<double, 3, 4>;

// Contents of an odometry calib.txt: rectified projections P0..P3 and Tr (velodyne -> camera 0).
struct KittiCalib {
  std::array<Projection, 4> p{};
  TransformSE3 tr;

  // fx, fy, cx, cy of camera `cam` for an image of the given size.
  Intrinsics intrinsics(int cam, int width, int height) const;
  // Velodyne -> camera `cam`, including the rectified baseline offset K^-1 P[:, 3].
  ExtrinsicCalib velo_to_cam(int cam) const;
};

// Throws kParse (with the line number) on malformed lines or a missing P0..P3 / Tr entry.
KittiCalib parse_calib(std::string_view text);
std::string format_calib(const KittiCalib& calib);
KittiCalib read_calib(const std::filesystem::path& path);

// Lines whose rotation block drifted more than 1e-6 from SO(3) before re-orthonormalisation.
struct PoseParseReport {
  std::vector<std::size_t> reorthonormalized_lines;
};

// One 3x4 row-major camera-to-world matrix per line.
Trajectory parse_poses(std::string_view text, PoseParseReport* report = nullptr);
std::string format_poses(const Trajectory& traj);
Trajectory read_poses(const std::filesystem::path& path, PoseParseReport* report = nullptr);
void write_poses(const std::filesystem::path& path, const Trajectory& traj);

// Speed (km/h) between consecutive frames: |translation(T_i^-1 T_{i+1})| * frame_rate * 3.6.
std::vector<double> compute_speeds(const Trajectory& traj, double frame_rate);

struct SequenceIndex {
  std::string id;
  std::vector<std::filesystem::path> images;
  std::vector<std::filesystem::path> scans;  // empty when the velodyne directory is absent
  KittiCalib calib;
  Intrinsics k;
  ExtrinsicCalib velo_to_cam;
  std::optional<Trajectory> gt_poses;
  double frame_rate = 10.0;
};

// Indexes sequences/<id>/image_<camera>, velodyne, calib.txt and poses/<id>.txt under `root`.
SequenceIndex load_sequence(const std::filesystem::path& root, const std::string& id, int camera = 2);

struct SamplerConfig {
  double p_wide = 0.6;
  double min_speed = 10.0;  // km/h
  std::uint64_t seed = 0;
};

// Frames (prev, center, next) = (i - k, i, i + k).
struct SnippetSample {
  int prev = 0;
  int center = 0;
  int next = 0;
  int interval = 1;
  // Displacement between consecutive snippet frames per frame period, in km/h. Wide snippets
  // therefore report about twice the vehicle speed.
  std::array<double, 2> pair_speeds{};

  double min_speed() const { return std::min(pair_speeds[0], pair_speeds[1]); }
  double mean_speed() const { return 0.5 * (pair_speeds[0] + pair_speeds[1]); }
};

// Centers run over [2, n - 3]; interval 2 with probability p_wide. Snippets whose slower pair is
// below min_speed are dropped. Sequences shorter than 5 frames give no snippets.
std::vector<SnippetSample> sample_snippets(const Trajectory& traj, double frame_rate, const SamplerConfig& cfg);
std::vector<SnippetSample> sample_snippets(const SequenceIndex& seq, const SamplerConfig& cfg);

struct SpeedHistogram {
  static constexpr double kBinWidth = 5.0;
  static constexpr int kBins = 18;  // [0, 90) km/h
  std::array<std::size_t, kBins> counts{};
  std::size_t overflow = 0;  // mean speed >= 90 km/h
};

SpeedHistogram speed_histogram(const std::vector<SnippetSample>& samples);
// Columns: bin_lo bin_hi count.
std::string format_histogram(const SpeedHistogram& h);

}  // namespace vlo
