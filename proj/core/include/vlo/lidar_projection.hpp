#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "vlo/geometry.hpp"
#include "vlo/imaging.hpp"

namespace vlo {

struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<float> reflectance;  // empty or one per point

  std::size_t size() const { return points.size(); }
};

// Lidar frame -> camera frame.
struct ExtrinsicCalib {
  TransformSE3 velo_to_cam;
};

// KITTI velodyne .bin: little-endian float32 quadruples (x, y, z, reflectance).
// Throws kFormat when the byte count is not a multiple of 16.
PointCloud read_velodyne_bin(const std::filesystem::path& path);
void write_velodyne_bin(const std::filesystem::path& path, const PointCloud& cloud);

// Pixel a camera-frame point falls into: nearest pixel center, i.e. floor(coord + 0.5).
struct PixelBin {
  int col = 0;
  int row = 0;
  double depth = 0.0;
  bool inside = false;
};
PixelBin bin_point(const Eigen::Vector3d& cam_point, const Intrinsics& k, DepthRange range = kDefaultDepthRange);

// Z-buffered projection: points at depth <= range.min or > range.max and points outside the
// image are dropped; colliding points keep the nearest depth.
SparseDepthMap project_to_sparse_depth(const PointCloud& cloud, const ExtrinsicCalib& calib, const Intrinsics& k,
                                       DepthRange range = kDefaultDepthRange);

// Camera-frame points D * K^-1 (u, v, 1) for every valid pixel, in row-major order.
PointCloud back_project(const SparseDepthMap& depth, const Intrinsics& k);

}  // namespace vlo
