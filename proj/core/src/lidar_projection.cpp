#include "vlo/lidar_projection.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "vlo/error.hpp"

namespace vlo {

static_assert(std::endian::native == std::endian::little, "velodyne I/O assumes a little-endian host");

PointCloud read_velodyne_bin(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot open " + path.string());
  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 16 != 0) {
    fail(ErrorCode::kFormat, path.string() + ": size " + std::to_string(bytes.size()) +
                                 " is not a multiple of 16 bytes");
  }
  PointCloud cloud;
  const std::size_t n = bytes.size() / 16;
  cloud.points.reserve(n);
  cloud.reflectance.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    float xyzr[4];
    std::memcpy(xyzr, bytes.data() + 16 * i, 16);
    cloud.points.emplace_back(xyzr[0], xyzr[1], xyzr[2]);
    cloud.reflectance.push_back(xyzr[3]);
  }
  return cloud;
}

void write_velodyne_bin(const std::filesystem::path& path, const PointCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kIo, "cannot write " + path.string());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const float xyzr[4] = {static_cast<float>(cloud.points[i].x()), static_cast<float>(cloud.points[i].y()),
                           static_cast<float>(cloud.points[i].z()),
                           cloud.reflectance.empty() ? 0.0f : cloud.reflectance[i]};
    out.write(reinterpret_cast<const char*>(xyzr), sizeof(xyzr));
  }
}

PixelBin bin_point(const Eigen::Vector3d& x, const Intrinsics& k, DepthRange range) {
  PixelBin bin;
  bin.depth = x.z();
  if (!(x.z() > range.min) || x.z() > range.max || !x.allFinite()) return bin;
  const double u = k.fx * x.x() / x.z() + k.cx;
  const double v = k.fy * x.y() / x.z() + k.cy;
  const double col = std::floor(u + 0.5), row = std::floor(v + 0.5);
  if (col < 0 || row < 0 || col >= k.width || row >= k.height) return bin;
  bin.col = static_cast<int>(col);
  bin.row = static_cast<int>(row);
  bin.inside = true;
  return bin;
}

SparseDepthMap project_to_sparse_depth(const PointCloud& cloud, const ExtrinsicCalib& calib, const Intrinsics& k,
                                       DepthRange range) {
  k.validate();
  Grid depth(k.height, k.width, 1, 0.0);
  for (const auto& p : cloud.points) {
    const PixelBin bin = bin_point(calib.velo_to_cam.apply(p), k, range);
    if (!bin.inside) continue;
    double& cell = depth(bin.row, bin.col);
    if (cell == 0.0 || bin.depth < cell) cell = bin.depth;
  }
  return SparseDepthMap(std::move(depth), range);
}

PointCloud back_project(const SparseDepthMap& depth, const Intrinsics& k) {
  PointCloud cloud;
  for (int r = 0; r < depth.height(); ++r) {
    for (int c = 0; c < depth.width(); ++c) {
      if (!depth.valid(r, c)) continue;
      const double d = depth(r, c);
      cloud.points.emplace_back(d * (c - k.cx) / k.fx, d * (r - k.cy) / k.fy, d);
    }
  }
  return cloud;
}

}  // namespace vlo
