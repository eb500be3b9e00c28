#pragma once

#include <array>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "vlo/geometry.hpp"
#include "vlo/grid.hpp"

namespace vlo {

// Valid depth interval for dense maps and projected lidar samples (meters).
struct DepthRange {
  double min = 0.1;
  double max = 80.0;
};

inline constexpr DepthRange kDefaultDepthRange{};

// Intensities in [0, 1]; 1 or 3 channels.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);
  explicit Image(Grid values);

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  int channels() const { return grid_.channels(); }
  const Grid& grid() const { return grid_; }
  double operator()(int row, int col, int channel = 0) const { return grid_(row, col, channel); }

  bool operator==(const Image& o) const { return grid_ == o.grid_; }

  // 3x3 reflected box means of I and I^2, computed on first use and shared between copies.
  const Grid& box_mean() const { return derived().mean; }
  const Grid& box_mean_sq() const { return derived().mean_sq; }
  // exp(-|dI/dx|) and exp(-|dI/dy|) with forward differences averaged over channels.
  const Grid& edge_weight_x() const { return derived().wx; }
  const Grid& edge_weight_y() const { return derived().wy; }

 private:
  struct Derived {
    std::once_flag once;
    Grid mean, mean_sq, wx, wy;
  };
  const Derived& derived() const;

  Grid grid_;
  std::shared_ptr<Derived> derived_ = std::make_shared<Derived>();
};

// Single-channel depth with every value inside a DepthRange.
class DenseDepthMap {
 public:
  DenseDepthMap() = default;
  DenseDepthMap(int height, int width, double fill);
  explicit DenseDepthMap(Grid values, DepthRange range = kDefaultDepthRange);

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  const Grid& grid() const { return grid_; }
  double operator()(int row, int col) const { return grid_(row, col); }

  bool operator==(const DenseDepthMap&) const = default;

 private:
  Grid grid_;
};

// Lidar depth samples; zero means no sample. mask(r, c) <=> value > 0.
class SparseDepthMap {
 public:
  SparseDepthMap() = default;
  SparseDepthMap(int height, int width);
  explicit SparseDepthMap(Grid values, DepthRange range = kDefaultDepthRange);

  int height() const { return grid_.height(); }
  int width() const { return grid_.width(); }
  const Grid& grid() const { return grid_; }
  const Mask& mask() const { return mask_; }
  double operator()(int row, int col) const { return grid_(row, col); }
  bool valid(int row, int col) const { return mask_(row, col); }
  std::size_t valid_count() const { return mask_.count(); }

  bool operator==(const SparseDepthMap&) const = default;

 private:
  Grid grid_;
  Mask mask_;
};

struct BilinearSample {
  std::array<double, 3> value{};
  bool valid = false;
};

// Out-of-bounds coordinates give valid = false and zero values.
BilinearSample bilinear_sample(const Image& img, double u, double v);

// Sampling location of one target pixel and the bilinear cell used for it.
struct WarpSample {
  double u = 0.0;
  double v = 0.0;
  int cell_u = 0;
  int cell_v = 0;
  bool valid = false;
};

struct WarpPlan {
  int height = 0;
  int width = 0;
  std::vector<WarpSample> samples;

  Mask mask() const;
};

// Coordinates within this distance of the border snap onto it.
inline constexpr double kBorderSnap = 1e-6;

// Locates each target pixel in a source image of the same size. When `frozen` is given its
// cells and validity are reused, so the result is a smooth function of depth and pose.
WarpPlan plan_warp(const Grid& depth, const Pose6& pose, const Intrinsics& k, const WarpPlan* frozen = nullptr);

// Bilinear value of one channel at a planned sample, and its derivatives along u and v.
double sample_cell(const Grid& src, const WarpSample& s, int channel);
std::pair<double, double> sample_cell_gradient(const Grid& src, const WarpSample& s, int channel);

struct WarpResult {
  Image image;
  Mask mask;
};

WarpResult warp_source_to_target(const Image& src, const DenseDepthMap& depth, const Pose6& pose,
                                 const Intrinsics& k);

Grid hflip(const Grid& grid);
Mask hflip(const Mask& mask);
Image hflip(const Image& img);
DenseDepthMap hflip(const DenseDepthMap& depth);
SparseDepthMap hflip(const SparseDepthMap& depth);

struct SsimConstants {
  double c1 = 0.01 * 0.01;
  double c2 = 0.03 * 0.03;
};

// 3x3 mean with reflection at the borders (index -1 -> 1). Requires height, width >= 2.
Grid box3_reflect(const Grid& g);
// Transpose of box3_reflect as a linear map.
Grid box3_reflect_adjoint(const Grid& g);

// Per-pixel SSIM over 3x3 windows, averaged over channels.
Grid ssim(const Image& a, const Image& b, SsimConstants constants = {});

// Forward differences; last column (x) or row (y) is zero.
std::pair<Grid, Grid> spatial_gradients(const Grid& g);

// Pixels whose reflected 3x3 window lies entirely inside `mask`.
Mask erode3_reflect(const Mask& mask);

// 2x2 area average; odd trailing rows/columns are dropped.
Image downsample2(const Image& img);
Intrinsics downsample2(const Intrinsics& k);

}  // namespace vlo
