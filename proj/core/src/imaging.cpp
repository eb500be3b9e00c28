#include "vlo/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "vlo/error.hpp"

namespace vlo {

namespace {

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

void require_same_shape(const Grid& a, const Grid& b, const char* what) {
  if (!a.same_shape(b)) fail(ErrorCode::kInvalidArgument, std::string(what) + ": shape mismatch");
}

}  // namespace

const Image::Derived& Image::derived() const {
  std::call_once(derived_->once, [this] {
    Derived& d = *derived_;
    Grid sq = grid_;
    for (double& v : sq.values()) v *= v;
    d.mean = box3_reflect(grid_);
    d.mean_sq = box3_reflect(sq);
    const auto [ix, iy] = spatial_gradients(grid_);
    const int h = height(), w = width(), nc = channels();
    d.wx = Grid(h, w, 1);
    d.wy = Grid(h, w, 1);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double ax = 0.0, ay = 0.0;
        for (int ch = 0; ch < nc; ++ch) {
          ax += std::abs(ix(r, c, ch));
          ay += std::abs(iy(r, c, ch));
        }
        d.wx(r, c) = std::exp(-ax / nc);
        d.wy(r, c) = std::exp(-ay / nc);
      }
    }
  });
  return *derived_;
}

Image::Image(int height, int width, int channels, double fill) : Image(Grid(height, width, channels, fill)) {}

Image::Image(Grid values) : grid_(std::move(values)) {
  if (grid_.height() <= 0 || grid_.width() <= 0) fail(ErrorCode::kInvalidArgument, "image must be non-empty");
  if (grid_.channels() != 1 && grid_.channels() != 3) {
    fail(ErrorCode::kInvalidArgument, "image must have 1 or 3 channels");
  }
  for (double x : grid_.values()) {
    if (!(x >= 0.0 && x <= 1.0)) fail(ErrorCode::kInvalidArgument, "image intensity outside [0,1]");
  }
}

DenseDepthMap::DenseDepthMap(int height, int width, double fill) : DenseDepthMap(Grid(height, width, 1, fill)) {}

DenseDepthMap::DenseDepthMap(Grid values, DepthRange range) : grid_(std::move(values)) {
  if (grid_.channels() != 1) fail(ErrorCode::kInvalidArgument, "depth map must have one channel");
  for (double d : grid_.values()) {
    if (!(d >= range.min && d <= range.max)) {
      std::ostringstream os;
      os << "dense depth " << d << " outside [" << range.min << ", " << range.max << "]";
      fail(ErrorCode::kInvalidArgument, os.str());
    }
  }
}

SparseDepthMap::SparseDepthMap(int height, int width)
    : grid_(height, width, 1, 0.0), mask_(height, width, false) {}

SparseDepthMap::SparseDepthMap(Grid values, DepthRange range)
    : grid_(std::move(values)), mask_(grid_.height(), grid_.width(), false) {
  if (grid_.channels() != 1) fail(ErrorCode::kInvalidArgument, "sparse depth must have one channel");
  for (int r = 0; r < grid_.height(); ++r) {
    for (int c = 0; c < grid_.width(); ++c) {
      const double d = grid_(r, c);
      if (!std::isfinite(d) || d < 0.0 || d > range.max) {
        fail(ErrorCode::kInvalidArgument, "sparse depth value outside [0, d_max]");
      }
      mask_.set(r, c, d > 0.0);
    }
  }
}

BilinearSample bilinear_sample(const Image& img, double u, double v) {
  BilinearSample out;
  const int w = img.width(), h = img.height();
  if (!(u >= 0.0 && v >= 0.0 && u <= w - 1 && v <= h - 1)) return out;
  const int cu = w > 1 ? std::min(static_cast<int>(std::floor(u)), w - 2) : 0;
  const int cv = h > 1 ? std::min(static_cast<int>(std::floor(v)), h - 2) : 0;
  const double a = u - cu, b = v - cv;
  const int cu1 = w > 1 ? cu + 1 : cu;
  const int cv1 = h > 1 ? cv + 1 : cv;
  const Grid& g = img.grid();
  for (int ch = 0; ch < img.channels(); ++ch) {
    out.value[ch] = (1 - a) * (1 - b) * g(cv, cu, ch) + a * (1 - b) * g(cv, cu1, ch) +
                    (1 - a) * b * g(cv1, cu, ch) + a * b * g(cv1, cu1, ch);
  }
  out.valid = true;
  return out;
}

Mask WarpPlan::mask() const {
  Mask m(height, width, false);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) m.set(r, c, samples[static_cast<std::size_t>(r) * width + c].valid);
  }
  return m;
}

namespace {

// Absorbs round-off of the projective round trip so that integer-aligned warps sample exactly.
// Callers pass x >= 0, where truncation is floor.
double snap_integer(double x) {
  const double n = static_cast<double>(static_cast<long>(x + 0.5));
  return std::abs(x - n) <= 1e-10 ? n : x;
}

}  // namespace

WarpPlan plan_warp(const Grid& depth, const Pose6& pose, const Intrinsics& k, const WarpPlan* frozen) {
  if (depth.channels() != 1 || depth.height() != k.height || depth.width() != k.width) {
    fail(ErrorCode::kInvalidArgument, "depth dimensions do not match intrinsics");
  }
  if (k.width < 2 || k.height < 2) fail(ErrorCode::kInvalidArgument, "warping needs at least a 2x2 image");
  if (frozen && (frozen->height != k.height || frozen->width != k.width)) {
    fail(ErrorCode::kInvalidArgument, "frozen warp plan has different dimensions");
  }
  const ProjectiveWarp warp(pose, k);
  const Eigen::Matrix3d& rot = warp.rotation();
  const Eigen::Vector3d& tr = warp.translation();
  WarpPlan plan{k.height, k.width, {}};
  plan.samples.resize(static_cast<std::size_t>(k.height) * k.width);
  const double umax = k.width - 1, vmax = k.height - 1;
  for (int r = 0; r < k.height; ++r) {
    const double y = (r - k.cy) / k.fy;
    for (int c = 0; c < k.width; ++c) {
      const std::size_t i = static_cast<std::size_t>(r) * k.width + c;
      WarpSample& s = plan.samples[i];
      const double x = (c - k.cx) / k.fx, d = depth[i];
      const double zs = d * (rot(2, 0) * x + rot(2, 1) * y + rot(2, 2)) + tr.z();
      const bool in_front = zs > kMinSourceDepth;
      double u = 0.0, v = 0.0;
      if (in_front) {
        u = k.fx * (d * (rot(0, 0) * x + rot(0, 1) * y + rot(0, 2)) + tr.x()) / zs + k.cx;
        v = k.fy * (d * (rot(1, 0) * x + rot(1, 1) * y + rot(1, 2)) + tr.y()) / zs + k.cy;
      }
      if (frozen) {
        s = frozen->samples[i];
        s.valid = s.valid && in_front;
        s.u = u;
        s.v = v;
        continue;
      }
      if (!in_front) continue;
      if (u < -kBorderSnap || v < -kBorderSnap || u > umax + kBorderSnap || v > vmax + kBorderSnap) continue;
      s.u = snap_integer(std::clamp(u, 0.0, umax));
      s.v = snap_integer(std::clamp(v, 0.0, vmax));
      s.cell_u = std::min(static_cast<int>(s.u), k.width - 2);
      s.cell_v = std::min(static_cast<int>(s.v), k.height - 2);
      s.valid = true;
    }
  }
  return plan;
}

double sample_cell(const Grid& src, const WarpSample& s, int channel) {
  const double a = s.u - s.cell_u, b = s.v - s.cell_v;
  return (1 - a) * (1 - b) * src(s.cell_v, s.cell_u, channel) + a * (1 - b) * src(s.cell_v, s.cell_u + 1, channel) +
         (1 - a) * b * src(s.cell_v + 1, s.cell_u, channel) + a * b * src(s.cell_v + 1, s.cell_u + 1, channel);
}

std::pair<double, double> sample_cell_gradient(const Grid& src, const WarpSample& s, int channel) {
  const double a = s.u - s.cell_u, b = s.v - s.cell_v;
  const double i00 = src(s.cell_v, s.cell_u, channel), i01 = src(s.cell_v, s.cell_u + 1, channel);
  const double i10 = src(s.cell_v + 1, s.cell_u, channel), i11 = src(s.cell_v + 1, s.cell_u + 1, channel);
  return {(1 - b) * (i01 - i00) + b * (i11 - i10), (1 - a) * (i10 - i00) + a * (i11 - i01)};
}

WarpResult warp_source_to_target(const Image& src, const DenseDepthMap& depth, const Pose6& pose,
                                 const Intrinsics& k) {
  if (src.height() != depth.height() || src.width() != depth.width()) {
    fail(ErrorCode::kInvalidArgument, "source image and depth differ in size");
  }
  const WarpPlan plan = plan_warp(depth.grid(), pose, k);
  Grid out(src.height(), src.width(), src.channels(), 0.0);
  for (int r = 0; r < src.height(); ++r) {
    for (int c = 0; c < src.width(); ++c) {
      const WarpSample& s = plan.samples[static_cast<std::size_t>(r) * src.width() + c];
      if (!s.valid) continue;
      for (int ch = 0; ch < src.channels(); ++ch) out(r, c, ch) = std::clamp(sample_cell(src.grid(), s, ch), 0.0, 1.0);
    }
  }
  return {Image(std::move(out)), plan.mask()};
}

Grid hflip(const Grid& grid) {
  Grid out(grid.height(), grid.width(), grid.channels());
  const int w = grid.width();
  for (int r = 0; r < grid.height(); ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < grid.channels(); ++ch) out(r, w - 1 - c, ch) = grid(r, c, ch);
    }
  }
  return out;
}

Mask hflip(const Mask& mask) {
  Mask out(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) out.set(r, mask.width() - 1 - c, mask(r, c));
  }
  return out;
}

Image hflip(const Image& img) { return Image(hflip(img.grid())); }

DenseDepthMap hflip(const DenseDepthMap& depth) {
  return DenseDepthMap(hflip(depth.grid()), DepthRange{0.0, std::numeric_limits<double>::infinity()});
}

SparseDepthMap hflip(const SparseDepthMap& depth) {
  return SparseDepthMap(hflip(depth.grid()), DepthRange{0.0, std::numeric_limits<double>::infinity()});
}

namespace {

// Horizontal 3-tap sum of one row with reflected ends.
void row_sum3(const double* in, double* out, int w, int nc) {
  for (int ch = 0; ch < nc; ++ch) {
    out[ch] = in[nc + ch] + in[ch] + in[nc + ch];
    out[(w - 1) * nc + ch] = in[(w - 2) * nc + ch] + in[(w - 1) * nc + ch] + in[(w - 2) * nc + ch];
  }
  const std::size_t end = static_cast<std::size_t>(w - 1) * nc;
  for (std::size_t i = nc; i < end; ++i) out[i] = in[i - nc] + in[i] + in[i + nc];
}

// Transpose of row_sum3.
void row_sum3_adjoint(const double* in, double* out, int w, int nc) {
  const std::size_t end = static_cast<std::size_t>(w - 1) * nc;
  for (std::size_t i = nc; i < end; ++i) out[i] = in[i - nc] + in[i] + in[i + nc];
  for (int ch = 0; ch < nc; ++ch) {
    out[ch] = in[ch] + in[nc + ch];
    out[(w - 1) * nc + ch] = in[(w - 2) * nc + ch] + in[(w - 1) * nc + ch];
    out[nc + ch] += in[ch];
    out[(w - 2) * nc + ch] += in[(w - 1) * nc + ch];
  }
  if (w == 2) {
    // Both ends reflect onto each other; recompute directly.
    for (int ch = 0; ch < nc; ++ch) {
      const double a = in[ch], b = in[nc + ch];
      out[ch] = a + b + b;
      out[nc + ch] = b + a + a;
    }
  }
}

}  // namespace

Grid box3_reflect(const Grid& g) {
  const int h = g.height(), w = g.width(), nc = g.channels();
  if (h < 2 || w < 2) fail(ErrorCode::kInvalidArgument, "box filter needs at least 2x2");
  const std::size_t stride = static_cast<std::size_t>(w) * nc;
  const double* in = g.values().data();
  std::vector<double> tmp(g.size());
  for (int r = 0; r < h; ++r) row_sum3(in + r * stride, tmp.data() + r * stride, w, nc);
  Grid out(h, w, nc);
  double* o = out.values().data();
  for (int r = 0; r < h; ++r) {
    const double* a = tmp.data() + reflect(r - 1, h) * stride;
    const double* b = tmp.data() + r * stride;
    const double* c = tmp.data() + reflect(r + 1, h) * stride;
    double* dst = o + r * stride;
    for (std::size_t i = 0; i < stride; ++i) dst[i] = (a[i] + b[i] + c[i]) / 9.0;
  }
  return out;
}

Grid box3_reflect_adjoint(const Grid& g) {
  const int h = g.height(), w = g.width(), nc = g.channels();
  if (h < 2 || w < 2) fail(ErrorCode::kInvalidArgument, "box filter needs at least 2x2");
  const std::size_t stride = static_cast<std::size_t>(w) * nc;
  const double* in = g.values().data();
  std::vector<double> tmp(g.size(), 0.0);
  for (int r = 0; r < h; ++r) {
    const double* src = in + r * stride;
    for (int d = -1; d <= 1; ++d) {
      double* dst = tmp.data() + reflect(r + d, h) * stride;
      for (std::size_t i = 0; i < stride; ++i) dst[i] += src[i];
    }
  }
  for (double& v : tmp) v /= 9.0;
  Grid out(h, w, nc);
  double* o = out.values().data();
  for (int r = 0; r < h; ++r) row_sum3_adjoint(tmp.data() + r * stride, o + r * stride, w, nc);
  return out;
}

Grid ssim(const Image& a, const Image& b, SsimConstants k) {
  require_same_shape(a.grid(), b.grid(), "ssim");
  const Grid& x = a.grid();
  const Grid& y = b.grid();
  Grid xx(x.height(), x.width(), x.channels()), yy = xx, xy = xx;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const Grid mx = box3_reflect(x), my = box3_reflect(y);
  const Grid exx = box3_reflect(xx), eyy = box3_reflect(yy), exy = box3_reflect(xy);
  Grid out(x.height(), x.width(), 1, 0.0);
  const int nc = x.channels();
  for (int r = 0; r < x.height(); ++r) {
    for (int c = 0; c < x.width(); ++c) {
      double acc = 0.0;
      for (int ch = 0; ch < nc; ++ch) {
        const double ux = mx(r, c, ch), uy = my(r, c, ch);
        const double sxx = exx(r, c, ch) - ux * ux;
        const double syy = eyy(r, c, ch) - uy * uy;
        const double sxy = exy(r, c, ch) - ux * uy;
        acc += ((2 * ux * uy + k.c1) * (2 * sxy + k.c2)) / ((ux * ux + uy * uy + k.c1) * (sxx + syy + k.c2));
      }
      out(r, c) = acc / nc;
    }
  }
  return out;
}

std::pair<Grid, Grid> spatial_gradients(const Grid& g) {
  const int h = g.height(), w = g.width(), nc = g.channels();
  if (h < 2 || w < 2) fail(ErrorCode::kInvalidArgument, "spatial gradients need at least 2x2");
  Grid gx(h, w, nc, 0.0), gy(h, w, nc, 0.0);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < nc; ++ch) {
        if (c + 1 < w) gx(r, c, ch) = g(r, c + 1, ch) - g(r, c, ch);
        if (r + 1 < h) gy(r, c, ch) = g(r + 1, c, ch) - g(r, c, ch);
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

Mask erode3_reflect(const Mask& mask) {
  const int h = mask.height(), w = mask.width();
  // Reflection only duplicates in-range neighbours, so erosion reduces to a clamped 3x3 AND.
  std::vector<unsigned char> rows(static_cast<std::size_t>(h) * w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      rows[static_cast<std::size_t>(r) * w + c] =
          mask(r, std::max(c - 1, 0)) && mask(r, c) && mask(r, std::min(c + 1, w - 1));
    }
  }
  Mask out(h, w, false);
  for (int r = 0; r < h; ++r) {
    const unsigned char* a = &rows[static_cast<std::size_t>(std::max(r - 1, 0)) * w];
    const unsigned char* b = &rows[static_cast<std::size_t>(r) * w];
    const unsigned char* c = &rows[static_cast<std::size_t>(std::min(r + 1, h - 1)) * w];
    for (int x = 0; x < w; ++x) out.set(r, x, a[x] && b[x] && c[x]);
  }
  return out;
}

Image downsample2(const Image& img) {
  const int h = img.height() / 2, w = img.width() / 2;
  if (h < 1 || w < 1) fail(ErrorCode::kInvalidArgument, "image too small to downsample");
  Grid out(h, w, img.channels());
  const Grid& g = img.grid();
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int ch = 0; ch < img.channels(); ++ch) {
        out(r, c, ch) = 0.25 * (g(2 * r, 2 * c, ch) + g(2 * r, 2 * c + 1, ch) + g(2 * r + 1, 2 * c, ch) +
                                g(2 * r + 1, 2 * c + 1, ch));
      }
    }
  }
  return Image(std::move(out));
}

Intrinsics downsample2(const Intrinsics& k) {
  return make_intrinsics(k.fx / 2, k.fy / 2, (k.cx - 0.5) / 2, (k.cy - 0.5) / 2, k.width / 2, k.height / 2);
}

}  // namespace vlo
