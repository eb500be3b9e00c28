#include "vlo/synth_scenes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "vlo/error.hpp"

namespace vlo {

namespace {

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice(std::uint64_t seed, long ix, long iy) {
  const std::uint64_t h = mix(seed ^ mix(static_cast<std::uint64_t>(ix) ^ mix(static_cast<std::uint64_t>(iy))));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double fade(double t) { return t * t * t * (t * (t * 6 - 15) + 10); }

double value_noise(std::uint64_t seed, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const long ix = static_cast<long>(fx), iy = static_cast<long>(fy);
  const double a = fade(x - fx), b = fade(y - fy);
  const double top = (1 - a) * lattice(seed, ix, iy) + a * lattice(seed, ix + 1, iy);
  const double bot = (1 - a) * lattice(seed, ix, iy + 1) + a * lattice(seed, ix + 1, iy + 1);
  return (1 - b) * top + b * bot;
}

// Intensity of a surface point, textured by projecting noise from the target camera.
double texture(const SceneSpec& spec, const ScenePlane& plane, const Eigen::Vector3d& x, int channel) {
  const double z = std::max(x.z(), 1e-3);
  const double px = spec.k.fx * x.x() / z, py = spec.k.fy * x.y() / z;
  const std::uint64_t seed = mix(plane.texture_seed + 0x51ed27ULL * static_cast<std::uint64_t>(channel + 1));
  double acc = 0.0, norm = 0.0, amp = 1.0, period = spec.texture.base_period;
  for (int o = 0; o < spec.texture.octaves; ++o) {
    acc += amp * (value_noise(seed + static_cast<std::uint64_t>(o), px / period, py / period) - 0.5);
    norm += amp;
    amp *= 0.5;
    period *= 0.5;
  }
  return std::clamp(0.5 + 2.0 * spec.texture.amplitude * acc / norm, 0.0, 1.0);
}

struct Hit {
  Eigen::Vector3d point;
  int plane = -1;
};

// First plane crossed by the ray c + s d, s > 0.
Hit cast(const SceneSpec& spec, const Eigen::Vector3d& c, const Eigen::Vector3d& d) {
  Hit hit;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.planes.size(); ++i) {
    const ScenePlane& p = spec.planes[i];
    const double denom = p.normal.dot(d);
    if (denom <= 0.0) continue;
    const double s = (p.offset - p.normal.dot(c)) / denom;
    if (s > 0.0 && s < best) {
      best = s;
      hit.plane = static_cast<int>(i);
    }
  }
  if (hit.plane >= 0) hit.point = c + best * d;
  return hit;
}

struct Camera {
  Eigen::Vector3d center;
  Eigen::Matrix3d rt;  // source-to-target rotation
};

Camera camera_for(const Pose6& pose) {
  const TransformSE3 t = pose_to_transform(pose);
  const Eigen::Matrix3d rt = t.rotation().transpose();
  return {-(rt * t.translation()), rt};
}

Eigen::Vector3d pixel_ray(const Intrinsics& k, int r, int c) {
  return {(c - k.cx) / k.fx, (r - k.cy) / k.fy, 1.0};
}

void check_camera_inside(const SceneSpec& spec, const Pose6& pose) {
  const Camera cam = camera_for(pose);
  for (const ScenePlane& p : spec.planes) {
    if (!(p.normal.dot(cam.center) < p.offset)) fail(ErrorCode::kInvalidSpec, "camera lies behind a scene plane");
  }
}

}  // namespace

void SceneSpec::validate() const {
  k.validate();
  if (planes.empty()) fail(ErrorCode::kInvalidSpec, "scene needs at least one plane");
  for (const ScenePlane& p : planes) {
    if (std::abs(p.normal.norm() - 1.0) > 1e-9) fail(ErrorCode::kInvalidSpec, "plane normals must be unit length");
    if (!(p.offset > 0.0)) fail(ErrorCode::kInvalidSpec, "plane lies behind the camera");
  }
  if (!(sparsity > 0.0 && sparsity <= 1.0)) fail(ErrorCode::kInvalidSpec, "sparsity must lie in (0, 1]");
  if (channels != 1 && channels != 3) fail(ErrorCode::kInvalidSpec, "channels must be 1 or 3");
  if (texture.octaves < 1 || !(texture.base_period > 0.0) || texture.amplitude < 0.0 || texture.amplitude > 0.5) {
    fail(ErrorCode::kInvalidSpec, "invalid texture parameters");
  }
  const DepthRange range = kDefaultDepthRange;
  for (int r = 0; r < k.height; ++r) {
    for (int c = 0; c < k.width; ++c) {
      const Hit h = cast(*this, Eigen::Vector3d::Zero(), pixel_ray(k, r, c));
      if (h.plane < 0) fail(ErrorCode::kInvalidSpec, "a target pixel sees no plane");
      if (h.point.z() < range.min || h.point.z() > range.max) {
        fail(ErrorCode::kInvalidSpec, "visible depth outside the valid range");
      }
    }
  }
  check_camera_inside(*this, gt_pose);
}

Image render_view(const SceneSpec& spec, const Pose6& pose) {
  check_camera_inside(spec, pose);
  const Camera cam = camera_for(pose);
  const Intrinsics& k = spec.k;
  Grid out(k.height, k.width, spec.channels);
  for (int r = 0; r < k.height; ++r) {
    for (int c = 0; c < k.width; ++c) {
      const Hit h = cast(spec, cam.center, cam.rt * pixel_ray(k, r, c));
      if (h.plane < 0) fail(ErrorCode::kInvalidSpec, "a view ray escapes the scene");
      for (int ch = 0; ch < spec.channels; ++ch) {
        out(r, c, ch) = texture(spec, spec.planes[static_cast<std::size_t>(h.plane)], h.point, ch);
      }
    }
  }
  return Image(std::move(out));
}

DenseDepthMap render_depth(const SceneSpec& spec, const Pose6& pose) {
  check_camera_inside(spec, pose);
  const Camera cam = camera_for(pose);
  const Intrinsics& k = spec.k;
  Grid d(k.height, k.width, 1);
  for (int r = 0; r < k.height; ++r) {
    for (int c = 0; c < k.width; ++c) {
      const Hit h = cast(spec, cam.center, cam.rt * pixel_ray(k, r, c));
      if (h.plane < 0) fail(ErrorCode::kInvalidSpec, "a view ray escapes the scene");
      d(r, c) = (cam.rt.transpose() * (h.point - cam.center)).z();
    }
  }
  return DenseDepthMap(std::move(d));
}

DenseDepthMap render_depth(const SceneSpec& spec) { return render_depth(spec, Pose6{}); }

SparseDepthMap sample_sparse(const DenseDepthMap& depth, double sparsity, std::uint64_t seed) {
  if (!(sparsity > 0.0 && sparsity <= 1.0)) fail(ErrorCode::kInvalidArgument, "sparsity must lie in (0, 1]");
  const std::size_t n = depth.grid().size();
  const auto count = std::clamp<std::size_t>(static_cast<std::size_t>(std::llround(sparsity * n)), 1, n);
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng() % (n - i)]);
  Grid g(depth.height(), depth.width(), 1, 0.0);
  for (std::size_t i = 0; i < count; ++i) g[idx[i]] = depth.grid()[idx[i]];
  return SparseDepthMap(std::move(g));
}

namespace {

Pose6 inverse_pose(const Pose6& p) { return transform_to_pose(invert(pose_to_transform(p))); }

}  // namespace

RenderedScene render(const SceneSpec& spec) {
  spec.validate();
  RenderedScene out;
  out.target = render_view(spec, Pose6{});
  out.source = render_view(spec, spec.gt_pose);
  out.depth = render_depth(spec);
  out.sparse = sample_sparse(out.depth, spec.sparsity, spec.seed);
  out.gt_pose = spec.gt_pose;
  return out;
}

RenderedSnippet render_snippet(const SceneSpec& spec) {
  spec.validate();
  const Pose6 prev = inverse_pose(spec.gt_pose);
  RenderedSnippet out;
  out.depth = render_depth(spec);
  out.snippet.target = render_view(spec, Pose6{});
  out.snippet.sources = {render_view(spec, prev), render_view(spec, spec.gt_pose)};
  out.snippet.sparse = sample_sparse(out.depth, spec.sparsity, spec.seed);
  out.snippet.k = spec.k;
  out.gt_poses = {prev, spec.gt_pose};
  return out;
}

Intrinsics suite_intrinsics() { return make_intrinsics(64.0, 64.0, 63.5, 31.5, 128, 64); }

LossWeights suite_weights() {
  LossWeights w;
  w.df = 20.0;
  w.ds = 0.04;
  return w;
}

std::vector<SceneSpec> suite(std::uint64_t seed) {
  constexpr int kScenes = 20;
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53); };
  std::vector<SceneSpec> specs;
  for (int i = 0; i < kScenes; ++i) {
    SceneSpec s;
    s.k = suite_intrinsics();
    s.seed = rng();

    const double t_mag = 0.05 + 0.45 * i / (kScenes - 1);
    const double r_mag = (0.2 + 1.8 * ((i * 7) % kScenes) / (kScenes - 1)) * std::numbers::pi / 180.0;
    const Eigen::Vector3d t_dir =
        Eigen::Vector3d(uniform(-0.5, 0.5), uniform(-0.2, 0.2), uniform(0.5, 1.0)).normalized();
    const Eigen::Vector3d r_axis =
        Eigen::Vector3d(uniform(-0.5, 0.5), uniform(-1.0, 1.0), uniform(-0.3, 0.3)).normalized();
    const Eigen::Matrix3d rot = Eigen::AngleAxisd(r_mag, r_axis).toRotationMatrix();
    s.gt_pose = transform_to_pose(TransformSE3::orthonormalized(rot, t_mag * t_dir));

    // A shared texture seed keeps the image continuous across plane junctions.
    const std::uint64_t tex = rng();
    const int n_planes = 1 + i % 3;
    s.planes.push_back(
        {Eigen::Vector3d(uniform(-0.3, 0.3), uniform(-0.15, 0.15), 1.0).normalized(), uniform(6.0, 14.0), tex});
    if (n_planes >= 2) s.planes.push_back({Eigen::Vector3d(0, 1, 0), uniform(1.2, 1.8), tex});
    if (n_planes >= 3) {
      const double side = (rng() & 1) ? 1.0 : -1.0;
      s.planes.push_back({Eigen::Vector3d(side, 0, 0), uniform(3.0, 6.0), tex});
    }
    s.sparsity = 0.02 + 0.08 * ((i * 13) % kScenes) / (kScenes - 1);
    specs.push_back(std::move(s));
  }
  return specs;
}

}  // namespace vlo
