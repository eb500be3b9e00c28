#pragma once

#include <array>

#include <Eigen/Core>

namespace vlo {

// Pinhole intrinsics. Pixel centers sit at integer coordinates.
struct Intrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;

  // Throws kInvalidArgument unless fx, fy > 0 and the principal point is inside the image.
  void validate() const;

  Eigen::Matrix3d matrix() const;
  bool operator==(const Intrinsics&) const = default;
};

Intrinsics make_intrinsics(double fx, double fy, double cx, double cy, int width, int height);

// Relative pose [tx, ty, tz, rx, ry, rz]; translation in meters, Euler angles in radians.
class Pose6 {
 public:
  static constexpr int kSize = 6;

  Pose6() = default;
  Pose6(double tx, double ty, double tz, double rx, double ry, double rz);
  explicit Pose6(const std::array<double, kSize>& values);

  double operator[](int i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::array<double, kSize>& values() const { return values_; }

  double tx() const { return values_[0]; }
  double ty() const { return values_[1]; }
  double tz() const { return values_[2]; }
  double rx() const { return values_[3]; }
  double ry() const { return values_[4]; }
  double rz() const { return values_[5]; }

  Eigen::Vector3d translation() const { return {values_[0], values_[1], values_[2]}; }

  bool operator==(const Pose6&) const = default;

 private:
  std::array<double, kSize> values_{};
};

// Rigid transform X' = R X + t.
class TransformSE3 {
 public:
  static constexpr double kOrthonormalTolerance = 1e-9;

  TransformSE3();
  // Throws kInvalidArgument if the rotation is not orthonormal with det +1 (within 1e-9).
  TransformSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);

  static TransformSE3 identity() { return {}; }
  // Projects an arbitrary 3x3 block onto SO(3) (SVD) before construction.
  static TransformSE3 orthonormalized(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation);
  static TransformSE3 from_matrix(const Eigen::Matrix4d& m);

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Eigen::Vector3d& translation() const { return translation_; }
  Eigen::Matrix4d matrix() const;

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation_ * x + translation_; }

 private:
  Eigen::Matrix3d rotation_;
  Eigen::Vector3d translation_;
};

// Largest entry of |R^T R - I|, plus |det R - 1|.
double orthonormality_error(const Eigen::Matrix3d& r);

Eigen::Matrix3d rot_x(double angle);
Eigen::Matrix3d rot_y(double angle);
Eigen::Matrix3d rot_z(double angle);

// R = Rz(rz) * Ry(ry) * Rx(rx).
Eigen::Matrix3d euler_to_rotation(double rx, double ry, double rz);

TransformSE3 pose_to_transform(const Pose6& p);
// Throws kDegenerateAngle when |ry| >= pi/2 - 1e-6.
Pose6 transform_to_pose(const TransformSE3& t);

TransformSE3 compose(const TransformSE3& a, const TransformSE3& b);
TransformSE3 invert(const TransformSE3& a);

struct PixelTransformResult {
  Eigen::Vector2d pixel;  // continuous source coordinate, may be out of bounds
  double depth = 0.0;     // z in the source camera
  bool valid = false;     // false when the point lands behind the source camera
};

inline constexpr double kMinSourceDepth = 1e-6;

// p_s = K T (D K^-1 p_t) with perspective division.
PixelTransformResult pixel_transform(const Eigen::Vector2d& pixel, double depth, const Pose6& pose,
                                     const Intrinsics& k);

// Per-pixel warp geometry with analytic derivatives, shared by the warp and its gradient.
class ProjectiveWarp {
 public:
  ProjectiveWarp(const Pose6& pose, const Intrinsics& k);

  struct Point {
    double u = 0.0;
    double v = 0.0;
    double z = 0.0;
    bool valid = false;
  };

  struct Jacobian {
    double du_ddepth = 0.0;
    double dv_ddepth = 0.0;
    std::array<double, 6> du_dpose{};
    std::array<double, 6> dv_dpose{};
  };

  Point transform(double u, double v, double depth) const;
  // Derivatives of (u_s, v_s) w.r.t. target depth and the six pose parameters.
  Jacobian jacobian(double u, double v, double depth) const;

  const Intrinsics& intrinsics() const { return k_; }
  const Eigen::Matrix3d& rotation() const { return r_; }
  const Eigen::Vector3d& translation() const { return t_; }
  // d R / d(rx, ry, rz)
  const Eigen::Matrix3d& rotation_derivative(int axis) const { return dr_[static_cast<std::size_t>(axis)]; }

 private:
  Intrinsics k_;
  Eigen::Matrix3d r_;
  Eigen::Vector3d t_;
  std::array<Eigen::Matrix3d, 3> dr_;
};

enum class FlipConvention {
  kPixelEdge,     // cx' = W - cx
  kPixelCenter,   // cx' = (W - 1) - cx, exact mirror for integer pixel centers
};

// [tx,ty,tz,rx,ry,rz] -> [-tx,ty,tz,rx,-ry,-rz]
Pose6 flip_pose(const Pose6& p);
Intrinsics flip_intrinsics(const Intrinsics& k, FlipConvention convention = FlipConvention::kPixelEdge);

// Mirror of a continuous u coordinate matching the chosen intrinsics flip.
double mirror_u(double u, int width, FlipConvention convention);

}  // namespace vlo
