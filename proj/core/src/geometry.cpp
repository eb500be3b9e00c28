#include "vlo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "vlo/error.hpp"

namespace vlo {

namespace {

Eigen::Matrix3d drot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, -s, -c, 0, c, -s;
  return m;
}

Eigen::Matrix3d drot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << -s, 0, c, 0, 0, 0, -c, 0, -s;
  return m;
}

Eigen::Matrix3d drot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << -s, -c, 0, c, -s, 0, 0, 0, 0;
  return m;
}

}  // namespace

void Intrinsics::validate() const {
  const bool ok = std::isfinite(fx) && std::isfinite(fy) && std::isfinite(cx) && std::isfinite(cy) &&
                  fx > 0.0 && fy > 0.0 && width > 0 && height > 0 && cx >= 0.0 && cx < width &&
                  cy >= 0.0 && cy < height;
  if (!ok) {
    std::ostringstream os;
    os << "intrinsics out of range: fx=" << fx << " fy=" << fy << " cx=" << cx << " cy=" << cy
       << " size=" << width << "x" << height;
    fail(ErrorCode::kInvalidArgument, os.str());
  }
}

Eigen::Matrix3d Intrinsics::matrix() const {
  Eigen::Matrix3d k;
  k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
  return k;
}

Intrinsics make_intrinsics(double fx, double fy, double cx, double cy, int width, int height) {
  Intrinsics k{fx, fy, cx, cy, width, height};
  k.validate();
  return k;
}

Pose6::Pose6(double tx, double ty, double tz, double rx, double ry, double rz)
    : Pose6(std::array<double, kSize>{tx, ty, tz, rx, ry, rz}) {}

Pose6::Pose6(const std::array<double, kSize>& values) : values_(values) {
  for (int i = 0; i < kSize; ++i) {
    if (!std::isfinite(values_[i])) fail(ErrorCode::kInvalidArgument, "pose component is not finite");
  }
  for (int i = 3; i < kSize; ++i) {
    if (std::abs(values_[i]) >= std::numbers::pi) {
      fail(ErrorCode::kInvalidArgument, "Euler angle magnitude must be below pi");
    }
  }
}

double orthonormality_error(const Eigen::Matrix3d& r) {
  const double ortho = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return std::max(ortho, std::abs(r.determinant() - 1.0));
}

TransformSE3::TransformSE3()
    : rotation_(Eigen::Matrix3d::Identity()), translation_(Eigen::Vector3d::Zero()) {}

TransformSE3::TransformSE3(const Eigen::Matrix3d& rotation, const Eigen::Vector3d& translation)
    : rotation_(rotation), translation_(translation) {
  if (!rotation.allFinite() || !translation.allFinite()) {
    fail(ErrorCode::kInvalidArgument, "transform has non-finite entries");
  }
  if (orthonormality_error(rotation) > kOrthonormalTolerance) {
    fail(ErrorCode::kInvalidArgument, "rotation block is not orthonormal");
  }
}

TransformSE3 TransformSE3::orthonormalized(const Eigen::Matrix3d& rotation,
                                           const Eigen::Vector3d& translation) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return {r, translation};
}

TransformSE3 TransformSE3::from_matrix(const Eigen::Matrix4d& m) {
  return {m.topLeftCorner<3, 3>(), m.topRightCorner<3, 1>()};
}

Eigen::Matrix4d TransformSE3::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation_;
  m.topRightCorner<3, 1>() = translation_;
  return m;
}

Eigen::Matrix3d rot_x(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, c, -s, 0, s, c;
  return m;
}

Eigen::Matrix3d rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, 0, s, 0, 1, 0, -s, 0, c;
  return m;
}

Eigen::Matrix3d rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  Eigen::Matrix3d m;
  m << c, -s, 0, s, c, 0, 0, 0, 1;
  return m;
}

Eigen::Matrix3d euler_to_rotation(double rx, double ry, double rz) {
  return rot_z(rz) * rot_y(ry) * rot_x(rx);
}

TransformSE3 pose_to_transform(const Pose6& p) {
  return {euler_to_rotation(p.rx(), p.ry(), p.rz()), p.translation()};
}

Pose6 transform_to_pose(const TransformSE3& t) {
  const Eigen::Matrix3d& r = t.rotation();
  const double ry = std::atan2(-r(2, 0), std::hypot(r(0, 0), r(1, 0)));
  if (std::abs(ry) >= std::numbers::pi / 2.0 - 1e-6) {
    fail(ErrorCode::kDegenerateAngle, "pitch about y is within 1e-6 rad of +-pi/2");
  }
  const double rx = std::atan2(r(2, 1), r(2, 2));
  const double rz = std::atan2(r(1, 0), r(0, 0));
  const Eigen::Vector3d& x = t.translation();
  return {x.x(), x.y(), x.z(), rx, ry, rz};
}

TransformSE3 compose(const TransformSE3& a, const TransformSE3& b) {
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation()};
}

TransformSE3 invert(const TransformSE3& a) {
  const Eigen::Matrix3d rt = a.rotation().transpose();
  return {rt, -(rt * a.translation())};
}

PixelTransformResult pixel_transform(const Eigen::Vector2d& pixel, double depth, const Pose6& pose,
                                     const Intrinsics& k) {
  if (!(depth > 0.0) || !std::isfinite(depth)) {
    fail(ErrorCode::kInvalidArgument, "pixel_transform requires a positive depth");
  }
  if (pixel.x() < 0.0 || pixel.y() < 0.0 || pixel.x() > k.width - 1 || pixel.y() > k.height - 1) {
    fail(ErrorCode::kInvalidArgument, "pixel_transform requires a pixel inside the image");
  }
  const ProjectiveWarp warp(pose, k);
  const auto p = warp.transform(pixel.x(), pixel.y(), depth);
  return {{p.u, p.v}, p.z, p.valid};
}

ProjectiveWarp::ProjectiveWarp(const Pose6& pose, const Intrinsics& k)
    : k_(k), t_(pose.translation()) {
  const Eigen::Matrix3d rx = rot_x(pose.rx()), ry = rot_y(pose.ry()), rz = rot_z(pose.rz());
  r_ = rz * ry * rx;
  dr_[0] = rz * ry * drot_x(pose.rx());
  dr_[1] = rz * drot_y(pose.ry()) * rx;
  dr_[2] = drot_z(pose.rz()) * ry * rx;
}

ProjectiveWarp::Point ProjectiveWarp::transform(double u, double v, double depth) const {
  const Eigen::Vector3d ray((u - k_.cx) / k_.fx, (v - k_.cy) / k_.fy, 1.0);
  const Eigen::Vector3d xs = r_ * (depth * ray) + t_;
  Point p;
  p.z = xs.z();
  p.valid = xs.z() > kMinSourceDepth;
  if (p.valid) {
    p.u = k_.fx * xs.x() / xs.z() + k_.cx;
    p.v = k_.fy * xs.y() / xs.z() + k_.cy;
  }
  return p;
}

ProjectiveWarp::Jacobian ProjectiveWarp::jacobian(double u, double v, double depth) const {
  const Eigen::Vector3d ray((u - k_.cx) / k_.fx, (v - k_.cy) / k_.fy, 1.0);
  const Eigen::Vector3d xt = depth * ray;
  const Eigen::Vector3d xs = r_ * xt + t_;
  const double iz = 1.0 / xs.z();
  // Rows of d(u,v)/d(Xs).
  const Eigen::Vector3d gu(k_.fx * iz, 0.0, -k_.fx * xs.x() * iz * iz);
  const Eigen::Vector3d gv(0.0, k_.fy * iz, -k_.fy * xs.y() * iz * iz);

  Jacobian j;
  const Eigen::Vector3d dxs_ddepth = r_ * ray;
  j.du_ddepth = gu.dot(dxs_ddepth);
  j.dv_ddepth = gv.dot(dxs_ddepth);
  for (int i = 0; i < 3; ++i) {
    j.du_dpose[i] = gu[i];
    j.dv_dpose[i] = gv[i];
    const Eigen::Vector3d dxs = dr_[i] * xt;
    j.du_dpose[3 + i] = gu.dot(dxs);
    j.dv_dpose[3 + i] = gv.dot(dxs);
  }
  return j;
}

Pose6 flip_pose(const Pose6& p) { return {-p.tx(), p.ty(), p.tz(), p.rx(), -p.ry(), -p.rz()}; }

Intrinsics flip_intrinsics(const Intrinsics& k, FlipConvention convention) {
  Intrinsics f = k;
  f.cx = convention == FlipConvention::kPixelEdge ? k.width - k.cx : (k.width - 1) - k.cx;
  return f;
}

double mirror_u(double u, int width, FlipConvention convention) {
  return convention == FlipConvention::kPixelEdge ? width - u : (width - 1) - u;
}

}  // namespace vlo
