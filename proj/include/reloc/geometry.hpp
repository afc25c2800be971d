#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "reloc/error.hpp"

namespace reloc {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg_to_rad(double d) { return d * kPi / 180.0; }
inline double rad_to_deg(double r) { return r * 180.0 / kPi; }

/// Pinhole camera. Pixel coordinates are (u, v) = (column, row).
struct CameraIntrinsics {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;

  Eigen::Matrix3d matrix() const {
    Eigen::Matrix3d k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  bool contains(double u, double v) const {
    return u >= 0 && u < width && v >= 0 && v < height;
  }

  double image_diagonal() const {
    return std::sqrt(static_cast<double>(width) * width +
                     static_cast<double>(height) * height);
  }
};

inline void validate(const CameraIntrinsics& k) {
  require(k.fx > 0 && k.fy > 0, ErrorCode::invalid_input, "focal lengths must be positive");
  require(k.width > 0 && k.height > 0, ErrorCode::invalid_input, "image size must be positive");
  require(k.cx >= 0 && k.cx < k.width && k.cy >= 0 && k.cy < k.height,
          ErrorCode::invalid_input, "principal point outside the image");
}

/// Normalized camera model used by canonical-space depth predictions.
struct CanonicalCameraConfig {
  double fc = 0;
  double uc = 0, vc = 0;
};

namespace detail {
inline bool is_rotation_matrix(const Eigen::Matrix3d& m, double tol) {
  const Eigen::Matrix3d err = m * m.transpose() - Eigen::Matrix3d::Identity();
  return err.cwiseAbs().maxCoeff() <= tol && std::abs(m.determinant() - 1.0) <= tol;
}
}  // namespace detail

/// Proper rotation, stored as a 3x3 matrix. Quaternions appear only at I/O
/// boundaries and are normalized on the way in.
class Rotation {
 public:
  Rotation() : m_(Eigen::Matrix3d::Identity()) {}

  static Rotation identity() { return Rotation(); }

  static Rotation from_matrix(const Eigen::Matrix3d& m, double tol = 1e-9) {
    require(detail::is_rotation_matrix(m, tol), ErrorCode::invalid_input,
            "matrix is not a rotation");
    return Rotation(m, unchecked{});
  }

  static Rotation axis_angle(const Eigen::Vector3d& axis, double angle_rad) {
    const double n = axis.norm();
    require(n > 0, ErrorCode::invalid_input, "zero rotation axis");
    return Rotation(Eigen::AngleAxisd(angle_rad, axis / n).toRotationMatrix(), unchecked{});
  }

  /// (w, x, y, z), normalized on read.
  static Rotation from_quaternion(double w, double x, double y, double z) {
    Eigen::Quaterniond q(w, x, y, z);
    const double n = q.norm();
    require(n > 0, ErrorCode::invalid_input, "zero quaternion");
    q.coeffs() /= n;
    return Rotation(q.toRotationMatrix(), unchecked{});
  }

  /// (w, x, y, z) with w >= 0.
  std::array<double, 4> to_quaternion() const {
    Eigen::Quaterniond q(m_);
    if (q.w() < 0) q.coeffs() *= -1;
    return {q.w(), q.x(), q.y(), q.z()};
  }

  const Eigen::Matrix3d& matrix() const { return m_; }

  Rotation transposed() const { return Rotation(m_.transpose(), unchecked{}); }

  Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

  Rotation operator*(const Rotation& o) const { return Rotation(m_ * o.m_, unchecked{}); }

 private:
  struct unchecked {};
  Rotation(const Eigen::Matrix3d& m, unchecked) : m_(m) {}
  Eigen::Matrix3d m_;
};

/// Unit-norm translation direction.
class UnitTranslation {
 public:
  UnitTranslation() : v_(Eigen::Vector3d::UnitX()) {}

  /// Normalizes; rejects near-zero input.
  static UnitTranslation from_vector(const Eigen::Vector3d& v) {
    const double n = v.norm();
    require(n > 1e-15, ErrorCode::invalid_input, "cannot normalize a zero translation");
    UnitTranslation u;
    u.v_ = v / n;
    return u;
  }

  const Eigen::Vector3d& vector() const { return v_; }

 private:
  Eigen::Vector3d v_;
};

/// Rigid transform mapping world coordinates to camera coordinates:
/// p_cam = R * p_world + t. Relative pose of a query frame w.r.t. a
/// reference frame is pose_query o invert(pose_ref).
struct Pose {
  Rotation rotation;
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static Pose identity() { return Pose{}; }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const {
    return rotation * p + translation;
  }
};

inline Pose compose(const Pose& a, const Pose& b) {
  return Pose{a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

inline Pose invert(const Pose& p) {
  const Rotation rt = p.rotation.transposed();
  return Pose{rt, -(rt * p.translation)};
}

/// depth * K^-1 * [u, v, 1]^T. The returned z equals depth.
inline Eigen::Vector3d backproject(const CameraIntrinsics& k, const Eigen::Vector2d& pixel,
                                   double depth) {
  require(depth > 0, ErrorCode::invalid_input, "depth must be positive");
  return {depth * (pixel.x() - k.cx) / k.fx, depth * (pixel.y() - k.cy) / k.fy, depth};
}

inline Eigen::Vector2d project(const CameraIntrinsics& k, const Eigen::Vector3d& point) {
  require(point.z() > 0, ErrorCode::behind_camera, "point behind the camera");
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

/// Relative angle in degrees, in [0, 180]. The trace argument is clamped so
/// numerically drifted inputs cannot produce NaN at the identity.
inline double rotation_angle_deg(const Rotation& a, const Rotation& b) {
  const double tr = (a.matrix() * b.matrix().transpose()).trace();
  const double c = std::clamp((tr - 1.0) / 2.0, -1.0, 1.0);
  return rad_to_deg(std::acos(c));
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

/// E = [t]x R for the relative pose (R, t) with p_query = R p_ref + t, so the
/// epipolar constraint reads x_query^T E x_ref = 0.
inline Eigen::Matrix3d essential_from_pose(const Rotation& r, const UnitTranslation& t) {
  return skew(t.vector()) * r.matrix();
}

}  // namespace reloc
