#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Core>

namespace tacs {

template <typename Scalar>
using Vec2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Mat2 = Eigen::Matrix<Scalar, 2, 2>;

using Vec2d = Vec2<double>;
using Mat2d = Mat2<double>;
using Vec3d = Eigen::Vector3d;
using Mat3d = Eigen::Matrix3d;

/// Wraps an angle into (-pi, pi].
template <typename Scalar>
Scalar wrap_angle(Scalar a) {
  constexpr Scalar pi = std::numbers::pi_v<Scalar>;
  constexpr Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  a = std::fmod(a + pi, two_pi);
  if (a <= 0) a += two_pi;
  return a - pi;
}

template <typename Scalar>
Mat2<Scalar> rotation(Scalar theta) {
  const Scalar c = std::cos(theta), s = std::sin(theta);
  Mat2<Scalar> r;
  r << c, -s, s, c;
  return r;
}

/// d/dtheta of rotation(theta).
template <typename Scalar>
Mat2<Scalar> rotation_derivative(Scalar theta) {
  const Scalar c = std::cos(theta), s = std::sin(theta);
  Mat2<Scalar> r;
  r << -s, -c, c, -s;
  return r;
}

/// Planar rigid transform: p_parent = R(theta) p_child + t.
template <typename Scalar>
struct SE2 {
  Vec2<Scalar> t = Vec2<Scalar>::Zero();
  Scalar theta = 0;

  SE2() = default;
  SE2(Scalar x, Scalar y, Scalar th) : t(x, y), theta(wrap_angle(th)) {}
  SE2(const Vec2<Scalar>& trans, Scalar th) : t(trans), theta(wrap_angle(th)) {}

  static SE2 from_vector(const Eigen::Matrix<Scalar, 3, 1>& v) { return SE2(v.x(), v.y(), v.z()); }
  Eigen::Matrix<Scalar, 3, 1> vector() const { return {t.x(), t.y(), theta}; }

  Scalar x() const { return t.x(); }
  Scalar y() const { return t.y(); }

  Mat2<Scalar> R() const { return rotation(theta); }

  SE2 operator*(const SE2& o) const { return SE2(t + R() * o.t, theta + o.theta); }
  Vec2<Scalar> operator*(const Vec2<Scalar>& p) const { return R() * p + t; }

  SE2 inverse() const {
    const Mat2<Scalar> rt = R().transpose();
    return SE2(-(rt * t), -theta);
  }

  /// this^-1 * other
  SE2 between(const SE2& other) const { return inverse() * other; }
};

using Pose2 = SE2<double>;

/// Oriented 2D line n . p = d with unit normal n = (cos phi, sin phi).
template <typename Scalar>
struct Line2 {
  Scalar phi = 0;
  Scalar d = 0;

  Vec2<Scalar> normal() const { return {std::cos(phi), std::sin(phi)}; }
  Scalar signed_distance(const Vec2<Scalar>& p) const { return normal().dot(p) - d; }
};

/// Expresses a child-frame line in the parent frame of `pose`.
template <typename Scalar>
Line2<Scalar> transform_line(const Line2<Scalar>& child, const SE2<Scalar>& pose) {
  Line2<Scalar> out;
  out.phi = wrap_angle(child.phi + pose.theta);
  out.d = child.d + out.normal().dot(pose.t);
  return out;
}

/// Inverse of transform_line: expresses a parent-frame line in the child frame.
template <typename Scalar>
Line2<Scalar> inverse_transform_line(const Line2<Scalar>& parent, const SE2<Scalar>& pose) {
  Line2<Scalar> out;
  out.phi = wrap_angle(parent.phi - pose.theta);
  out.d = parent.d - parent.normal().dot(pose.t);
  return out;
}

inline double deg2rad(double deg) { return deg * std::numbers::pi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / std::numbers::pi; }

}  // namespace tacs
