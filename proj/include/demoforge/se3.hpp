#pragma once

// Rigid-body pose algebra. Quaternions are Hamilton, w-first, and every
// quaternion handed out by this header is unit-norm with w >= 0.

#include <cmath>
#include <numbers>
#include <ostream>

#include <Eigen/Geometry>

namespace demoforge {

using Vec3 = Eigen::Vector3d;

struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }

  Vec3 vec() const { return {x, y, z}; }
  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
  Quat conjugate() const { return {w, -x, -y, -z}; }

  friend bool operator==(const Quat&, const Quat&) = default;
};

inline Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

/// Unit norm, w >= 0. When w == 0 the sign is fixed so that the first
/// nonzero vector component is positive.
inline Quat canonicalize(Quat q) {
  const double n = q.norm();
  q = {q.w / n, q.x / n, q.y / n, q.z / n};
  bool flip = q.w < 0.0;
  if (q.w == 0.0) {
    if (q.x != 0.0) {
      flip = q.x < 0.0;
    } else if (q.y != 0.0) {
      flip = q.y < 0.0;
    } else {
      flip = q.z < 0.0;
    }
  }
  if (flip) q = {-q.w, -q.x, -q.y, -q.z};
  if (q.w == 0.0) q.w = 0.0;  // drop -0.0
  return q;
}

inline Vec3 rotate(const Quat& q, const Vec3& v) {
  // v' = v + 2w (u x v) + 2 u x (u x v)
  const Vec3 u = q.vec();
  const Vec3 t = 2.0 * u.cross(v);
  return v + q.w * t + u.cross(t);
}

/// Rotation vector: direction is the axis, magnitude the angle in [0, pi].
struct AxisAngle {
  Vec3 rotvec = Vec3::Zero();

  double angle() const { return rotvec.norm(); }
};

inline constexpr double kSmallAngle = 1e-8;

inline AxisAngle quat_to_axis_angle(const Quat& q_in) {
  const Quat q = canonicalize(q_in);
  const Vec3 v = q.vec();
  const double n = v.norm();
  if (n < kSmallAngle) {
    // first-order log map; exact to O(theta^3)
    return {2.0 * v / q.w};
  }
  const double angle = 2.0 * std::atan2(n, q.w);
  return {v * (angle / n)};
}

inline Quat axis_angle_to_quat(const AxisAngle& r) {
  const double theta = r.rotvec.norm();
  double s;  // sin(theta/2) / theta
  if (theta < kSmallAngle) {
    s = 0.5 - theta * theta / 48.0;
  } else {
    s = std::sin(0.5 * theta) / theta;
  }
  return canonicalize({std::cos(0.5 * theta), s * r.rotvec.x(), s * r.rotvec.y(), s * r.rotvec.z()});
}

struct Pose {
  Vec3 position = Vec3::Zero();
  Quat orientation;

  Pose() = default;
  Pose(const Vec3& p, const Quat& q) : position(p), orientation(canonicalize(q)) {}

  static Pose identity() { return {}; }

  Pose inverse() const {
    const Quat qi = orientation.conjugate();
    return {-rotate(qi, position), qi};
  }
};

/// a ∘ d: apply d expressed in a's frame.
inline Pose compose_pose(const Pose& a, const Pose& d) {
  return {a.position + rotate(a.orientation, d.position), a.orientation * d.orientation};
}

/// a⁻¹ ∘ b: b expressed in a's frame.
inline Pose relative_pose(const Pose& a, const Pose& b) {
  const Quat ai = a.orientation.conjugate();
  return {rotate(ai, b.position - a.position), ai * b.orientation};
}

inline Pose pose_from(const Vec3& dpos, const AxisAngle& drot) {
  return {dpos, axis_angle_to_quat(drot)};
}

inline std::ostream& operator<<(std::ostream& os, const Quat& q) {
  return os << "(" << q.w << ", " << q.x << ", " << q.y << ", " << q.z << ")";
}

inline std::ostream& operator<<(std::ostream& os, const Pose& p) {
  return os << "[" << p.position.transpose() << " | " << p.orientation << "]";
}

}  // namespace demoforge
