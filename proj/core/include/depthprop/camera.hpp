#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace depthprop {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Pinhole intrinsics with a single principal distance (square pixels).
struct Intrinsics {
  double f = 0.0;   ///< principal distance in pixels
  double xc = 0.0;  ///< principal point x in pixels
  double yc = 0.0;  ///< principal point y in pixels
  int width = 0;
  int height = 0;

  bool valid() const {
    return f > 0.0 && width > 0 && height > 0 && xc >= 0.0 && xc < width &&
           yc >= 0.0 && yc < height;
  }
};

/// Linearized rigid motion over one frame interval: P' = P + omega x P + t.
/// The model is deliberately not re-orthogonalized; accuracy degrades for
/// large angular velocities.
struct RigidMotion {
  Vec3 omega = Vec3::Zero();  ///< angular velocity, rad per frame interval
  Vec3 t = Vec3::Zero();      ///< translation, meters per frame interval

  bool finite() const { return omega.allFinite() && t.allFinite(); }
};

/// Back-projects pixel p at depth z (meters along the optical axis).
inline Vec3 lift(const Vec2& p, double z, const Intrinsics& k) {
  if (!(z > 0.0) || !std::isfinite(z)) {
    throw std::invalid_argument("lift: depth must be positive and finite");
  }
  return {z * (p.x() - k.xc) / k.f, z * (p.y() - k.yc) / k.f, z};
}

/// Perspective projection. The result may lie outside the image bounds;
/// callers are responsible for bounds checks.
inline Vec2 project(const Vec3& P, const Intrinsics& k) {
  if (!(P.z() > 0.0)) {
    throw std::domain_error("project: point behind camera");
  }
  return {k.f * P.x() / P.z() + k.xc, k.f * P.y() / P.z() + k.yc};
}

inline Vec3 apply_motion(const Vec3& P, const RigidMotion& m) {
  return P + m.omega.cross(P) + m.t;
}

}  // namespace depthprop
