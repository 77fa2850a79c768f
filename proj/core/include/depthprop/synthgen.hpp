#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "depthprop/camera.hpp"
#include "depthprop/image.hpp"
#include "depthprop/reproject.hpp"

namespace depthprop {

/// A textured plane patch. The region is the frame-0 image rectangle
/// [x0, x1) x [y0, y1) the patch covers; where rectangles overlap, the plane
/// that comes later in the scene list takes precedence, so an earlier
/// full-image plane acts as background.
struct PlaneSpec {
  Vec3 point = Vec3(0, 0, 2);   ///< a point on the plane, meters
  Vec3 normal = Vec3(0, 0, 1);  ///< plane normal (need not be unit)
  std::array<double, 4> region{0, 0, 0, 0};  ///< x0, y0, x1, y1
  RigidMotion motion;                        ///< per frame interval
  std::uint64_t texture_seed = 0;
};

struct SceneSpec {
  Intrinsics intrinsics;
  std::vector<PlaneSpec> planes;
  int frame_count = 2;
  double noise_std = 0.0;  ///< additive intensity noise
  std::uint64_t seed = 0;
};

struct SyntheticFrame {
  GrayImage image;
  DepthMap depth;
  AssignmentMap segmentation;        ///< ground-truth plane label per pixel
  std::vector<RigidMotion> motions;  ///< active over [t, t+1], one per plane
};

struct InvalidScene : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Throws InvalidScene when a plane is degenerate over its region, regions
/// fall outside the image, or counts are out of range.
void validate_scene(const SceneSpec& spec);

/// Renders frame t: each plane is advanced t motion steps, depth comes from
/// ray-plane intersection, and intensity from a band-limited procedural
/// texture anchored to the plane so that consecutive frames are exactly
/// consistent warps of each other.
SyntheticFrame render_frame(const SceneSpec& spec, int t);

/// Analytic correspondence of pixel p from frame t to frame t+1. Absent when
/// p hits no plane or the moved point leaves the frustum.
std::optional<Vec2> true_flow(const SceneSpec& spec, int t, const Vec2& p);

}  // namespace depthprop
