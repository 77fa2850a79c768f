#pragma once

#include <cstdint>
#include <vector>

#include "depthprop/camera.hpp"
#include "depthprop/features.hpp"
#include "depthprop/image.hpp"
#include "depthprop/motion.hpp"

namespace depthprop {

/// Per-pixel index of the assigned motion; -1 marks pixels with no valid
/// depth or no defined photometric error under any motion.
struct AssignmentMap {
  int width = 0;
  int height = 0;
  std::vector<std::int16_t> labels;

  static constexpr std::int16_t kInvalid = -1;

  AssignmentMap() = default;
  AssignmentMap(int w, int h)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, kInvalid) {}

  std::int16_t at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
  std::int16_t& at(int x, int y) { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// Forward warp of the previous image under one motion, on the frame-1 grid.
struct ReprojectionResult {
  GrayImage image;        ///< warped intensities; defined where depth_buffer is valid
  DepthMap depth_buffer;  ///< post-motion depth, minimum per target pixel
  std::vector<std::int32_t> source_map;  ///< winning source pixel index, -1 where invalid
};

struct PipelineParams {
  FlowParams flow;
  MotionParams motion;
  int filter_radius = 8;
  float filter_eps = 1e-4f;
};

struct StageTimings {
  double features_ms = 0.0;
  double motion_ms = 0.0;
  double assignment_ms = 0.0;  ///< per-motion errors, filtering, argmin
  double reprojection_ms = 0.0;
  double total_ms = 0.0;
};

struct DepthEstimate {
  DepthMap depth;
  AssignmentMap assignment;
  MotionSet motions;
  bool degraded = false;  ///< fallback path: previous depth propagated unchanged
  StageTimings timings;
};

/// Warps every valid-depth pixel of i0 under m; collisions keep the nearer
/// point (z-buffer rule). Targets never written stay invalid.
ReprojectionResult reproject_image(const GrayImage& i0, const DepthMap& d0, const RigidMotion& m,
                                   const Intrinsics& k);

/// Photometric error on the frame-0 grid: |I1 sampled at the reprojected
/// location - I0|. Pixels whose reprojection leaves I1's support (or whose
/// depth is invalid) are masked out.
ErrorMap photometric_error(const GrayImage& i0, const GrayImage& i1, const DepthMap& d0,
                           const RigidMotion& m, const Intrinsics& k);

/// Guided-filters each motion's error map with i0 as guide; masks preserved.
std::vector<ErrorMap> filter_errors(const std::vector<ErrorMap>& errors, const GrayImage& guide,
                                    int radius, float eps);

/// Per-pixel argmin over the motions whose mask is valid there; ties go to
/// the lowest motion index (largest consensus first).
AssignmentMap assign_motions(const std::vector<ErrorMap>& filtered);

/// Full pipeline: correspondences -> motions -> per-motion photometric
/// errors -> guided filtering -> assignment -> depth reprojection with the
/// minimum-depth conflict rule. When motion estimation fails outright the
/// previous depth map is propagated unchanged and the result is flagged
/// degraded.
DepthEstimate estimate_depth(const GrayImage& i0, const GrayImage& i1, const DepthMap& d0,
                             const Intrinsics& k, const PipelineParams& params);

}  // namespace depthprop
