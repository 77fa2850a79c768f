#pragma once

#include <stdexcept>
#include <vector>

#include "depthprop/camera.hpp"
#include "depthprop/image.hpp"

namespace depthprop {

/// A tracked feature: pixel p in frame 0, its 3D lift P through the previous
/// depth map, and the matched pixel p' in frame 1.
struct Correspondence {
  Vec2 p;        ///< frame-0 pixel (integer detection coordinates)
  Vec2 p_prime;  ///< frame-1 pixel (sub-pixel)
  Vec3 P;        ///< lift of p through D0, camera frame
};

struct FlowParams {
  float fast_threshold = 20.0f / 255.0f;  ///< FAST intensity delta
  int max_corners = 500;
  double min_corner_distance = 8.0;  ///< pixels between accepted corners
  int lk_window = 10;                ///< half-width; window is (2w+1)^2
  int lk_pyramid_levels = 3;
  int lk_max_iters = 30;
  double lk_epsilon = 0.01;  ///< convergence threshold on the update, pixels

  void validate() const {
    if (!(fast_threshold > 0.0f) || max_corners <= 0 || !(min_corner_distance > 0.0) ||
        lk_window < 2 || lk_pyramid_levels <= 0 || lk_max_iters <= 0 || !(lk_epsilon > 0.0)) {
      throw std::invalid_argument("FlowParams: all parameters must be positive, lk_window >= 2");
    }
  }
};

struct TrackedPoint {
  Vec2 p;
  bool tracked = false;
};

struct InsufficientFeatures : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// FAST-9 segment test with non-maximum suppression on the corner score
/// (the largest threshold that keeps the pixel a corner). The result is
/// capped at max_corners with spatial spacing >= min_corner_distance and
/// returned in row-major order.
std::vector<Vec2> detect_fast(const GrayImage& img, const FlowParams& params);

/// Iterative pyramidal Lucas-Kanade. Points whose window exits the image,
/// whose structure tensor is near-singular, or whose iteration diverges come
/// back with tracked = false.
std::vector<TrackedPoint> lk_track(const GrayImage& img0, const GrayImage& img1,
                                   const std::vector<Vec2>& points, const FlowParams& params);

/// detect_fast on img0, drop corners without valid depth, track the rest into
/// img1, and lift the survivors through depth0. Throws InsufficientFeatures
/// when fewer than 3 correspondences survive.
std::vector<Correspondence> build_correspondences(const GrayImage& img0, const GrayImage& img1,
                                                  const DepthMap& depth0, const Intrinsics& k,
                                                  const FlowParams& params);

}  // namespace depthprop
