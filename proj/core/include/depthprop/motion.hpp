#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "depthprop/camera.hpp"
#include "depthprop/features.hpp"

namespace depthprop {

struct MotionParams {
  int ransac_iters = 500;
  double inlier_eps = 4.0;  ///< squared-pixel reprojection threshold
  int n_min = 25;           ///< minimum inlier count to accept a motion
  std::uint64_t rng_seed = 0;
  int max_motions = 8;

  void validate() const {
    if (ransac_iters < 1 || !(inlier_eps > 0.0) || n_min < 3 || max_motions < 1) {
      throw std::invalid_argument(
          "MotionParams: ransac_iters >= 1, inlier_eps > 0, n_min >= 3, max_motions >= 1");
    }
  }
};

/// The independent rigid motions of one frame interval, in extraction order
/// (largest consensus first).
struct MotionSet {
  std::vector<RigidMotion> motions;
  std::vector<int> inlier_counts;

  std::size_t size() const { return motions.size(); }
};

struct DegenerateConfiguration : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoConsensus : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NoMotion : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// The two algebraic image-plane residuals of a correspondence under a
/// motion; both are linear in (omega, t) and vanish when the moved point
/// projects exactly onto p'.
std::pair<double, double> residuals(const Correspondence& c, const RigidMotion& m,
                                    const Intrinsics& k);

/// Least-squares motion from >= 3 correspondences: stacks the two residual
/// rows per correspondence into a 2Nx6 system and solves it with a
/// rank-revealing QR. Throws DegenerateConfiguration when the normal matrix
/// is rank deficient or its condition estimate reaches 1e12.
RigidMotion solve_motion(const std::vector<Correspondence>& cs, const Intrinsics& k);

/// Indices whose squared reprojection error under m is <= eps. Points that
/// end up behind the camera are excluded.
std::vector<int> inlier_set(const std::vector<Correspondence>& cs, const RigidMotion& m,
                            const Intrinsics& k, double eps);

/// Seeded RANSAC over minimal 3-point samples, scored by inlier count, with
/// one refit on the winning inlier set. Throws NoConsensus when no
/// hypothesis reaches 3 inliers.
std::pair<RigidMotion, std::vector<int>> ransac_motion(const std::vector<Correspondence>& cs,
                                                       const Intrinsics& k,
                                                       const MotionParams& params);

/// Greedy sequential extraction: RANSAC on the remaining correspondences,
/// keep the motion while its inlier count stays >= n_min, remove the inliers
/// and repeat. Stops on exhaustion or max_motions; the motion count is never
/// specified up front. Throws NoMotion when the first round already fails.
MotionSet estimate_motions(const std::vector<Correspondence>& cs, const Intrinsics& k,
                           const MotionParams& params);

}  // namespace depthprop
