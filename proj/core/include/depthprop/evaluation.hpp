#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "depthprop/camera.hpp"
#include "depthprop/image.hpp"
#include "depthprop/reproject.hpp"

namespace depthprop {

/// Depth error metrics over the jointly valid pixels within the cutoff.
/// Pixels where the estimate has a hole are excluded from the error means
/// and show up in coverage instead.
struct FrameMetrics {
  double mre = 0.0;   ///< mean |Z - Zhat| / Z
  double mae = 0.0;   ///< mean |Z - Zhat|, meters
  double rmse = 0.0;  ///< sqrt(mean (Z - Zhat)^2), meters
  std::size_t n_evaluated = 0;
  double coverage = 0.0;  ///< valid estimates among valid ground-truth pixels
  bool degraded = false;  ///< estimate came from the fallback path
};

struct EmptyOverlap : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr double kDefaultMetricCutoff = 20.0;  // meters

FrameMetrics compute_metrics(const DepthMap& estimate, const DepthMap& truth,
                             double max_depth = kDefaultMetricCutoff);

struct SequenceFrame {
  GrayImage image;
  DepthMap truth;
};

/// Sequential estimation protocol: the first estimate uses the measured
/// depth at `start`; every following frame reuses the previously *estimated*
/// depth map. Returns one FrameMetrics per offset 1..horizon.
std::vector<FrameMetrics> sequential_run(const std::vector<SequenceFrame>& frames,
                                         const Intrinsics& k, int start, int horizon,
                                         const PipelineParams& params,
                                         double max_depth = kDefaultMetricCutoff);

struct OffsetAggregate {
  int offset = 0;
  double mre = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double coverage = 0.0;
  int n_runs = 0;
};

struct SequenceReport {
  std::vector<OffsetAggregate> offsets;  ///< offsets 1..horizon
  OffsetAggregate summary;               ///< means over offsets (offset field 0)
  int horizon = 0;
  std::uint64_t seed = 0;   ///< run metadata, filled by the caller
  double wall_ms = 0.0;     ///< run metadata, filled by the caller
};

/// Per-offset means across runs plus the overall summary reduction.
SequenceReport aggregate(const std::vector<std::vector<FrameMetrics>>& runs);

/// Fraction of frames that no longer need the depth sensor when one measured
/// map seeds `horizon` estimated ones.
inline double sensor_usage_reduction(int horizon) {
  return static_cast<double>(horizon) / (horizon + 1.0);
}

}  // namespace depthprop
