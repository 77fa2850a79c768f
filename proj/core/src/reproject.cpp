#include "depthprop/reproject.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "depthprop/parallel.hpp"

namespace depthprop {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

inline int round_px(double v) { return static_cast<int>(std::lround(v)); }

// Fallback: propagate the previous depth unchanged under a zero motion.
DepthEstimate degraded_estimate(const DepthMap& d0, Clock::time_point t0, StageTimings timings) {
  DepthEstimate out;
  out.depth = d0;
  out.assignment = AssignmentMap(d0.width, d0.height);
  for (int y = 0; y < d0.height; ++y) {
    for (int x = 0; x < d0.width; ++x) {
      if (d0.valid_at(x, y)) out.assignment.at(x, y) = 0;
    }
  }
  out.motions.motions.push_back(RigidMotion{});
  out.motions.inlier_counts.push_back(0);
  out.degraded = true;
  timings.total_ms = ms_since(t0);
  out.timings = timings;
  return out;
}

}  // namespace

ReprojectionResult reproject_image(const GrayImage& i0, const DepthMap& d0, const RigidMotion& m,
                                   const Intrinsics& k) {
  if (i0.width != d0.width || i0.height != d0.height) {
    throw std::invalid_argument("reproject_image: image/depth grids must be aligned");
  }
  ReprojectionResult out;
  out.image = GrayImage(i0.width, i0.height);
  out.depth_buffer = DepthMap(i0.width, i0.height);
  out.source_map.assign(i0.pixel_count(), -1);

  for (int y = 0; y < i0.height; ++y) {
    for (int x = 0; x < i0.width; ++x) {
      if (!d0.valid_at(x, y)) continue;
      const Vec3 moved = apply_motion(lift(Vec2(x, y), d0.at(x, y), k), m);
      if (!(moved.z() > 0.0)) continue;
      const Vec2 target = project(moved, k);
      const int tx = round_px(target.x());
      const int ty = round_px(target.y());
      if (!out.image.in_bounds(tx, ty)) continue;
      const double z = moved.z();
      const double existing = out.depth_buffer.at(tx, ty);
      // z-buffer: the nearer point wins; first writer keeps ties.
      if (existing == 0.0 || z < existing) {
        out.depth_buffer.at(tx, ty) = z;
        out.image.at(tx, ty) = i0.at(x, y);
        out.source_map[static_cast<std::size_t>(ty) * i0.width + tx] = y * i0.width + x;
      }
    }
  }
  return out;
}

ErrorMap photometric_error(const GrayImage& i0, const GrayImage& i1, const DepthMap& d0,
                           const RigidMotion& m, const Intrinsics& k) {
  if (i0.width != i1.width || i0.height != i1.height || i0.width != d0.width ||
      i0.height != d0.height) {
    throw std::invalid_argument("photometric_error: inputs must be aligned");
  }
  ErrorMap out(i0.width, i0.height);
  const double wx = m.omega.x(), wy = m.omega.y(), wz = m.omega.z();
  const double tx = m.t.x(), ty = m.t.y(), tz = m.t.z();
  std::vector<double> ray_x(i0.width);
  for (int x = 0; x < i0.width; ++x) ray_x[x] = (x - k.xc) / k.f;
  for (int y = 0; y < i0.height; ++y) {
    const double ry = (y - k.yc) / k.f;
    for (int x = 0; x < i0.width; ++x) {
      const double z = d0.at(x, y);
      if (!(z > 0.0) || !std::isfinite(z)) continue;
      const double px = z * ray_x[x];
      const double py = z * ry;
      const double mx = px + wy * z - wz * py + tx;
      const double my = py + wz * px - wx * z + ty;
      const double mz = z + wx * py - wy * px + tz;
      if (!(mz > 0.0)) continue;
      const auto sampled = sample_bilinear(i1, k.f * mx / mz + k.xc, k.f * my / mz + k.yc);
      if (!sampled) continue;
      const std::size_t i = out.idx(x, y);
      out.data[i] = std::abs(*sampled - i0.at(x, y));
      out.mask[i] = 1;
    }
  }
  return out;
}

std::vector<ErrorMap> filter_errors(const std::vector<ErrorMap>& errors, const GrayImage& guide,
                                    int radius, float eps) {
  std::vector<ErrorMap> out(errors.size());
  parallel_for(0, static_cast<int>(errors.size()),
               [&](int j) { out[j] = guided_filter(errors[j], guide, radius, eps); });
  return out;
}

AssignmentMap assign_motions(const std::vector<ErrorMap>& filtered) {
  if (filtered.empty()) throw std::invalid_argument("assign_motions: empty motion list");
  const int w = filtered[0].width;
  const int h = filtered[0].height;
  for (const ErrorMap& e : filtered) {
    if (e.width != w || e.height != h) {
      throw std::invalid_argument("assign_motions: error map dimensions must match");
    }
  }
  AssignmentMap out(w, h);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (std::size_t i = 0; i < n; ++i) {
    int best = -1;
    float best_err = 0.0f;
    for (std::size_t j = 0; j < filtered.size(); ++j) {
      if (!filtered[j].mask[i]) continue;
      const float e = filtered[j].data[i];
      if (best < 0 || e < best_err) {
        best = static_cast<int>(j);
        best_err = e;
      }
    }
    if (best >= 0) out.labels[i] = static_cast<std::int16_t>(best);
  }
  return out;
}

DepthEstimate estimate_depth(const GrayImage& i0, const GrayImage& i1, const DepthMap& d0,
                             const Intrinsics& k, const PipelineParams& params) {
  if (i0.width != i1.width || i0.height != i1.height || i0.width != d0.width ||
      i0.height != d0.height) {
    throw std::invalid_argument("estimate_depth: inputs must be aligned");
  }
  if (k.width != i0.width || k.height != i0.height || !k.valid()) {
    throw std::invalid_argument("estimate_depth: intrinsics must match the image size");
  }
  const auto t0 = Clock::now();
  StageTimings timings;

  std::vector<Correspondence> correspondences;
  try {
    correspondences = build_correspondences(i0, i1, d0, k, params.flow);
  } catch (const InsufficientFeatures&) {
    timings.features_ms = ms_since(t0);
    return degraded_estimate(d0, t0, timings);
  }
  timings.features_ms = ms_since(t0);

  const auto t1 = Clock::now();
  MotionSet motions;
  try {
    motions = estimate_motions(correspondences, k, params.motion);
  } catch (const NoMotion&) {
    timings.motion_ms = ms_since(t1);
    return degraded_estimate(d0, t0, timings);
  }
  timings.motion_ms = ms_since(t1);

  const auto t2 = Clock::now();
  std::vector<ErrorMap> errors(motions.size());
  parallel_for(0, static_cast<int>(motions.size()), [&](int j) {
    errors[j] = photometric_error(i0, i1, d0, motions.motions[j], k);
  });
  const std::vector<ErrorMap> filtered =
      filter_errors(errors, i0, params.filter_radius, params.filter_eps);
  AssignmentMap assignment = assign_motions(filtered);
  timings.assignment_ms = ms_since(t2);

  const auto t3 = Clock::now();
  DepthMap d1(d0.width, d0.height);
  for (int y = 0; y < d0.height; ++y) {
    for (int x = 0; x < d0.width; ++x) {
      if (!d0.valid_at(x, y)) continue;
      // Pixels with no defined error under any motion still move with the
      // dominant consensus motion (index 0).
      const std::int16_t label = assignment.at(x, y);
      const RigidMotion& m = motions.motions[label >= 0 ? label : 0];
      const Vec3 moved = apply_motion(lift(Vec2(x, y), d0.at(x, y), k), m);
      if (!(moved.z() > 0.0)) continue;
      const Vec2 target = project(moved, k);
      const int tx = round_px(target.x());
      const int ty = round_px(target.y());
      if (tx < 0 || tx >= d1.width || ty < 0 || ty >= d1.height) continue;
      const double z = moved.z();
      double& slot = d1.at(tx, ty);
      if (slot == 0.0 || z < slot) slot = z;
    }
  }
  timings.reprojection_ms = ms_since(t3);
  timings.total_ms = ms_since(t0);

  DepthEstimate out;
  out.depth = std::move(d1);
  out.assignment = std::move(assignment);
  out.motions = std::move(motions);
  out.degraded = false;
  out.timings = timings;
  return out;
}

}  // namespace depthprop
