#include "depthprop/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "depthprop/parallel.hpp"
#include "depthprop/random.hpp"

namespace depthprop {

namespace {

Eigen::Matrix3d cross_matrix(const Vec3& w) {
  Eigen::Matrix3d m;
  m << 0, -w.z(), w.y(), w.z(), 0, -w.x(), -w.y(), w.x(), 0;
  return m;
}

// Band-limited procedural texture: a seeded sum of sinusoids evaluated in
// plane coordinates (meters), so any view of the plane samples one fixed
// pattern. Frequencies are chosen so that, seen from the frame-0 viewpoint,
// wavelengths span roughly 10 to 40 pixels at any image resolution.
struct SinTexture {
  struct Component {
    double fu, fv, amp, phase;
  };
  std::vector<Component> components;

  static SinTexture make(std::uint64_t seed, double px_per_meter) {
    Rng rng(seed);
    SinTexture t;
    t.components.resize(20);
    for (auto& c : t.components) {
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const double freq_px = rng.uniform(2.0 * M_PI / 45.0, 2.0 * M_PI / 10.0);
      const double freq = freq_px * px_per_meter;  // rad per meter
      c.fu = freq * std::cos(angle);
      c.fv = freq * std::sin(angle);
      // amp ~ 1/freq^2 caps the summed curvature, which bounds the bilinear
      // interpolation error of any view of the texture.
      c.amp = std::min(0.0025 / (freq_px * freq_px), 0.09);
      c.phase = rng.uniform(0.0, 2.0 * M_PI);
    }
    return t;
  }

  float eval(double u, double v) const {
    double s = 0.5;
    for (const auto& c : components) s += c.amp * std::sin(c.fu * u + c.fv * v + c.phase);
    return static_cast<float>(std::clamp(s, 0.0, 1.0));
  }
};

// Plane advanced to a frame together with the affine map taking frame-t
// points back to frame 0 (exact inverse of the composed linearized motions).
struct PlaneState {
  Vec3 point;
  Vec3 normal;
  Eigen::Matrix3d back_rot;
  Vec3 back_t;
  Vec3 e1, e2;  // frame-0 in-plane texture basis
  SinTexture texture;
};

PlaneState advance_plane(const PlaneSpec& spec, const Intrinsics& k, int t) {
  PlaneState s;
  s.point = spec.point;
  s.normal = spec.normal;
  s.back_rot = Eigen::Matrix3d::Identity();
  s.back_t = Vec3::Zero();
  const Eigen::Matrix3d fwd = Eigen::Matrix3d::Identity() + cross_matrix(spec.motion.omega);
  const Eigen::Matrix3d inv = fwd.inverse();
  for (int i = 0; i < t; ++i) {
    s.point = fwd * s.point + spec.motion.t;
    s.normal = fwd * s.normal;
    s.back_rot = s.back_rot * inv;
    s.back_t = s.back_t - s.back_rot * spec.motion.t;
  }
  const Vec3 n = spec.normal.normalized();
  const Vec3 axis = std::abs(n.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  s.e1 = n.cross(axis).normalized();
  s.e2 = n.cross(s.e1).normalized();
  s.texture = SinTexture::make(spec.texture_seed, k.f / std::max(spec.point.z(), 0.5));
  return s;
}

bool in_region(const SceneSpec& spec, std::size_t plane_idx, const Vec2& p0) {
  const auto& r = spec.planes[plane_idx].region;
  if (!(p0.x() >= r[0] && p0.x() < r[2] && p0.y() >= r[1] && p0.y() < r[3])) return false;
  for (std::size_t j = plane_idx + 1; j < spec.planes.size(); ++j) {
    const auto& o = spec.planes[j].region;
    if (p0.x() >= o[0] && p0.x() < o[2] && p0.y() >= o[1] && p0.y() < o[3]) return false;
  }
  return true;
}

struct Hit {
  int plane = -1;
  double z = std::numeric_limits<double>::infinity();
  Vec3 point0;  // frame-0 position of the surface point
};

Hit intersect(const SceneSpec& spec, const std::vector<PlaneState>& states, const Vec2& pixel) {
  const Intrinsics& k = spec.intrinsics;
  const Vec3 dir((pixel.x() - k.xc) / k.f, (pixel.y() - k.yc) / k.f, 1.0);
  Hit best;
  for (std::size_t p = 0; p < states.size(); ++p) {
    const PlaneState& st = states[p];
    const double denom = st.normal.dot(dir);
    if (std::abs(denom) < 1e-12) continue;
    const double z = st.normal.dot(st.point) / denom;  // dir.z == 1
    if (!(z > 1e-9) || z >= best.z) continue;
    const Vec3 hit = z * dir;
    const Vec3 hit0 = states[p].back_rot * hit + states[p].back_t;
    if (!(hit0.z() > 0.0)) continue;
    if (!in_region(spec, p, project(hit0, k))) continue;
    best.plane = static_cast<int>(p);
    best.z = z;
    best.point0 = hit0;
  }
  return best;
}

}  // namespace

void validate_scene(const SceneSpec& spec) {
  if (!spec.intrinsics.valid()) throw InvalidScene("scene: invalid intrinsics");
  if (spec.planes.empty()) throw InvalidScene("scene: no planes");
  if (spec.frame_count < 1) throw InvalidScene("scene: frame_count must be >= 1");
  if (spec.noise_std < 0.0) throw InvalidScene("scene: noise_std must be >= 0");
  for (std::size_t p = 0; p < spec.planes.size(); ++p) {
    const PlaneSpec& pl = spec.planes[p];
    if (pl.normal.norm() == 0.0) throw InvalidScene("scene: zero plane normal");
    const auto& r = pl.region;
    if (!(r[0] < r[2] && r[1] < r[3]) || r[0] < 0 || r[1] < 0 ||
        r[2] > spec.intrinsics.width || r[3] > spec.intrinsics.height) {
      throw InvalidScene("scene: region must be a non-empty rectangle inside the image");
    }
    // Front-facing across the region at frame 0: probe the corners.
    for (const Vec2& c : {Vec2(r[0], r[1]), Vec2(r[2] - 1, r[1]), Vec2(r[0], r[3] - 1),
                          Vec2(r[2] - 1, r[3] - 1)}) {
      const Vec3 dir((c.x() - spec.intrinsics.xc) / spec.intrinsics.f,
                     (c.y() - spec.intrinsics.yc) / spec.intrinsics.f, 1.0);
      const double denom = pl.normal.dot(dir);
      if (std::abs(denom) < 1e-12 || !(pl.normal.dot(pl.point) / denom > 0.0)) {
        throw InvalidScene("scene: plane not front-facing over its region");
      }
    }
  }
}

SyntheticFrame render_frame(const SceneSpec& spec, int t) {
  validate_scene(spec);
  if (t < 0 || t >= spec.frame_count) throw InvalidScene("render_frame: frame index out of range");

  std::vector<PlaneState> states;
  states.reserve(spec.planes.size());
  for (const PlaneSpec& p : spec.planes) states.push_back(advance_plane(p, spec.intrinsics, t));

  const Intrinsics& k = spec.intrinsics;
  SyntheticFrame frame;
  frame.image = GrayImage(k.width, k.height, 0.5f);
  frame.depth = DepthMap(k.width, k.height);
  frame.segmentation = AssignmentMap(k.width, k.height);
  for (const PlaneSpec& p : spec.planes) frame.motions.push_back(p.motion);

  parallel_for(0, k.height, [&](int y) {
    for (int x = 0; x < k.width; ++x) {
      const Hit hit = intersect(spec, states, Vec2(x, y));
      if (hit.plane < 0) continue;
      const PlaneState& st = states[hit.plane];
      const Vec3 rel = hit.point0 - spec.planes[hit.plane].point;
      frame.image.at(x, y) = st.texture.eval(st.e1.dot(rel), st.e2.dot(rel));
      frame.depth.at(x, y) = hit.z;
      frame.segmentation.at(x, y) = static_cast<std::int16_t>(hit.plane);
    }
  });

  if (spec.noise_std > 0.0) {
    Rng rng(spec.seed + 0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(t + 1));
    for (float& v : frame.image.data) {
      v = static_cast<float>(std::clamp(v + spec.noise_std * rng.normal(), 0.0, 1.0));
    }
  }
  return frame;
}

std::optional<Vec2> true_flow(const SceneSpec& spec, int t, const Vec2& p) {
  validate_scene(spec);
  if (t < 0 || t + 1 >= spec.frame_count) {
    throw InvalidScene("true_flow: interval out of range");
  }
  std::vector<PlaneState> states;
  states.reserve(spec.planes.size());
  for (const PlaneSpec& pl : spec.planes) {
    states.push_back(advance_plane(pl, spec.intrinsics, t));
  }

  const Hit hit = intersect(spec, states, p);
  if (hit.plane < 0) return std::nullopt;
  const Vec3 P = lift(p, hit.z, spec.intrinsics);
  const Vec3 moved = apply_motion(P, spec.planes[hit.plane].motion);
  if (!(moved.z() > 0.0)) return std::nullopt;
  const Vec2 q = project(moved, spec.intrinsics);
  if (q.x() < 0.0 || q.x() > spec.intrinsics.width - 1.0 || q.y() < 0.0 ||
      q.y() > spec.intrinsics.height - 1.0) {
    return std::nullopt;
  }
  return q;
}

}  // namespace depthprop
