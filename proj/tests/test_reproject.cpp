#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "depthprop/evaluation.hpp"
#include "depthprop/random.hpp"
#include "depthprop/reproject.hpp"
#include "depthprop/synthgen.hpp"
#include "test_support.hpp"

using namespace depthprop;

namespace {

// Brute-force forward splat with the minimum-depth rule; earlier row-major
// sources keep ties. Independent of the production z-buffer path.
struct SplatOracle {
  DepthMap depth;
  GrayImage image;
};

SplatOracle splat_oracle(const GrayImage& i0, const DepthMap& d0, const RigidMotion& m,
                         const Intrinsics& k) {
  SplatOracle out{DepthMap(i0.width, i0.height), GrayImage(i0.width, i0.height)};
  std::map<std::pair<int, int>, std::pair<double, float>> best;
  for (int y = 0; y < i0.height; ++y) {
    for (int x = 0; x < i0.width; ++x) {
      if (!d0.valid_at(x, y)) continue;
      const Vec3 moved = apply_motion(lift(Vec2(x, y), d0.at(x, y), k), m);
      if (!(moved.z() > 0.0)) continue;
      const Vec2 t = project(moved, k);
      const int tx = static_cast<int>(std::lround(t.x()));
      const int ty = static_cast<int>(std::lround(t.y()));
      if (tx < 0 || tx >= i0.width || ty < 0 || ty >= i0.height) continue;
      const auto key = std::make_pair(tx, ty);
      const auto it = best.find(key);
      if (it == best.end() || moved.z() < it->second.first) {
        best[key] = {moved.z(), i0.at(x, y)};
      }
    }
  }
  for (const auto& [key, val] : best) {
    out.depth.at(key.first, key.second) = val.first;
    out.image.at(key.first, key.second) = val.second;
  }
  return out;
}

DepthMap full_depth(int w, int h, double z) {
  DepthMap d(w, h);
  std::fill(d.data.begin(), d.data.end(), z);
  return d;
}

PipelineParams fast_params() { return test::scene_pipeline_params(); }

}  // namespace

TEST_CASE("reproject_image under zero motion is the identity on valid pixels") {
  const Intrinsics k = test::vga_intrinsics(64, 48);
  const GrayImage img = test::make_textured_image(64, 48, 3);
  DepthMap d0 = full_depth(64, 48, 2.0);
  d0.at(10, 10) = 0.0;  // one hole
  const ReprojectionResult r = reproject_image(img, d0, RigidMotion{}, k);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (x == 10 && y == 10) {
        CHECK(!r.depth_buffer.valid_at(x, y));
      } else {
        CHECK(r.image.at(x, y) == img.at(x, y));
        CHECK(r.depth_buffer.at(x, y) == 2.0);
        CHECK(r.source_map[static_cast<std::size_t>(y) * 64 + x] == y * 64 + x);
      }
    }
  }
}

TEST_CASE("forward translation contracts the image toward the principal point") {
  const Intrinsics k = test::vga_intrinsics(64, 48);
  const GrayImage img = test::make_textured_image(64, 48, 5);
  // Off-center valid region so the contraction moves its centroid.
  DepthMap d0(64, 48);
  for (int y = 4; y < 20; ++y) {
    for (int x = 40; x < 60; ++x) d0.at(x, y) = 2.0;
  }
  RigidMotion m;
  m.t = Vec3(0, 0, 0.5);
  const ReprojectionResult r = reproject_image(img, d0, m, k);

  const Vec2 c(k.xc, k.yc);
  Vec2 before = Vec2::Zero(), after = Vec2::Zero();
  int nb = 0, na = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (d0.valid_at(x, y)) {
        before += Vec2(x, y);
        ++nb;
      }
      if (r.depth_buffer.valid_at(x, y)) {
        after += Vec2(x, y);
        ++na;
      }
    }
  }
  REQUIRE(na > 0);
  before /= nb;
  after /= na;
  CHECK((after - c).norm() < (before - c).norm());
}

TEST_CASE("colliding points keep the nearer source") {
  // Hand-constructed collision: with f=100, c=(5,5) and T=(0,0,1), sources
  // (9,5,z=1) and (8,5,z=3) both round to target (7,5); the first ends at
  // depth 2, the second at 4.
  Intrinsics k{100.0, 5.0, 5.0, 11, 11};
  GrayImage img(11, 11, 0.0f);
  img.at(9, 5) = 0.9f;
  img.at(8, 5) = 0.8f;
  DepthMap d0(11, 11);
  d0.at(9, 5) = 1.0;
  d0.at(8, 5) = 3.0;
  RigidMotion m;
  m.t = Vec3(0, 0, 1);
  const ReprojectionResult r = reproject_image(img, d0, m, k);
  CHECK(r.depth_buffer.at(7, 5) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(r.image.at(7, 5) == 0.9f);
  CHECK(r.source_map[5 * 11 + 7] == 5 * 11 + 9);  // target (7,5) <- source (9,5)
}

TEST_CASE("reproject_image matches the brute-force z-buffer oracle") {
  const Intrinsics k = test::vga_intrinsics(48, 36);
  const GrayImage img = test::make_textured_image(48, 36, 7);
  Rng rng(11);
  DepthMap d0(48, 36);
  for (auto& v : d0.data) v = rng.uniform(0.0, 1.0) < 0.8 ? rng.uniform(0.5, 4.0) : 0.0;
  RigidMotion m;
  m.omega = Vec3(0.01, -0.008, 0.004);
  m.t = Vec3(0.05, -0.03, 0.2);
  const ReprojectionResult fast = reproject_image(img, d0, m, k);
  const SplatOracle slow = splat_oracle(img, d0, m, k);
  for (int y = 0; y < 36; ++y) {
    for (int x = 0; x < 48; ++x) {
      CHECK(fast.depth_buffer.at(x, y) == slow.depth.at(x, y));
      CHECK(fast.image.at(x, y) == slow.image.at(x, y));
    }
  }
}

TEST_CASE("photometric_error is zero for identical images under zero motion") {
  const Intrinsics k = test::vga_intrinsics(64, 48);
  const GrayImage img = test::make_textured_image(64, 48, 13);
  const DepthMap d0 = full_depth(64, 48, 2.0);
  const ErrorMap e = photometric_error(img, img, d0, RigidMotion{}, k);
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      CHECK(e.valid_at(x, y));
      CHECK(e.data[e.idx(x, y)] == 0.0f);
    }
  }
}

TEST_CASE("photometric_error sees a constant offset exactly") {
  const Intrinsics k = test::vga_intrinsics(64, 48);
  const GrayImage img = test::make_textured_image(64, 48, 17);
  GrayImage brighter = img;
  for (float& v : brighter.data) v = std::min(v + 0.1f, 1.0f);
  const DepthMap d0 = full_depth(64, 48, 2.0);
  const ErrorMap e = photometric_error(img, brighter, d0, RigidMotion{}, k);
  int interior = 0;
  for (int y = 0; y < 48; ++y) {
    for (int x = 0; x < 64; ++x) {
      if (img.at(x, y) > 0.89f) continue;  // clamped pixels
      CHECK(e.data[e.idx(x, y)] == doctest::Approx(0.1).epsilon(1e-5));
      ++interior;
    }
  }
  CHECK(interior > 1000);
}

TEST_CASE("photometric_error under the true motion is small on a rendered pair") {
  const SceneSpec spec = test::frontal_plane_scene(160, 120, Vec3(0.01, -0.006, 0.05));
  const SyntheticFrame f0 = render_frame(spec, 0);
  const SyntheticFrame f1 = render_frame(spec, 1);
  const ErrorMap e =
      photometric_error(f0.image, f1.image, f0.depth, spec.planes[0].motion, spec.intrinsics);
  int checked = 0;
  for (int y = 2; y < 118; ++y) {
    for (int x = 2; x < 158; ++x) {
      if (!e.valid_at(x, y)) continue;
      if (f1.segmentation.at(x, y) != 0) continue;
      CHECK(e.data[e.idx(x, y)] <= 0.02f);
      ++checked;
    }
  }
  CHECK(checked > 10000);
}

TEST_CASE("photometric_error masks pixels that reproject outside the frame") {
  const Intrinsics k = test::vga_intrinsics(64, 48);
  const GrayImage img = test::make_textured_image(64, 48, 19);
  const DepthMap d0 = full_depth(64, 48, 1.0);
  RigidMotion m;
  m.t = Vec3(2.0, 0, 0);  // ~105 px at Z=1 with f=52.5: everything leaves the frame
  const ErrorMap e = photometric_error(img, img, d0, m, k);
  for (std::size_t i = 0; i < e.mask.size(); ++i) CHECK(e.mask[i] == 0);
}

TEST_CASE("filter_errors preserves constants and masks") {
  const GrayImage guide = test::make_textured_image(32, 24, 23);
  ErrorMap e(32, 24);
  for (std::size_t i = 0; i < e.data.size(); ++i) {
    e.mask[i] = i % 7 != 0;
    e.data[i] = e.mask[i] ? 0.25f : 0.0f;
  }
  const auto out = filter_errors({e}, guide, 4, 1e-4f);
  REQUIRE(out.size() == 1);
  CHECK(out[0].mask == e.mask);
  for (std::size_t i = 0; i < out[0].data.size(); ++i) {
    if (out[0].mask[i]) CHECK(out[0].data[i] == doctest::Approx(0.25).epsilon(1e-5));
  }
}

TEST_CASE("filtering reduces the total variation of a noisy error map") {
  const GrayImage guide = test::make_textured_image(48, 36, 29);
  Rng rng(31);
  ErrorMap e(48, 36);
  std::fill(e.mask.begin(), e.mask.end(), 1);
  for (auto& v : e.data) v = static_cast<float>(rng.uniform(0.0, 0.5));
  const auto filtered = filter_errors({e}, guide, 4, 1e-4f)[0];
  const auto tv = [](const ErrorMap& m) {
    double sum = 0.0;
    for (int y = 0; y + 1 < m.height; ++y) {
      for (int x = 0; x + 1 < m.width; ++x) {
        sum += std::abs(m.data[m.idx(x + 1, y)] - m.data[m.idx(x, y)]) +
               std::abs(m.data[m.idx(x, y + 1)] - m.data[m.idx(x, y)]);
      }
    }
    return sum;
  };
  CHECK(tv(filtered) < tv(e));
}

TEST_CASE("assign_motions picks the per-pixel argmin with index tie-break") {
  ErrorMap a(8, 4), b(8, 4);
  std::fill(a.mask.begin(), a.mask.end(), 1);
  std::fill(b.mask.begin(), b.mask.end(), 1);
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) {
      a.data[a.idx(x, y)] = x < 4 ? 0.1f : 0.9f;
      b.data[b.idx(x, y)] = x < 4 ? 0.9f : 0.1f;
    }
  }
  const AssignmentMap split = assign_motions({a, b});
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 8; ++x) CHECK(split.at(x, y) == (x < 4 ? 0 : 1));
  }

  const AssignmentMap single = assign_motions({a});
  for (auto l : single.labels) CHECK(l == 0);

  const AssignmentMap tie = assign_motions({a, a});
  for (auto l : tie.labels) CHECK(l == 0);

  CHECK_THROWS_AS(assign_motions({}), std::invalid_argument);
}

TEST_CASE("assign_motions marks pixels invalid only where no mask is set") {
  ErrorMap a(4, 1), b(4, 1);
  a.mask = {1, 1, 0, 0};
  b.mask = {1, 0, 1, 0};
  a.data = {0.5f, 0.5f, 0.0f, 0.0f};
  b.data = {0.2f, 0.0f, 0.2f, 0.0f};
  const AssignmentMap out = assign_motions({a, b});
  CHECK(out.labels[0] == 1);
  CHECK(out.labels[1] == 0);
  CHECK(out.labels[2] == 1);
  CHECK(out.labels[3] == AssignmentMap::kInvalid);
}

TEST_CASE("assignment is invariant to scaling all error maps") {
  const SceneSpec spec = test::two_plane_scene(96, 72);
  const SyntheticFrame f0 = render_frame(spec, 0);
  const SyntheticFrame f1 = render_frame(spec, 1);
  std::vector<ErrorMap> errors;
  for (const PlaneSpec& p : spec.planes) {
    errors.push_back(photometric_error(f0.image, f1.image, f0.depth, p.motion, spec.intrinsics));
  }
  const AssignmentMap base = assign_motions(errors);
  for (ErrorMap& e : errors) {
    for (float& v : e.data) v *= 7.5f;
  }
  const AssignmentMap scaled = assign_motions(errors);
  CHECK(base.labels == scaled.labels);
}

TEST_CASE("estimate_depth propagates depth unchanged for an identical frame pair") {
  const SceneSpec spec = test::frontal_plane_scene(160, 120, Vec3::Zero());
  const SyntheticFrame f0 = render_frame(spec, 0);
  const DepthEstimate est =
      estimate_depth(f0.image, f0.image, f0.depth, spec.intrinsics, fast_params());
  CHECK(!est.degraded);
  REQUIRE(est.motions.size() >= 1);
  CHECK(est.motions.motions[0].omega.norm() + est.motions.motions[0].t.norm() <= 1e-6);
  int compared = 0;
  for (int y = 0; y < 120; ++y) {
    for (int x = 0; x < 160; ++x) {
      if (!est.depth.valid_at(x, y)) continue;
      CHECK(std::abs(est.depth.at(x, y) - f0.depth.at(x, y)) <= 1e-6);
      ++compared;
    }
  }
  CHECK(compared > 15000);
}

TEST_CASE("a pure forward translation adds its delta to every propagated depth") {
  // The depth write path with the true motion: exact to rounding.
  const SceneSpec spec = test::frontal_plane_scene(320, 240, Vec3(0, 0, 0.5));
  const SyntheticFrame f0 = render_frame(spec, 0);
  const ReprojectionResult r =
      reproject_image(f0.image, f0.depth, spec.planes[0].motion, spec.intrinsics);
  int compared = 0;
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      if (!r.depth_buffer.valid_at(x, y)) continue;
      CHECK(std::abs(r.depth_buffer.at(x, y) - (f0.depth.at(x, y) + 0.5)) <= 1e-9);
      ++compared;
    }
  }
  CHECK(compared > 40000);
}

TEST_CASE("estimate_depth tracks a global forward translation") {
  // End-to-end through estimated flow; tracker bias under the contracting
  // warp caps the attainable per-pixel accuracy around a millimeter.
  const SceneSpec spec = test::frontal_plane_scene(320, 240, Vec3(0, 0, 0.5), 2, 6.0);
  const SyntheticFrame f0 = render_frame(spec, 0);
  const SyntheticFrame f1 = render_frame(spec, 1);
  PipelineParams params = fast_params();
  params.flow.lk_window = 7;
  const DepthEstimate est = estimate_depth(f0.image, f1.image, f0.depth, spec.intrinsics, params);
  CHECK(!est.degraded);
  int compared = 0;
  double sum = 0.0;
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      if (!est.depth.valid_at(x, y)) continue;
      const double err = std::abs(est.depth.at(x, y) - 6.5);
      CHECK(err <= 1e-2);
      sum += err;
      ++compared;
    }
  }
  CHECK(compared > 40000);
  CHECK(sum / compared <= 3e-3);
}

TEST_CASE("estimate_depth separates two planes and labels them correctly") {
  const SceneSpec spec = test::two_plane_scene(320, 240);
  const SyntheticFrame f0 = render_frame(spec, 0);
  const SyntheticFrame f1 = render_frame(spec, 1);
  const DepthEstimate est =
      estimate_depth(f0.image, f1.image, f0.depth, spec.intrinsics, fast_params());
  CHECK(!est.degraded);
  REQUIRE(est.motions.size() >= 2);

  const FrameMetrics m = compute_metrics(est.depth, f1.depth);
  CHECK(m.mre <= 0.02);
  CHECK(m.coverage >= 0.85);

  // Motion labels are in extraction order; match them to planes by majority
  // vote before scoring the assignment accuracy.
  std::map<int, std::map<int, int>> votes;
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      const int est_label = est.assignment.at(x, y);
      const int true_label = f0.segmentation.at(x, y);
      if (est_label < 0 || true_label < 0) continue;
      votes[true_label][est_label]++;
    }
  }
  std::map<int, int> mapping;
  for (const auto& [true_label, counts] : votes) {
    int best = -1, best_count = -1;
    for (const auto& [est_label, count] : counts) {
      if (count > best_count) {
        best = est_label;
        best_count = count;
      }
    }
    mapping[true_label] = best;
  }
  CHECK(mapping[0] != mapping[1]);
  std::size_t agree = 0, total = 0;
  for (int y = 0; y < 240; ++y) {
    for (int x = 0; x < 320; ++x) {
      const int est_label = est.assignment.at(x, y);
      const int true_label = f0.segmentation.at(x, y);
      if (est_label < 0 || true_label < 0) continue;
      ++total;
      agree += est_label == mapping[true_label] ? 1 : 0;
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.9);
}

TEST_CASE("estimate_depth output depth is always positive where valid") {
  const SceneSpec spec = test::two_plane_scene(160, 120);
  const SyntheticFrame f0 = render_frame(spec, 0);
  const SyntheticFrame f1 = render_frame(spec, 1);
  const DepthEstimate est =
      estimate_depth(f0.image, f1.image, f0.depth, spec.intrinsics, fast_params());
  for (double v : est.depth.data) {
    CHECK(v >= 0.0);
    if (v != 0.0) CHECK(v > 0.0);
  }
}

TEST_CASE("estimate_depth falls back to propagation when nothing is trackable") {
  const Intrinsics k = test::vga_intrinsics(96, 72);
  GrayImage flat(96, 72, 0.5f);
  const DepthMap d0 = full_depth(96, 72, 2.0);
  const DepthEstimate est = estimate_depth(flat, flat, d0, k, fast_params());
  CHECK(est.degraded);
  REQUIRE(est.motions.size() == 1);
  CHECK(est.motions.motions[0].omega.norm() == 0.0);
  CHECK(est.motions.motions[0].t.norm() == 0.0);
  CHECK(est.depth.data == d0.data);
  for (int y = 0; y < 72; ++y) {
    for (int x = 0; x < 96; ++x) CHECK(est.assignment.at(x, y) == 0);
  }
}

TEST_CASE("estimate_depth validates input alignment") {
  const Intrinsics k = test::vga_intrinsics(64, 48);
  GrayImage a(64, 48, 0.5f), b(64, 47, 0.5f);
  const DepthMap d0 = full_depth(64, 48, 2.0);
  CHECK_THROWS_AS(estimate_depth(a, b, d0, k, fast_params()), std::invalid_argument);
  Intrinsics wrong = k;
  wrong.width = 32;
  CHECK_THROWS_AS(estimate_depth(a, a, d0, wrong, fast_params()), std::invalid_argument);
}
