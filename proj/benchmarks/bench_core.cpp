// Microbenchmarks for the stages the throughput target cares about, plus the
// whole pipeline at VGA resolution. Run with --benchmark_filter to isolate a
// stage.

#include <benchmark/benchmark.h>

#include "depthprop/evaluation.hpp"
#include "depthprop/features.hpp"
#include "depthprop/image.hpp"
#include "depthprop/motion.hpp"
#include "depthprop/random.hpp"
#include "depthprop/reproject.hpp"
#include "depthprop/synthgen.hpp"

namespace {

using namespace depthprop;

SceneSpec bench_scene(int width, int height) {
  SceneSpec spec;
  spec.intrinsics = {525.0 * width / 640.0, (width - 1) / 2.0, (height - 1) / 2.0, width, height};
  spec.frame_count = 2;
  spec.seed = 5;

  PlaneSpec background;
  background.point = Vec3(0.0, 0.0, 3.2);
  background.normal = Vec3(0.15, -0.1, 1.0);
  background.region = {0.0, 0.0, double(width), double(height)};
  background.motion.omega = Vec3(0.0015, -0.002, 0.001);
  background.motion.t = Vec3(0.012, 0.006, 0.02);
  background.texture_seed = 11;

  PlaneSpec foreground;
  foreground.point = Vec3(0.05, -0.05, 1.9);
  foreground.normal = Vec3(-0.12, 0.08, 1.0);
  foreground.region = {0.25 * width, 0.25 * height, 0.75 * width, 0.75 * height};
  foreground.motion.omega = Vec3(-0.005, 0.004, 0.004);
  foreground.motion.t = Vec3(-0.055, 0.028, -0.035);
  foreground.texture_seed = 23;

  spec.planes = {background, foreground};
  return spec;
}

PipelineParams bench_params() {
  PipelineParams p;
  p.flow.fast_threshold = 8.0f / 255.0f;
  p.flow.min_corner_distance = 6.0;
  p.motion.inlier_eps = 1.0;
  p.motion.n_min = 15;
  p.motion.ransac_iters = 300;
  return p;
}

struct FramePair {
  SceneSpec spec;
  SyntheticFrame f0, f1;
};

const FramePair& vga_pair() {
  static const FramePair pair = [] {
    FramePair p{bench_scene(640, 480), {}, {}};
    p.f0 = render_frame(p.spec, 0);
    p.f1 = render_frame(p.spec, 1);
    return p;
  }();
  return pair;
}

void BM_BoxFilter(benchmark::State& state) {
  const GrayImage& img = vga_pair().f0.image;
  for (auto _ : state) {
    benchmark::DoNotOptimize(box_filter(img, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_BoxFilter)->Arg(2)->Arg(8)->Arg(32);

void BM_GuidedFilter(benchmark::State& state) {
  const FramePair& p = vga_pair();
  const ErrorMap error =
      photometric_error(p.f0.image, p.f1.image, p.f0.depth, p.spec.planes[0].motion,
                        p.spec.intrinsics);
  for (auto _ : state) {
    benchmark::DoNotOptimize(guided_filter(error, p.f0.image, 8, 1e-4f));
  }
}
BENCHMARK(BM_GuidedFilter);

void BM_DetectFast(benchmark::State& state) {
  const FramePair& p = vga_pair();
  const FlowParams params = bench_params().flow;
  for (auto _ : state) {
    benchmark::DoNotOptimize(detect_fast(p.f0.image, params));
  }
}
BENCHMARK(BM_DetectFast);

void BM_LkTrack(benchmark::State& state) {
  const FramePair& p = vga_pair();
  const FlowParams params = bench_params().flow;
  const std::vector<Vec2> corners = detect_fast(p.f0.image, params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(lk_track(p.f0.image, p.f1.image, corners, params));
  }
}
BENCHMARK(BM_LkTrack);

void BM_SolveMotion(benchmark::State& state) {
  const Intrinsics k{525.0, 319.5, 239.5, 640, 480};
  RigidMotion truth;
  truth.omega = Vec3(0.01, -0.02, 0.005);
  truth.t = Vec3(0.1, 0.0, -0.05);
  Rng rng(3);
  std::vector<Correspondence> cs;
  for (int i = 0; i < state.range(0); ++i) {
    const Vec2 p(rng.uniform(4.0, 635.0), rng.uniform(4.0, 475.0));
    const Vec3 P = lift(p, rng.uniform(1.0, 8.0), k);
    cs.push_back({p, project(apply_motion(P, truth), k), P});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_motion(cs, k));
  }
}
BENCHMARK(BM_SolveMotion)->Arg(3)->Arg(50)->Arg(500);

void BM_RansacMotion(benchmark::State& state) {
  const Intrinsics k{525.0, 319.5, 239.5, 640, 480};
  RigidMotion truth;
  truth.omega = Vec3(0.01, -0.02, 0.005);
  truth.t = Vec3(0.1, 0.0, -0.05);
  Rng rng(3);
  std::vector<Correspondence> cs;
  for (int i = 0; i < 500; ++i) {
    const Vec2 p(rng.uniform(4.0, 635.0), rng.uniform(4.0, 475.0));
    const Vec3 P = lift(p, rng.uniform(1.0, 8.0), k);
    cs.push_back({p, project(apply_motion(P, truth), k), P});
  }
  for (int i = 0; i < 150; ++i) {
    cs[i * 3].p_prime = Vec2(rng.uniform(0.0, 640.0), rng.uniform(0.0, 480.0));
  }
  MotionParams params;
  params.ransac_iters = 500;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ransac_motion(cs, k, params));
  }
}
BENCHMARK(BM_RansacMotion);

void BM_PhotometricError(benchmark::State& state) {
  const FramePair& p = vga_pair();
  for (auto _ : state) {
    benchmark::DoNotOptimize(photometric_error(p.f0.image, p.f1.image, p.f0.depth,
                                               p.spec.planes[0].motion, p.spec.intrinsics));
  }
}
BENCHMARK(BM_PhotometricError);

void BM_ReprojectImage(benchmark::State& state) {
  const FramePair& p = vga_pair();
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        reproject_image(p.f0.image, p.f0.depth, p.spec.planes[0].motion, p.spec.intrinsics));
  }
}
BENCHMARK(BM_ReprojectImage);

void BM_RenderFrame(benchmark::State& state) {
  const SceneSpec spec = bench_scene(640, 480);
  for (auto _ : state) {
    benchmark::DoNotOptimize(render_frame(spec, 1));
  }
}
BENCHMARK(BM_RenderFrame);

void BM_EstimateDepth(benchmark::State& state) {
  const int w = static_cast<int>(state.range(0));
  const int h = w * 3 / 4;
  const SceneSpec spec = bench_scene(w, h);
  const SyntheticFrame f0 = render_frame(spec, 0);
  const SyntheticFrame f1 = render_frame(spec, 1);
  const PipelineParams params = bench_params();
  for (auto _ : state) {
    benchmark::DoNotOptimize(estimate_depth(f0.image, f1.image, f0.depth, spec.intrinsics, params));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w) * h);
}
BENCHMARK(BM_EstimateDepth)->Arg(320)->Arg(640)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
