// depthprop: estimates a dense depth map for the current frame from two
// consecutive images and a previous depth map, by estimating the scene's
// independent rigid motions from sparse optical flow and reprojecting the
// previous depth map under a per-pixel motion assignment.

#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "depthprop/evaluation.hpp"
#include "depthprop/io.hpp"
#include "depthprop/reproject.hpp"
#include "depthprop/synthgen.hpp"

namespace fs = std::filesystem;
using namespace depthprop;

namespace {

SequenceManifest load_manifest_auto(const fs::path& path, double max_dt) {
  if (fs::is_directory(path)) return load_tum_sequence(path, max_dt);
  return load_pair_manifest(path);
}

RunConfig load_config_opt(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_run_config(path);
}

Intrinsics effective_intrinsics(const SequenceManifest& manifest, const RunConfig& cfg) {
  Intrinsics k = manifest.intrinsics;
  if (cfg.intrinsics_override) {
    k.f = (*cfg.intrinsics_override)[0];
    k.xc = (*cfg.intrinsics_override)[1];
    k.yc = (*cfg.intrinsics_override)[2];
  }
  if (!k.valid()) throw IoError("effective intrinsics are invalid");
  return k;
}

int run_estimate(const std::string& manifest_path, int frame, const std::string& config_path,
                 const std::string& out_dir, double max_dt) {
  const RunConfig cfg = load_config_opt(config_path);
  const SequenceManifest manifest = load_manifest_auto(manifest_path, max_dt);
  if (frame < 0 || frame + 1 >= static_cast<int>(manifest.frames.size())) {
    throw IoError("--frame must index a frame with a successor (have " +
                  std::to_string(manifest.frames.size()) + " frames)");
  }
  const Intrinsics k = effective_intrinsics(manifest, cfg);

  const GrayImage i0 = read_image_png(manifest.frames[frame].image);
  const GrayImage i1 = read_image_png(manifest.frames[frame + 1].image);
  const DepthMap d0 = read_depth_any(manifest.frames[frame].depth, manifest.depth_scale);

  const DepthEstimate est = estimate_depth(i0, i1, d0, k, cfg.pipeline);

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  write_depth_fmap(est.depth, out / "depth_estimate.dfm");
  write_depth_png(est.depth, out / "depth_estimate.png", cfg.depth_out_scale);
  write_rgb8_png(colorize_assignment(est.assignment), out / "assignment.png");
  write_estimate_metadata_json(est, cfg.seed, out / "metadata.json");

  std::printf("motions: %zu%s, total %.1f ms (features %.1f, motion %.1f, assignment %.1f, "
              "reprojection %.1f)\n",
              est.motions.size(), est.degraded ? " [degraded]" : "", est.timings.total_ms,
              est.timings.features_ms, est.timings.motion_ms, est.timings.assignment_ms,
              est.timings.reprojection_ms);
  return 0;
}

int run_evaluate(const std::string& manifest_path, const std::string& config_path, int horizon,
                 int starts, const std::string& out_dir, double max_dt) {
  RunConfig cfg = load_config_opt(config_path);
  if (horizon > 0) cfg.horizon = horizon;
  if (starts > 0) cfg.starts = starts;
  const SequenceManifest manifest = load_manifest_auto(manifest_path, max_dt);
  const Intrinsics k = effective_intrinsics(manifest, cfg);

  const int n = static_cast<int>(manifest.frames.size());
  const int feasible = n - cfg.horizon;  // starts satisfying start + horizon < n
  if (feasible < 1) {
    throw IoError("sequence too short for horizon " + std::to_string(cfg.horizon));
  }
  int n_starts = cfg.starts;
  if (n_starts > feasible) {
    std::fprintf(stderr, "warning: clamping --starts %d to %d feasible starts\n", n_starts,
                 feasible);
    n_starts = feasible;
  }

  std::vector<SequenceFrame> frames(manifest.frames.size());
  for (std::size_t i = 0; i < manifest.frames.size(); ++i) {
    frames[i].image = read_image_png(manifest.frames[i].image);
    frames[i].truth = read_depth_any(manifest.frames[i].depth, manifest.depth_scale);
  }

  fs::create_directories(out_dir);
  const fs::path out(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<FrameMetrics>> runs;
  for (int j = 0; j < n_starts; ++j) {
    const int start = static_cast<int>((static_cast<long long>(j) * feasible) / n_starts);
    try {
      runs.push_back(sequential_run(frames, k, start, cfg.horizon, cfg.pipeline, cfg.metric_cutoff));
    } catch (const std::exception& e) {
      std::fprintf(stderr, "warning: run at start %d failed: %s\n", start, e.what());
      continue;
    }
    char name[32];
    std::snprintf(name, sizeof(name), "run_%04d.json", start);
    write_run_metrics_json(runs.back(), start, out / name);
  }
  if (runs.empty()) throw IoError("all evaluation runs failed");

  SequenceReport report = aggregate(runs);
  report.seed = cfg.seed;
  report.wall_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  write_report_json(report, out / "report.json");

  std::printf("offset  mre       mae       rmse      coverage\n");
  for (const OffsetAggregate& o : report.offsets) {
    std::printf("%-7d %-9.4f %-9.4f %-9.4f %-9.4f\n", o.offset, o.mre, o.mae, o.rmse, o.coverage);
  }
  std::printf("mean    %-9.4f %-9.4f %-9.4f %-9.4f  (%d runs, sensor usage -%.1f%%)\n",
              report.summary.mre, report.summary.mae, report.summary.rmse,
              report.summary.coverage, report.summary.n_runs,
              100.0 * sensor_usage_reduction(report.horizon));
  return 0;
}

int run_synth(const std::string& scene_path, const std::string& out_dir) {
  const SceneSpec spec = load_scene_spec(scene_path);
  fs::create_directories(out_dir);
  const fs::path out(out_dir);

  SequenceManifest manifest;
  manifest.intrinsics = spec.intrinsics;
  manifest.depth_scale = 1.0;  // depth ships as lossless float maps
  for (int t = 0; t < spec.frame_count; ++t) {
    const SyntheticFrame frame = render_frame(spec, t);
    char image_name[48], depth_name[48], label_name[48];
    std::snprintf(image_name, sizeof(image_name), "frame_%04d_image.png", t);
    std::snprintf(depth_name, sizeof(depth_name), "frame_%04d_depth.dfm", t);
    std::snprintf(label_name, sizeof(label_name), "frame_%04d_labels.png", t);
    write_gray16_png(frame.image, out / image_name);
    write_depth_fmap(frame.depth, out / depth_name);
    // Ground-truth labels stored as raw 16-bit values label + 1 (0 = none).
    GrayImage labels(frame.segmentation.width, frame.segmentation.height);
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
      labels.data[i] = static_cast<float>(frame.segmentation.labels[i] + 1) / 65535.0f;
    }
    write_gray16_png(labels, out / label_name);
    manifest.frames.push_back({static_cast<double>(t), image_name, depth_name});
  }
  write_pair_manifest(manifest, out / "manifest.json");
  std::printf("wrote %d frames to %s\n", spec.frame_count, out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"depth map propagation from consecutive images and a prior depth map"};
  app.require_subcommand(1);

  std::string manifest_path, config_path, out_dir, scene_path;
  int frame = 0, horizon = 0, starts = 0;
  double max_dt = 0.02;

  CLI::App* est = app.add_subcommand("estimate", "estimate one depth map from a frame pair");
  est->add_option("--manifest", manifest_path, "sequence manifest (JSON) or TUM directory")
      ->required();
  est->add_option("--frame", frame, "index of the prior frame")->required();
  est->add_option("--config", config_path, "run configuration (JSON)");
  est->add_option("--out", out_dir, "output directory")->required();
  est->add_option("--max-dt", max_dt, "TUM association tolerance, seconds");

  CLI::App* ev = app.add_subcommand("evaluate", "sequential estimation protocol with metrics");
  ev->add_option("--manifest", manifest_path, "sequence manifest (JSON) or TUM directory")
      ->required();
  ev->add_option("--config", config_path, "run configuration (JSON)");
  ev->add_option("--horizon", horizon, "estimated frames per measured map (default 10)");
  ev->add_option("--starts", starts, "number of starting points (default 100)");
  ev->add_option("--out", out_dir, "output directory")->required();
  ev->add_option("--max-dt", max_dt, "TUM association tolerance, seconds");

  CLI::App* sy = app.add_subcommand("synth", "render a synthetic piecewise-rigid sequence");
  sy->add_option("--scene", scene_path, "scene description (JSON)")->required();
  sy->add_option("--out", out_dir, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (est->parsed()) return run_estimate(manifest_path, frame, config_path, out_dir, max_dt);
    if (ev->parsed()) return run_evaluate(manifest_path, config_path, horizon, starts, out_dir, max_dt);
    if (sy->parsed()) return run_synth(scene_path, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
