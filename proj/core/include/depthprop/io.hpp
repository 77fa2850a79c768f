#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "depthprop/camera.hpp"
#include "depthprop/evaluation.hpp"
#include "depthprop/image.hpp"
#include "depthprop/reproject.hpp"
#include "depthprop/synthgen.hpp"

namespace depthprop {

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FrameEntry {
  double timestamp = 0.0;
  std::filesystem::path image;
  std::filesystem::path depth;
};

struct SequenceManifest {
  Intrinsics intrinsics;
  double depth_scale = 1.0;  ///< raw integer units -> meters
  std::vector<FrameEntry> frames;
  int dropped = 0;  ///< index entries without a timestamp association
};

/// Collapses fx/fy intrinsics onto the single-f model: accepted (as the
/// mean) only when |fx - fy| / fx < 1e-3.
Intrinsics make_intrinsics(double fx, double fy, double cx, double cy, int width, int height);

// PNG codecs (grayscale pipeline; RGB inputs are converted through to_gray).
GrayImage read_image_png(const std::filesystem::path& path);
DepthMap read_depth_png(const std::filesystem::path& path, double scale);
void write_gray16_png(const GrayImage& img, const std::filesystem::path& path);
void write_rgb8_png(const ColorImage& img, const std::filesystem::path& path);
void write_depth_png(const DepthMap& depth, const std::filesystem::path& path, double scale);
std::pair<int, int> read_png_size(const std::filesystem::path& path);

// Lossless float depth map codec: "DFM1" magic, little-endian u32
// width/height, then row-major float64 samples (0 marks invalid pixels).
void write_depth_fmap(const DepthMap& depth, const std::filesystem::path& path);
DepthMap read_depth_fmap(const std::filesystem::path& path);

/// Reads a depth file by extension: .dfm as a float map, anything else as a
/// 16-bit PNG scaled by `scale`.
DepthMap read_depth_any(const std::filesystem::path& path, double scale);

/// Generic JSON manifest: {f, xc, yc, width, height, depth_scale, frames:
/// [{t, image, depth}]}. Paths resolve relative to the manifest location;
/// every referenced file is validated before the pipeline starts.
SequenceManifest load_pair_manifest(const std::filesystem::path& path);
void write_pair_manifest(const SequenceManifest& manifest, const std::filesystem::path& path);

/// TUM RGB-D layout: rgb.txt / depth.txt index files with "timestamp path"
/// lines, nearest-timestamp association within max_dt, depth at 5000 raw
/// units per meter. Intrinsics come from an optional calibration.json in the
/// sequence root or from the freiburg presets matched against the path.
SequenceManifest load_tum_sequence(const std::filesystem::path& root, double max_dt = 0.02);

struct RunConfig {
  PipelineParams pipeline;
  int horizon = 10;
  int starts = 100;
  std::uint64_t seed = 0;
  double metric_cutoff = kDefaultMetricCutoff;
  double depth_out_scale = 1.0 / 5000.0;  ///< 16-bit output, TUM-compatible
  std::optional<std::array<double, 3>> intrinsics_override;  ///< f, xc, yc
};

/// Parses a JSON run configuration; every field is optional and unknown
/// keys are rejected. The single seed drives all pipeline randomness.
RunConfig load_run_config(const std::filesystem::path& path);

/// JSON scene description for the synthetic generator.
SceneSpec load_scene_spec(const std::filesystem::path& path);

/// Distinct color per motion index, black where unassigned.
ColorImage colorize_assignment(const AssignmentMap& assignment);

void write_report_json(const SequenceReport& report, const std::filesystem::path& path);
void write_run_metrics_json(const std::vector<FrameMetrics>& metrics, int start,
                            const std::filesystem::path& path);
void write_estimate_metadata_json(const DepthEstimate& estimate, std::uint64_t seed,
                                  const std::filesystem::path& path);

}  // namespace depthprop
