#include "depthprop/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

namespace depthprop {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    // nlohmann reports a byte offset; convert it to a line number.
    const std::size_t byte = std::min<std::size_t>(e.byte, text.size());
    const long line = 1 + std::count(text.begin(), text.begin() + byte, '\n');
    throw IoError(path.string() + ": parse error at line " + std::to_string(line) + ": " +
                  e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& context) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw IoError(context + ": unknown key '" + item.key() + "'");
    }
  }
}

template <typename T>
T require(const json& j, const std::string& key, const std::string& context) {
  if (!j.contains(key)) throw IoError(context + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(context + ": field '" + key + "' has the wrong type");
  }
}

template <typename T>
void maybe(const json& j, const std::string& key, T& out, const std::string& context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw IoError(context + ": field '" + key + "' has the wrong type");
  }
}

Vec3 to_vec3(const json& j, const std::string& key, const std::string& context) {
  const auto arr = require<std::vector<double>>(j, key, context);
  if (arr.size() != 3) throw IoError(context + ": field '" + key + "' must have 3 components");
  return {arr[0], arr[1], arr[2]};
}

struct TimedEntry {
  double t = 0.0;
  std::string name;
};

std::vector<TimedEntry> read_tum_index(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("missing TUM index file: " + file.string());
  std::vector<TimedEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream iss(line);
    TimedEntry e;
    if (!(iss >> e.t >> e.name)) {
      throw IoError(file.string() + ": malformed entry at line " + std::to_string(line_no));
    }
    entries.push_back(std::move(e));
  }
  return entries;
}

Intrinsics tum_intrinsics(const fs::path& root, int width, int height) {
  const fs::path calib = root / "calibration.json";
  if (fs::exists(calib)) {
    const json j = parse_json_file(calib);
    if (j.contains("f")) {
      const double f = require<double>(j, "f", "calibration");
      const double xc = require<double>(j, "xc", "calibration");
      const double yc = require<double>(j, "yc", "calibration");
      return make_intrinsics(f, f, xc, yc, width, height);
    }
    const double fx = require<double>(j, "fx", "calibration");
    const double fy = require<double>(j, "fy", "calibration");
    const double cx = require<double>(j, "cx", "calibration");
    const double cy = require<double>(j, "cy", "calibration");
    return make_intrinsics(fx, fy, cx, cy, width, height);
  }
  // Published freiburg camera presets, matched against the sequence path.
  const std::string name = root.string();
  if (name.find("freiburg1") != std::string::npos || name.find("fr1") != std::string::npos) {
    return make_intrinsics(517.3, 516.5, 318.6, 255.3, width, height);
  }
  if (name.find("freiburg2") != std::string::npos || name.find("fr2") != std::string::npos) {
    return make_intrinsics(520.9, 521.0, 325.1, 249.7, width, height);
  }
  if (name.find("freiburg3") != std::string::npos || name.find("fr3") != std::string::npos) {
    return make_intrinsics(535.4, 539.2, 320.1, 247.6, width, height);
  }
  throw IoError("TUM sequence needs a calibration.json or a freiburg-style path: " + root.string());
}

json metrics_to_json(const OffsetAggregate& a) {
  return json{{"offset", a.offset}, {"mre", a.mre},           {"mae", a.mae},
              {"rmse", a.rmse},     {"coverage", a.coverage}, {"n_runs", a.n_runs}};
}

}  // namespace

Intrinsics make_intrinsics(double fx, double fy, double cx, double cy, int width, int height) {
  if (!(fx > 0.0) || !(fy > 0.0)) throw IoError("intrinsics: focal lengths must be positive");
  if (std::abs(fx - fy) / fx >= 1e-3) {
    throw IoError("intrinsics: anisotropic focal lengths are not modeled (|fx-fy|/fx >= 1e-3)");
  }
  Intrinsics k;
  k.f = 0.5 * (fx + fy);
  k.xc = cx;
  k.yc = cy;
  k.width = width;
  k.height = height;
  if (!k.valid()) throw IoError("intrinsics: principal point must lie inside the image");
  return k;
}

void write_depth_fmap(const DepthMap& depth, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open depth map for writing: " + path.string());
  const char magic[4] = {'D', 'F', 'M', '1'};
  const std::uint32_t w = static_cast<std::uint32_t>(depth.width);
  const std::uint32_t h = static_cast<std::uint32_t>(depth.height);
  out.write(magic, 4);
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  out.write(reinterpret_cast<const char*>(depth.data.data()),
            static_cast<std::streamsize>(sizeof(double)) * depth.data.size());
  if (!out) throw IoError("failed writing depth map: " + path.string());
}

DepthMap read_depth_fmap(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open depth map: " + path.string());
  char magic[4] = {};
  std::uint32_t w = 0, h = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  if (!in || std::string(magic, 4) != "DFM1" || w == 0 || h == 0) {
    throw IoError("not a DFM1 depth map: " + path.string());
  }
  DepthMap out(static_cast<int>(w), static_cast<int>(h));
  in.read(reinterpret_cast<char*>(out.data.data()),
          static_cast<std::streamsize>(sizeof(double)) * out.data.size());
  if (!in) throw IoError("truncated depth map: " + path.string());
  return out;
}

DepthMap read_depth_any(const fs::path& path, double scale) {
  if (path.extension() == ".dfm") return read_depth_fmap(path);
  return read_depth_png(path, scale);
}

SequenceManifest load_pair_manifest(const fs::path& path) {
  const json j = parse_json_file(path);
  const std::string ctx = path.filename().string();
  reject_unknown_keys(j, {"f", "xc", "yc", "width", "height", "depth_scale", "frames"}, ctx);

  SequenceManifest m;
  const int width = require<int>(j, "width", ctx);
  const int height = require<int>(j, "height", ctx);
  const double f = require<double>(j, "f", ctx);
  m.intrinsics = make_intrinsics(f, f, require<double>(j, "xc", ctx), require<double>(j, "yc", ctx),
                                 width, height);
  m.depth_scale = require<double>(j, "depth_scale", ctx);
  if (!(m.depth_scale > 0.0)) throw IoError(ctx + ": depth_scale must be positive");

  if (!j.contains("frames") || !j.at("frames").is_array()) {
    throw IoError(ctx + ": missing or non-array field 'frames'");
  }
  const fs::path base = path.parent_path();
  double prev_t = -std::numeric_limits<double>::infinity();
  for (const json& fj : j.at("frames")) {
    reject_unknown_keys(fj, {"t", "image", "depth"}, ctx + " frame");
    FrameEntry e;
    e.timestamp = require<double>(fj, "t", ctx + " frame");
    e.image = base / require<std::string>(fj, "image", ctx + " frame");
    e.depth = base / require<std::string>(fj, "depth", ctx + " frame");
    if (!(e.timestamp > prev_t)) throw IoError(ctx + ": timestamps must be strictly increasing");
    prev_t = e.timestamp;
    m.frames.push_back(std::move(e));
  }
  if (m.frames.empty()) throw IoError(ctx + ": manifest lists no frames");

  // Validate every referenced file up front, including image dimensions.
  for (const FrameEntry& e : m.frames) {
    for (const fs::path& p : {e.image, e.depth}) {
      if (!fs::exists(p)) throw IoError(ctx + ": missing file " + p.string());
    }
    const auto [iw, ih] = read_png_size(e.image);
    if (iw != width || ih != height) {
      throw IoError(ctx + ": inconsistent image size in " + e.image.string());
    }
    if (e.depth.extension() != ".dfm") {
      const auto [dw, dh] = read_png_size(e.depth);
      if (dw != width || dh != height) {
        throw IoError(ctx + ": inconsistent depth size in " + e.depth.string());
      }
    }
  }
  return m;
}

void write_pair_manifest(const SequenceManifest& manifest, const fs::path& path) {
  json j;
  j["f"] = manifest.intrinsics.f;
  j["xc"] = manifest.intrinsics.xc;
  j["yc"] = manifest.intrinsics.yc;
  j["width"] = manifest.intrinsics.width;
  j["height"] = manifest.intrinsics.height;
  j["depth_scale"] = manifest.depth_scale;
  j["frames"] = json::array();
  for (const FrameEntry& e : manifest.frames) {
    j["frames"].push_back(
        {{"t", e.timestamp}, {"image", e.image.string()}, {"depth", e.depth.string()}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open manifest for writing: " + path.string());
  out << j.dump(2) << "\n";
}

SequenceManifest load_tum_sequence(const fs::path& root, double max_dt) {
  const std::vector<TimedEntry> rgb = read_tum_index(root / "rgb.txt");
  const std::vector<TimedEntry> depth = read_tum_index(root / "depth.txt");

  std::vector<TimedEntry> depth_sorted = depth;
  std::sort(depth_sorted.begin(), depth_sorted.end(),
            [](const TimedEntry& a, const TimedEntry& b) { return a.t < b.t; });

  // Nearest-timestamp association: all pairs within max_dt ranked by |dt|,
  // greedily accepted while both sides are unused.
  struct Candidate {
    double dt;
    int ri, di;
  };
  std::vector<Candidate> candidates;
  for (int ri = 0; ri < static_cast<int>(rgb.size()); ++ri) {
    const double t = rgb[ri].t;
    auto lo = std::lower_bound(depth_sorted.begin(), depth_sorted.end(), t - max_dt,
                               [](const TimedEntry& e, double v) { return e.t < v; });
    for (auto it = lo; it != depth_sorted.end() && it->t <= t + max_dt; ++it) {
      candidates.push_back({std::abs(it->t - t), ri, static_cast<int>(it - depth_sorted.begin())});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.dt != b.dt) return a.dt < b.dt;
    if (a.ri != b.ri) return a.ri < b.ri;
    return a.di < b.di;
  });
  std::vector<bool> rgb_used(rgb.size(), false), depth_used(depth_sorted.size(), false);
  std::vector<std::pair<int, int>> matches;
  for (const Candidate& c : candidates) {
    if (rgb_used[c.ri] || depth_used[c.di]) continue;
    rgb_used[c.ri] = true;
    depth_used[c.di] = true;
    matches.emplace_back(c.ri, c.di);
  }
  if (matches.empty()) throw IoError("TUM association produced no pairs: " + root.string());
  std::sort(matches.begin(), matches.end(),
            [&](const auto& a, const auto& b) { return rgb[a.first].t < rgb[b.first].t; });

  SequenceManifest m;
  m.depth_scale = 1.0 / 5000.0;
  m.dropped = static_cast<int>(rgb.size() - matches.size() + depth.size() - matches.size());
  for (const auto& [ri, di] : matches) {
    m.frames.push_back({rgb[ri].t, root / rgb[ri].name, root / depth_sorted[di].name});
  }
  const auto [w, h] = read_png_size(m.frames.front().image);
  m.intrinsics = tum_intrinsics(root, w, h);
  return m;
}

RunConfig load_run_config(const fs::path& path) {
  const json j = parse_json_file(path);
  const std::string ctx = path.filename().string();
  reject_unknown_keys(j,
                      {"seed", "horizon", "starts", "metric_cutoff", "depth_out_scale", "flow",
                       "motion", "filter", "intrinsics"},
                      ctx);
  RunConfig cfg;
  maybe(j, "seed", cfg.seed, ctx);
  maybe(j, "horizon", cfg.horizon, ctx);
  maybe(j, "starts", cfg.starts, ctx);
  maybe(j, "metric_cutoff", cfg.metric_cutoff, ctx);
  maybe(j, "depth_out_scale", cfg.depth_out_scale, ctx);
  if (j.contains("flow")) {
    const json& f = j.at("flow");
    reject_unknown_keys(f,
                        {"fast_threshold", "max_corners", "min_corner_distance", "lk_window",
                         "lk_pyramid_levels", "lk_max_iters", "lk_epsilon"},
                        ctx + " flow");
    FlowParams& p = cfg.pipeline.flow;
    maybe(f, "fast_threshold", p.fast_threshold, ctx);
    maybe(f, "max_corners", p.max_corners, ctx);
    maybe(f, "min_corner_distance", p.min_corner_distance, ctx);
    maybe(f, "lk_window", p.lk_window, ctx);
    maybe(f, "lk_pyramid_levels", p.lk_pyramid_levels, ctx);
    maybe(f, "lk_max_iters", p.lk_max_iters, ctx);
    maybe(f, "lk_epsilon", p.lk_epsilon, ctx);
  }
  if (j.contains("motion")) {
    const json& mj = j.at("motion");
    reject_unknown_keys(mj, {"ransac_iters", "inlier_eps", "n_min", "max_motions"}, ctx + " motion");
    MotionParams& p = cfg.pipeline.motion;
    maybe(mj, "ransac_iters", p.ransac_iters, ctx);
    maybe(mj, "inlier_eps", p.inlier_eps, ctx);
    maybe(mj, "n_min", p.n_min, ctx);
    maybe(mj, "max_motions", p.max_motions, ctx);
  }
  if (j.contains("filter")) {
    const json& fj = j.at("filter");
    reject_unknown_keys(fj, {"radius", "eps"}, ctx + " filter");
    maybe(fj, "radius", cfg.pipeline.filter_radius, ctx);
    maybe(fj, "eps", cfg.pipeline.filter_eps, ctx);
  }
  if (j.contains("intrinsics")) {
    const json& kj = j.at("intrinsics");
    reject_unknown_keys(kj, {"f", "xc", "yc"}, ctx + " intrinsics");
    cfg.intrinsics_override = {{require<double>(kj, "f", ctx), require<double>(kj, "xc", ctx),
                                require<double>(kj, "yc", ctx)}};
  }
  cfg.pipeline.motion.rng_seed = cfg.seed;
  cfg.pipeline.flow.validate();
  cfg.pipeline.motion.validate();
  if (cfg.horizon < 1 || cfg.starts < 1 || !(cfg.metric_cutoff > 0.0) ||
      !(cfg.depth_out_scale > 0.0) || cfg.pipeline.filter_radius < 1 ||
      !(cfg.pipeline.filter_eps > 0.0f)) {
    throw IoError(ctx + ": horizon/starts/cutoff/scale/filter values must be positive");
  }
  return cfg;
}

SceneSpec load_scene_spec(const fs::path& path) {
  const json j = parse_json_file(path);
  const std::string ctx = path.filename().string();
  reject_unknown_keys(j, {"intrinsics", "frame_count", "noise_std", "seed", "planes"}, ctx);

  SceneSpec spec;
  const json& kj = j.contains("intrinsics") ? j.at("intrinsics") : json::object();
  reject_unknown_keys(kj, {"f", "xc", "yc", "width", "height"}, ctx + " intrinsics");
  const double f = require<double>(kj, "f", ctx + " intrinsics");
  spec.intrinsics = make_intrinsics(
      f, f, require<double>(kj, "xc", ctx + " intrinsics"),
      require<double>(kj, "yc", ctx + " intrinsics"), require<int>(kj, "width", ctx + " intrinsics"),
      require<int>(kj, "height", ctx + " intrinsics"));
  spec.frame_count = require<int>(j, "frame_count", ctx);
  maybe(j, "noise_std", spec.noise_std, ctx);
  maybe(j, "seed", spec.seed, ctx);

  if (!j.contains("planes") || !j.at("planes").is_array() || j.at("planes").empty()) {
    throw IoError(ctx + ": field 'planes' must be a non-empty array");
  }
  for (const json& pj : j.at("planes")) {
    reject_unknown_keys(pj, {"point", "normal", "region", "omega", "t", "texture_seed"},
                        ctx + " plane");
    PlaneSpec p;
    p.point = to_vec3(pj, "point", ctx + " plane");
    p.normal = to_vec3(pj, "normal", ctx + " plane");
    const auto region = require<std::vector<double>>(pj, "region", ctx + " plane");
    if (region.size() != 4) throw IoError(ctx + " plane: field 'region' must be [x0, y0, x1, y1]");
    p.region = {region[0], region[1], region[2], region[3]};
    p.motion.omega = to_vec3(pj, "omega", ctx + " plane");
    p.motion.t = to_vec3(pj, "t", ctx + " plane");
    maybe(pj, "texture_seed", p.texture_seed, ctx + " plane");
    spec.planes.push_back(std::move(p));
  }
  try {
    validate_scene(spec);
  } catch (const InvalidScene& e) {
    throw IoError(ctx + ": " + e.what());
  }
  return spec;
}

ColorImage colorize_assignment(const AssignmentMap& assignment) {
  static constexpr std::array<std::array<float, 3>, 12> kPalette = {{
      {0.90f, 0.10f, 0.29f}, {0.24f, 0.71f, 0.29f}, {1.00f, 0.88f, 0.10f},
      {0.00f, 0.51f, 0.78f}, {0.96f, 0.51f, 0.19f}, {0.57f, 0.12f, 0.71f},
      {0.27f, 0.94f, 0.94f}, {0.94f, 0.20f, 0.90f}, {0.82f, 0.96f, 0.24f},
      {0.98f, 0.75f, 0.75f}, {0.00f, 0.50f, 0.50f}, {0.67f, 0.43f, 0.16f},
  }};
  ColorImage out(assignment.width, assignment.height);
  for (int y = 0; y < assignment.height; ++y) {
    for (int x = 0; x < assignment.width; ++x) {
      const int label = assignment.at(x, y);
      if (label < 0) continue;
      const auto& c = kPalette[static_cast<std::size_t>(label) % kPalette.size()];
      float* px = out.px(x, y);
      px[0] = c[0];
      px[1] = c[1];
      px[2] = c[2];
    }
  }
  return out;
}

void write_report_json(const SequenceReport& report, const fs::path& path) {
  json j;
  j["offsets"] = json::array();
  for (const OffsetAggregate& o : report.offsets) j["offsets"].push_back(metrics_to_json(o));
  json summary = metrics_to_json(report.summary);
  summary.erase("offset");
  j["summary"] = summary;
  j["horizon"] = report.horizon;
  j["seed"] = report.seed;
  j["wall_ms"] = report.wall_ms;
  j["sensor_usage_reduction"] = sensor_usage_reduction(report.horizon);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open report for writing: " + path.string());
  out << j.dump(2) << "\n";
}

void write_run_metrics_json(const std::vector<FrameMetrics>& metrics, int start,
                            const fs::path& path) {
  json j;
  j["start"] = start;
  j["frames"] = json::array();
  for (std::size_t i = 0; i < metrics.size(); ++i) {
    const FrameMetrics& m = metrics[i];
    j["frames"].push_back({{"offset", static_cast<int>(i) + 1},
                           {"mre", m.mre},
                           {"mae", m.mae},
                           {"rmse", m.rmse},
                           {"coverage", m.coverage},
                           {"n_evaluated", m.n_evaluated},
                           {"degraded", m.degraded}});
  }
  std::ofstream out(path);
  if (!out) throw IoError("cannot open run record for writing: " + path.string());
  out << j.dump(2) << "\n";
}

void write_estimate_metadata_json(const DepthEstimate& estimate, std::uint64_t seed,
                                  const fs::path& path) {
  json j;
  j["degraded"] = estimate.degraded;
  j["seed"] = seed;
  j["motions"] = json::array();
  for (std::size_t i = 0; i < estimate.motions.size(); ++i) {
    const RigidMotion& m = estimate.motions.motions[i];
    j["motions"].push_back({{"omega", {m.omega.x(), m.omega.y(), m.omega.z()}},
                            {"t", {m.t.x(), m.t.y(), m.t.z()}},
                            {"inliers", estimate.motions.inlier_counts[i]}});
  }
  j["timings_ms"] = {{"features", estimate.timings.features_ms},
                     {"motion", estimate.timings.motion_ms},
                     {"assignment", estimate.timings.assignment_ms},
                     {"reprojection", estimate.timings.reprojection_ms},
                     {"total", estimate.timings.total_ms}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot open metadata for writing: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace depthprop
