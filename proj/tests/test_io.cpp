#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "depthprop/io.hpp"
#include "depthprop/random.hpp"
#include "test_support.hpp"

using namespace depthprop;
namespace fs = std::filesystem;

namespace {

// Unique scratch directory per test case, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("depthprop_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  out << text;
}

DepthMap random_depth(int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  DepthMap d(w, h);
  for (auto& v : d.data) v = rng.uniform(0.0, 1.0) < 0.9 ? rng.uniform(0.3, 15.0) : 0.0;
  return d;
}

}  // namespace

TEST_CASE("make_intrinsics averages near-isotropic focal lengths and rejects the rest") {
  const Intrinsics k = make_intrinsics(520.9, 521.0, 325.1, 249.7, 640, 480);
  CHECK(k.f == doctest::Approx((520.9 + 521.0) / 2).epsilon(1e-12));
  CHECK_THROWS_AS(make_intrinsics(517.3, 516.5, 318.6, 255.3, 640, 480), IoError);  // 1.5e-3 apart
  CHECK_THROWS_AS(make_intrinsics(-1.0, -1.0, 10, 10, 64, 48), IoError);
  CHECK_THROWS_AS(make_intrinsics(100.0, 100.0, 700, 10, 640, 480), IoError);
}

TEST_CASE("16-bit grayscale PNG round-trips quantized intensities") {
  TempDir tmp("png16");
  GrayImage img(17, 9);
  Rng rng(3);
  for (auto& v : img.data) {
    v = static_cast<float>(std::lround(rng.uniform(0.0, 1.0) * 65535.0) / 65535.0);
  }
  const fs::path file = tmp.path / "img.png";
  write_gray16_png(img, file);
  const GrayImage back = read_image_png(file);
  REQUIRE(back.width == 17);
  REQUIRE(back.height == 9);
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    CHECK(back.data[i] == doctest::Approx(img.data[i]).epsilon(1e-7));
  }
}

TEST_CASE("RGB PNG reads back through the luma conversion") {
  TempDir tmp("png8");
  ColorImage rgb(5, 4);
  float* px = rgb.px(1, 2);
  px[0] = 1.0f;  // pure red
  const fs::path file = tmp.path / "rgb.png";
  write_rgb8_png(rgb, file);
  const GrayImage g = read_image_png(file);
  CHECK(g.at(1, 2) == doctest::Approx(0.299).epsilon(1e-4));
  CHECK(g.at(0, 0) == 0.0f);
  const auto [w, h] = read_png_size(file);
  CHECK(w == 5);
  CHECK(h == 4);
}

TEST_CASE("16-bit depth PNG quantizes to within half a raw unit") {
  TempDir tmp("depthpng");
  const DepthMap depth = random_depth(23, 11, 5);
  const double scale = 1.0 / 5000.0;
  const fs::path file = tmp.path / "d.png";
  write_depth_png(depth, file, scale);
  const DepthMap back = read_depth_png(file, scale);
  for (std::size_t i = 0; i < depth.data.size(); ++i) {
    if (depth.data[i] == 0.0) {
      CHECK(back.data[i] == 0.0);
    } else if (depth.data[i] / scale <= 65535.0) {
      CHECK(std::abs(back.data[i] - depth.data[i]) <= 0.5 * scale);
    }
  }
}

TEST_CASE("TUM depth convention: raw 5000 is one meter") {
  TempDir tmp("tumscale");
  DepthMap d(2, 1);
  d.data = {1.0, 0.3};  // meters
  const fs::path file = tmp.path / "d.png";
  write_depth_png(d, file, 1.0 / 5000.0);
  const DepthMap back = read_depth_png(file, 1.0 / 5000.0);
  CHECK(back.data[0] == doctest::Approx(1.0).epsilon(1e-9));  // raw 5000
  CHECK(back.data[1] == doctest::Approx(0.3).epsilon(1e-3));
}

TEST_CASE("manifest depth scale turns raw 1500 into 1.5 meters") {
  TempDir tmp("scale");
  DepthMap d(1, 1);
  d.data = {1.5};
  write_depth_png(d, tmp.path / "d.png", 0.001);
  const DepthMap back = read_depth_png(tmp.path / "d.png", 0.001);
  CHECK(back.data[0] == doctest::Approx(1.5).epsilon(1e-12));  // raw value 1500
}

TEST_CASE("float depth maps round-trip bit-exactly") {
  TempDir tmp("dfm");
  const DepthMap depth = random_depth(31, 7, 7);
  const fs::path file = tmp.path / "d.dfm";
  write_depth_fmap(depth, file);
  const DepthMap back = read_depth_fmap(file);
  CHECK(back.width == depth.width);
  CHECK(back.height == depth.height);
  CHECK(back.data == depth.data);

  CHECK(read_depth_any(file, 123.0).data == depth.data);  // scale ignored for .dfm
}

TEST_CASE("truncated or foreign files are rejected by the depth codec") {
  TempDir tmp("dfmbad");
  write_text(tmp.path / "bad.dfm", "not a depth map");
  CHECK_THROWS_AS(read_depth_fmap(tmp.path / "bad.dfm"), IoError);
  CHECK_THROWS_AS(read_depth_fmap(tmp.path / "missing.dfm"), IoError);
}

TEST_CASE("pair manifests round-trip and validate their files") {
  TempDir tmp("manifest");
  const GrayImage img = test::make_textured_image(16, 12, 9);
  write_gray16_png(img, tmp.path / "i0.png");
  write_gray16_png(img, tmp.path / "i1.png");
  write_depth_fmap(random_depth(16, 12, 11), tmp.path / "d0.dfm");
  write_depth_fmap(random_depth(16, 12, 12), tmp.path / "d1.dfm");

  SequenceManifest m;
  m.intrinsics = test::vga_intrinsics(16, 12);
  m.depth_scale = 0.001;
  m.frames = {{0.0, "i0.png", "d0.dfm"}, {1.0, "i1.png", "d1.dfm"}};
  write_pair_manifest(m, tmp.path / "manifest.json");

  const SequenceManifest loaded = load_pair_manifest(tmp.path / "manifest.json");
  REQUIRE(loaded.frames.size() == 2);
  CHECK(loaded.intrinsics.f == doctest::Approx(m.intrinsics.f));
  CHECK(loaded.intrinsics.width == 16);
  CHECK(loaded.depth_scale == doctest::Approx(0.001));
  CHECK(loaded.frames[0].image == tmp.path / "i0.png");
  CHECK(loaded.frames[1].timestamp == 1.0);
}

TEST_CASE("manifest validation failures name the problem") {
  TempDir tmp("manifestbad");
  const GrayImage img = test::make_textured_image(8, 8, 9);
  write_gray16_png(img, tmp.path / "i.png");
  write_depth_fmap(random_depth(8, 8, 1), tmp.path / "d.dfm");

  SUBCASE("parse error reports a line number") {
    write_text(tmp.path / "m.json", "{\n  \"f\": 100,\n  oops\n}");
    try {
      load_pair_manifest(tmp.path / "m.json");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("missing field is named") {
    write_text(tmp.path / "m.json",
               R"({"f": 100, "xc": 4, "yc": 4, "width": 8, "height": 8, "frames": []})");
    try {
      load_pair_manifest(tmp.path / "m.json");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("depth_scale") != std::string::npos);
    }
  }
  SUBCASE("unknown key is rejected") {
    write_text(tmp.path / "m.json",
               R"({"f": 100, "xc": 4, "yc": 4, "width": 8, "height": 8, "depth_scale": 1,
                   "frames": [], "exposure": 3})");
    CHECK_THROWS_AS(load_pair_manifest(tmp.path / "m.json"), IoError);
  }
  SUBCASE("timestamps must increase") {
    write_text(tmp.path / "m.json",
               R"({"f": 100, "xc": 4, "yc": 4, "width": 8, "height": 8, "depth_scale": 1,
                   "frames": [{"t": 1.0, "image": "i.png", "depth": "d.dfm"},
                              {"t": 1.0, "image": "i.png", "depth": "d.dfm"}]})");
    CHECK_THROWS_AS(load_pair_manifest(tmp.path / "m.json"), IoError);
  }
  SUBCASE("missing files are reported") {
    write_text(tmp.path / "m.json",
               R"({"f": 100, "xc": 4, "yc": 4, "width": 8, "height": 8, "depth_scale": 1,
                   "frames": [{"t": 1.0, "image": "absent.png", "depth": "d.dfm"}]})");
    CHECK_THROWS_AS(load_pair_manifest(tmp.path / "m.json"), IoError);
  }
  SUBCASE("inconsistent image sizes are reported") {
    write_gray16_png(test::make_textured_image(9, 8, 2), tmp.path / "wrong.png");
    write_text(tmp.path / "m.json",
               R"({"f": 100, "xc": 4, "yc": 4, "width": 8, "height": 8, "depth_scale": 1,
                   "frames": [{"t": 1.0, "image": "wrong.png", "depth": "d.dfm"}]})");
    CHECK_THROWS_AS(load_pair_manifest(tmp.path / "m.json"), IoError);
  }
}

TEST_CASE("TUM sequences associate nearest timestamps within the tolerance") {
  TempDir tmp("tum");
  const GrayImage img = test::make_textured_image(16, 12, 21);
  fs::create_directories(tmp.path / "rgb");
  fs::create_directories(tmp.path / "depth");
  for (const char* name : {"rgb/a.png", "rgb/b.png", "rgb/c.png"}) {
    write_gray16_png(img, tmp.path / name);
  }
  DepthMap d(16, 12);
  for (auto& v : d.data) v = 2.0;
  for (const char* name : {"depth/a.png", "depth/b.png"}) {
    write_depth_png(d, tmp.path / name, 1.0 / 5000.0);
  }
  write_text(tmp.path / "rgb.txt",
             "# color images\n1.000 rgb/a.png\n2.000 rgb/b.png\n3.000 rgb/c.png\n");
  write_text(tmp.path / "depth.txt", "# depth maps\n1.005 depth/a.png\n2.030 depth/b.png\n");
  write_text(tmp.path / "calibration.json", R"({"f": 525.0, "xc": 7.5, "yc": 5.5})");

  const SequenceManifest m = load_tum_sequence(tmp.path, 0.02);
  REQUIRE(m.frames.size() == 1);  // only the 1.000/1.005 pair is within 20 ms
  CHECK(m.frames[0].timestamp == 1.0);
  CHECK(m.frames[0].depth == tmp.path / "depth/a.png");
  CHECK(m.dropped == 3);  // two rgb, one depth
  CHECK(m.depth_scale == doctest::Approx(1.0 / 5000.0));
  CHECK(m.intrinsics.f == 525.0);
  CHECK(m.intrinsics.width == 16);

  const SequenceManifest wide = load_tum_sequence(tmp.path, 0.05);
  CHECK(wide.frames.size() == 2);  // 2.000/2.030 now associates
}

TEST_CASE("TUM loader error paths") {
  TempDir tmp("tumbad");
  CHECK_THROWS_AS(load_tum_sequence(tmp.path / "nowhere"), IoError);
  write_text(tmp.path / "rgb.txt", "1.0 rgb/a.png\n");
  CHECK_THROWS_AS(load_tum_sequence(tmp.path), IoError);  // no depth.txt
  write_text(tmp.path / "depth.txt", "9.0 depth/a.png\n");
  CHECK_THROWS_AS(load_tum_sequence(tmp.path), IoError);  // no association
}

TEST_CASE("run configs default, override, and reject unknown keys") {
  TempDir tmp("config");
  SUBCASE("empty object gives defaults") {
    write_text(tmp.path / "c.json", "{}");
    const RunConfig cfg = load_run_config(tmp.path / "c.json");
    CHECK(cfg.horizon == 10);
    CHECK(cfg.starts == 100);
    CHECK(cfg.metric_cutoff == 20.0);
    CHECK(cfg.pipeline.flow.max_corners == 500);
    CHECK(cfg.pipeline.motion.n_min == 25);
    CHECK(cfg.pipeline.motion.inlier_eps == 4.0);
    CHECK(cfg.pipeline.filter_radius == 8);
    CHECK(!cfg.intrinsics_override);
  }
  SUBCASE("nested overrides apply and seed the pipeline") {
    write_text(tmp.path / "c.json", R"({
      "seed": 42, "horizon": 3, "starts": 7,
      "flow": {"fast_threshold": 0.03, "lk_window": 7},
      "motion": {"inlier_eps": 1.0, "n_min": 12},
      "filter": {"radius": 4, "eps": 0.001},
      "intrinsics": {"f": 300.0, "xc": 160.0, "yc": 120.0}
    })");
    const RunConfig cfg = load_run_config(tmp.path / "c.json");
    CHECK(cfg.seed == 42);
    CHECK(cfg.pipeline.motion.rng_seed == 42);
    CHECK(cfg.pipeline.flow.lk_window == 7);
    CHECK(cfg.pipeline.motion.n_min == 12);
    CHECK(cfg.pipeline.filter_radius == 4);
    REQUIRE(cfg.intrinsics_override);
    CHECK((*cfg.intrinsics_override)[0] == 300.0);
  }
  SUBCASE("unknown keys and bad values are rejected") {
    write_text(tmp.path / "c.json", R"({"horizons": 3})");
    CHECK_THROWS_AS(load_run_config(tmp.path / "c.json"), IoError);
    write_text(tmp.path / "c.json", R"({"horizon": 0})");
    CHECK_THROWS_AS(load_run_config(tmp.path / "c.json"), IoError);
    write_text(tmp.path / "c.json", R"({"flow": {"lk_window": 1}})");
    CHECK_THROWS(load_run_config(tmp.path / "c.json"));
  }
}

TEST_CASE("scene specs load with named errors for bad fields") {
  TempDir tmp("scene");
  SUBCASE("a valid two-plane spec loads") {
    write_text(tmp.path / "s.json", R"({
      "intrinsics": {"f": 200.0, "xc": 79.5, "yc": 59.5, "width": 160, "height": 120},
      "frame_count": 3, "noise_std": 0.01, "seed": 5,
      "planes": [
        {"point": [0, 0, 3.0], "normal": [0, 0, 1], "region": [0, 0, 160, 120],
         "omega": [0.001, 0, 0], "t": [0.01, 0, 0.02], "texture_seed": 1},
        {"point": [0, 0, 1.8], "normal": [0.1, 0, 1], "region": [40, 30, 120, 90],
         "omega": [0, 0.002, 0], "t": [-0.02, 0.01, 0], "texture_seed": 2}
      ]
    })");
    const SceneSpec spec = load_scene_spec(tmp.path / "s.json");
    CHECK(spec.planes.size() == 2);
    CHECK(spec.frame_count == 3);
    CHECK(spec.intrinsics.f == 200.0);
    CHECK(spec.planes[1].motion.omega.y() == doctest::Approx(0.002));
  }
  SUBCASE("a missing plane field is named") {
    write_text(tmp.path / "s.json", R"({
      "intrinsics": {"f": 200.0, "xc": 79.5, "yc": 59.5, "width": 160, "height": 120},
      "frame_count": 2,
      "planes": [{"point": [0, 0, 3.0], "region": [0, 0, 160, 120],
                  "omega": [0, 0, 0], "t": [0, 0, 0]}]
    })");
    try {
      load_scene_spec(tmp.path / "s.json");
      FAIL("expected IoError");
    } catch (const IoError& e) {
      CHECK(std::string(e.what()).find("normal") != std::string::npos);
    }
  }
  SUBCASE("geometry problems surface as errors") {
    write_text(tmp.path / "s.json", R"({
      "intrinsics": {"f": 200.0, "xc": 79.5, "yc": 59.5, "width": 160, "height": 120},
      "frame_count": 2,
      "planes": [{"point": [0, 0, -3.0], "normal": [0, 0, 1], "region": [0, 0, 160, 120],
                  "omega": [0, 0, 0], "t": [0, 0, 0]}]
    })");
    CHECK_THROWS_AS(load_scene_spec(tmp.path / "s.json"), IoError);
  }
}

TEST_CASE("assignment colorization distinguishes motions and leaves holes black") {
  AssignmentMap a(3, 1);
  a.labels = {0, 1, AssignmentMap::kInvalid};
  const ColorImage img = colorize_assignment(a);
  const float* c0 = img.px(0, 0);
  const float* c1 = img.px(1, 0);
  const float* c2 = img.px(2, 0);
  CHECK((c0[0] != c1[0] || c0[1] != c1[1] || c0[2] != c1[2]));
  CHECK(c2[0] == 0.0f);
  CHECK(c2[1] == 0.0f);
  CHECK(c2[2] == 0.0f);
}

TEST_CASE("report and run-record writers emit the documented fields") {
  TempDir tmp("report");
  std::vector<FrameMetrics> run(2);
  run[0].mre = 0.01;
  run[0].mae = 0.1;
  run[0].rmse = 0.15;
  run[0].coverage = 0.95;
  run[0].n_evaluated = 100;
  run[1] = run[0];
  run[1].mre = 0.02;
  SequenceReport report = aggregate({run});
  report.seed = 7;
  write_report_json(report, tmp.path / "report.json");
  write_run_metrics_json(run, 0, tmp.path / "run_0000.json");

  std::ifstream in(tmp.path / "report.json");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  for (const char* field : {"\"offset\"", "\"mre\"", "\"mae\"", "\"rmse\"", "\"coverage\"",
                            "\"n_runs\"", "\"summary\"", "\"sensor_usage_reduction\""}) {
    CHECK(text.find(field) != std::string::npos);
  }
}
