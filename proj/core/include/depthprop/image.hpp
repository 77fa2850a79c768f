#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

namespace depthprop {

/// Single-channel image, row-major, intensities in [0, 1].
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  GrayImage() = default;
  GrayImage(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
  std::size_t pixel_count() const { return data.size(); }
};

/// Interleaved RGB image with channels in [0, 1].
struct ColorImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;  // 3 * width * height, RGBRGB...

  ColorImage() = default;
  ColorImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  float* px(int x, int y) { return data.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const float* px(int x, int y) const {
    return data.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
};

/// Metric depth map; a value of 0 marks an invalid (unmeasured) pixel.
/// Depth is geometry, so it is kept in double precision (intensities stay
/// single precision).
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> data;  // meters

  DepthMap() = default;
  DepthMap(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0) {}

  double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool valid_at(int x, int y) const {
    const double d = at(x, y);
    return d > 0.0 && std::isfinite(d);
  }
  std::size_t pixel_count() const { return data.size(); }
};

/// Per-pixel photometric error together with a validity mask. Pixels that
/// never participated in a reprojection carry mask 0 and undefined data.
struct ErrorMap {
  int width = 0;
  int height = 0;
  std::vector<float> data;
  std::vector<std::uint8_t> mask;

  ErrorMap() = default;
  ErrorMap(int w, int h)
      : width(w),
        height(h),
        data(static_cast<std::size_t>(w) * h, 0.0f),
        mask(static_cast<std::size_t>(w) * h, 0) {}

  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  bool valid_at(int x, int y) const { return mask[idx(x, y)] != 0; }
};

/// Rec.601 luma conversion; output normalized to [0, 1].
GrayImage to_gray(const ColorImage& rgb);

/// Bilinear interpolation of the four neighbors. Returns nullopt when the
/// 2x2 support exits [0, width-1] x [0, height-1].
std::optional<float> sample_bilinear(const GrayImage& img, double x, double y);

/// Mean over the (2r+1)^2 window with border truncation (windows are
/// normalized by the number of pixels actually covered). Runs in O(n)
/// independent of the radius.
GrayImage box_filter(const GrayImage& img, int radius);

/// Edge-preserving guided filter. Window statistics are taken over valid
/// input pixels only; invalid pixels stay invalid and never contribute.
ErrorMap guided_filter(const ErrorMap& input, const GrayImage& guide, int radius, float eps);

}  // namespace depthprop
