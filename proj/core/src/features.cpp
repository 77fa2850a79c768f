#include "depthprop/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "depthprop/parallel.hpp"

namespace depthprop {

namespace {

// 16-pixel Bresenham circle of radius 3, clockwise from the top.
constexpr std::array<std::array<int, 2>, 16> kCircle = {{
    {0, -3}, {1, -3}, {2, -2}, {3, -1}, {3, 0}, {3, 1}, {2, 2}, {1, 3},
    {0, 3}, {-1, 3}, {-2, 2}, {-3, 1}, {-3, 0}, {-3, -1}, {-2, -2}, {-1, -3},
}};

// FAST-9 corner score: the largest threshold at which the segment test still
// passes. Negative when the pixel is not a corner at threshold 0.
float fast_score(const float* vals, float center) {
  float best = -std::numeric_limits<float>::infinity();
  for (int s = 0; s < 16; ++s) {
    float arc_min = std::numeric_limits<float>::infinity();
    float arc_max = -std::numeric_limits<float>::infinity();
    for (int j = 0; j < 9; ++j) {
      const float v = vals[(s + j) & 15];
      arc_min = std::min(arc_min, v);
      arc_max = std::max(arc_max, v);
    }
    best = std::max(best, arc_min - center);   // all brighter than center + t
    best = std::max(best, center - arc_max);   // all darker than center - t
  }
  return best;
}

struct ScoredCorner {
  int x;
  int y;
  float score;
};

struct GradientImage {
  GrayImage gx;
  GrayImage gy;
};

GradientImage central_gradients(const GrayImage& img) {
  GradientImage g{GrayImage(img.width, img.height), GrayImage(img.width, img.height)};
  parallel_for(1, img.height - 1, [&](int y) {
    for (int x = 1; x < img.width - 1; ++x) {
      g.gx.at(x, y) = 0.5f * (img.at(x + 1, y) - img.at(x - 1, y));
      g.gy.at(x, y) = 0.5f * (img.at(x, y + 1) - img.at(x, y - 1));
    }
  });
  return g;
}

// Unchecked bilinear read; the caller guarantees the 2x2 support is inside.
inline double bilerp(const GrayImage& img, double x, double y) {
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const double fx = x - x0;
  const double fy = y - y0;
  const float* row0 = img.data.data() + static_cast<std::size_t>(y0) * img.width + x0;
  const float* row1 = row0 + img.width;
  return (1.0 - fy) * ((1.0 - fx) * row0[0] + fx * row0[1]) +
         fy * ((1.0 - fx) * row1[0] + fx * row1[1]);
}

GrayImage downsample_half(const GrayImage& img) {
  const int w2 = (img.width + 1) / 2;
  const int h2 = (img.height + 1) / 2;
  // [1 2 1]/4 smoothing in both axes with clamped borders, then decimation.
  GrayImage tmp(img.width, img.height);
  parallel_for(0, img.height, [&](int y) {
    for (int x = 0; x < img.width; ++x) {
      const int xl = std::max(x - 1, 0);
      const int xr = std::min(x + 1, img.width - 1);
      tmp.at(x, y) = 0.25f * img.at(xl, y) + 0.5f * img.at(x, y) + 0.25f * img.at(xr, y);
    }
  });
  GrayImage out(w2, h2);
  parallel_for(0, h2, [&](int y) {
    const int sy = 2 * y;
    const int yt = std::max(sy - 1, 0);
    const int yb = std::min(sy + 1, img.height - 1);
    for (int x = 0; x < w2; ++x) {
      const int sx = std::min(2 * x, img.width - 1);
      out.at(x, y) = 0.25f * tmp.at(sx, yt) + 0.5f * tmp.at(sx, sy) + 0.25f * tmp.at(sx, yb);
    }
  });
  return out;
}

constexpr double kMinEigenThreshold = 1e-8;  // per-pixel normalized

}  // namespace

std::vector<Vec2> detect_fast(const GrayImage& img, const FlowParams& params) {
  params.validate();
  if (img.width < 7 || img.height < 7) {
    throw std::invalid_argument("detect_fast: image must be at least 7x7");
  }
  const float t = params.fast_threshold;
  GrayImage scores(img.width, img.height, -std::numeric_limits<float>::infinity());

  parallel_for(3, img.height - 3, [&](int y) {
    std::array<float, 16> vals;
    for (int x = 3; x < img.width - 3; ++x) {
      const float c = img.at(x, y);
      // Any 9-run on the circle covers at least two of the four cardinal
      // pixels, so fewer than two bright and two dark cardinals rejects.
      int nb = 0;
      int nd = 0;
      for (int cardinal = 0; cardinal < 16; cardinal += 4) {
        const float v = img.at(x + kCircle[cardinal][0], y + kCircle[cardinal][1]);
        if (v > c + t) ++nb;
        if (v < c - t) ++nd;
      }
      if (nb < 2 && nd < 2) continue;
      for (int i = 0; i < 16; ++i) {
        vals[i] = img.at(x + kCircle[i][0], y + kCircle[i][1]);
      }
      const float score = fast_score(vals.data(), c);
      if (score > t) scores.at(x, y) = score;
    }
  });

  // 3x3 non-maximum suppression; score ties resolved by row-major precedence.
  std::vector<ScoredCorner> corners;
  for (int y = 3; y < img.height - 3; ++y) {
    for (int x = 3; x < img.width - 3; ++x) {
      const float s = scores.at(x, y);
      if (!(s > t)) continue;
      bool maximal = true;
      for (int dy = -1; dy <= 1 && maximal; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          if (dx == 0 && dy == 0) continue;
          const float sn = scores.at(x + dx, y + dy);
          if (sn > s || (sn == s && (dy < 0 || (dy == 0 && dx < 0)))) {
            maximal = false;
            break;
          }
        }
      }
      if (maximal) corners.push_back({x, y, s});
    }
  }

  std::sort(corners.begin(), corners.end(), [](const ScoredCorner& a, const ScoredCorner& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });

  // Greedy spacing on a bucket grid, strongest corners first.
  const double min_dist = params.min_corner_distance;
  const double min_dist_sq = min_dist * min_dist;
  const int cell = std::max(1, static_cast<int>(std::ceil(min_dist)));
  const int gw = (img.width + cell - 1) / cell;
  const int gh = (img.height + cell - 1) / cell;
  std::vector<std::vector<ScoredCorner>> grid(static_cast<std::size_t>(gw) * gh);
  std::vector<ScoredCorner> accepted;
  accepted.reserve(std::min<std::size_t>(corners.size(), params.max_corners));
  for (const ScoredCorner& c : corners) {
    if (static_cast<int>(accepted.size()) >= params.max_corners) break;
    const int cx = c.x / cell;
    const int cy = c.y / cell;
    bool ok = true;
    for (int gy = std::max(cy - 1, 0); gy <= std::min(cy + 1, gh - 1) && ok; ++gy) {
      for (int gx = std::max(cx - 1, 0); gx <= std::min(cx + 1, gw - 1); ++gx) {
        for (const ScoredCorner& o : grid[static_cast<std::size_t>(gy) * gw + gx]) {
          const double dx = c.x - o.x;
          const double dy = c.y - o.y;
          if (dx * dx + dy * dy < min_dist_sq) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
    }
    if (ok) {
      accepted.push_back(c);
      grid[static_cast<std::size_t>(cy) * gw + cx].push_back(c);
    }
  }

  std::sort(accepted.begin(), accepted.end(), [](const ScoredCorner& a, const ScoredCorner& b) {
    if (a.y != b.y) return a.y < b.y;
    return a.x < b.x;
  });
  std::vector<Vec2> out;
  out.reserve(accepted.size());
  for (const ScoredCorner& c : accepted) out.emplace_back(c.x, c.y);
  return out;
}

std::vector<TrackedPoint> lk_track(const GrayImage& img0, const GrayImage& img1,
                                   const std::vector<Vec2>& points, const FlowParams& params) {
  params.validate();
  if (img0.width != img1.width || img0.height != img1.height) {
    throw std::invalid_argument("lk_track: image dimensions must match");
  }

  // Build both pyramids; stop early when a level gets too small for the window.
  const int win = params.lk_window;
  const int min_side = 2 * win + 5;
  std::vector<GrayImage> pyr0{img0};
  std::vector<GrayImage> pyr1{img1};
  for (int l = 1; l < params.lk_pyramid_levels; ++l) {
    const GrayImage& prev = pyr0.back();
    if ((prev.width + 1) / 2 < min_side || (prev.height + 1) / 2 < min_side) break;
    pyr0.push_back(downsample_half(prev));
    pyr1.push_back(downsample_half(pyr1.back()));
  }
  const int levels = static_cast<int>(pyr0.size());
  std::vector<GradientImage> grad0(levels);
  for (int l = 0; l < levels; ++l) grad0[l] = central_gradients(pyr0[l]);

  const int wside = 2 * win + 1;
  const int wcount = wside * wside;

  std::vector<TrackedPoint> result(points.size());
  parallel_for(0, static_cast<int>(points.size()), [&](int pi) {
    const Vec2 p = points[pi];
    result[pi] = {p, false};

    std::vector<double> t_i(wcount), t_gx(wcount), t_gy(wcount);
    Vec2 guess = Vec2::Zero();
    bool ok = true;
    bool started = false;
    Vec2 flow = Vec2::Zero();

    for (int l = levels - 1; l >= 0 && ok; --l) {
      const GrayImage& i0 = pyr0[l];
      const GrayImage& i1 = pyr1[l];
      const double scale = 1.0 / static_cast<double>(1 << l);
      const Vec2 pl = p * scale;

      // Template window and structure tensor from frame 0, fixed per level.
      if (pl.x() - win < 1.0 || pl.y() - win < 1.0 || pl.x() + win > i0.width - 2.0 ||
          pl.y() + win > i0.height - 2.0) {
        // Coarse levels that cannot hold the window are skipped; the point
        // starts at the coarsest level where it fits.
        if (!started && l > 0) continue;
        ok = false;
        break;
      }
      started = true;
      // One set of interpolation weights serves the intensity and both
      // gradient images.
      double gxx = 0.0, gxy = 0.0, gyy = 0.0;
      {
        const int x0 = static_cast<int>(pl.x() - win);
        const int y0 = static_cast<int>(pl.y() - win);
        const double fx = pl.x() - win - x0;
        const double fy = pl.y() - win - y0;
        const double w00 = (1.0 - fx) * (1.0 - fy);
        const double w10 = fx * (1.0 - fy);
        const double w01 = (1.0 - fx) * fy;
        const double w11 = fx * fy;
        const GrayImage& gx_img = grad0[l].gx;
        const GrayImage& gy_img = grad0[l].gy;
        int wi = 0;
        for (int dy = 0; dy < wside; ++dy) {
          const std::size_t row = static_cast<std::size_t>(y0 + dy) * i0.width + x0;
          const float* i0r = i0.data.data() + row;
          const float* i0n = i0r + i0.width;
          const float* gxr = gx_img.data.data() + row;
          const float* gxn = gxr + i0.width;
          const float* gyr = gy_img.data.data() + row;
          const float* gyn = gyr + i0.width;
          for (int dx = 0; dx < wside; ++dx, ++wi) {
            t_i[wi] = w00 * i0r[dx] + w10 * i0r[dx + 1] + w01 * i0n[dx] + w11 * i0n[dx + 1];
            const double gx = w00 * gxr[dx] + w10 * gxr[dx + 1] + w01 * gxn[dx] + w11 * gxn[dx + 1];
            const double gy = w00 * gyr[dx] + w10 * gyr[dx + 1] + w01 * gyn[dx] + w11 * gyn[dx + 1];
            t_gx[wi] = gx;
            t_gy[wi] = gy;
            gxx += gx * gx;
            gxy += gx * gy;
            gyy += gy * gy;
          }
        }
      }
      const double tr = gxx + gyy;
      const double det = gxx * gyy - gxy * gxy;
      const double min_eig = 0.5 * (tr - std::sqrt(std::max(tr * tr - 4.0 * det, 0.0)));
      if (min_eig / wcount < kMinEigenThreshold) {
        ok = false;
        break;
      }
      const double inv_det = 1.0 / std::max(det, 1e-300);

      Vec2 d = Vec2::Zero();
      for (int it = 0; it < params.lk_max_iters; ++it) {
        const Vec2 q = pl + guess + d;
        if (q.x() - win < 1.0 || q.y() - win < 1.0 || q.x() + win > i1.width - 2.0 ||
            q.y() + win > i1.height - 2.0) {
          ok = false;
          break;
        }
        double bx = 0.0, by = 0.0;
        {
          const int x0 = static_cast<int>(q.x() - win);
          const int y0 = static_cast<int>(q.y() - win);
          const double fx = q.x() - win - x0;
          const double fy = q.y() - win - y0;
          const double w00 = (1.0 - fx) * (1.0 - fy);
          const double w10 = fx * (1.0 - fy);
          const double w01 = (1.0 - fx) * fy;
          const double w11 = fx * fy;
          int wi = 0;
          for (int dy = 0; dy < wside; ++dy) {
            const float* i1r = i1.data.data() + static_cast<std::size_t>(y0 + dy) * i1.width + x0;
            const float* i1n = i1r + i1.width;
            for (int dx = 0; dx < wside; ++dx, ++wi) {
              const double diff =
                  t_i[wi] - (w00 * i1r[dx] + w10 * i1r[dx + 1] + w01 * i1n[dx] + w11 * i1n[dx + 1]);
              bx += diff * t_gx[wi];
              by += diff * t_gy[wi];
            }
          }
        }
        const Vec2 delta(inv_det * (gyy * bx - gxy * by), inv_det * (gxx * by - gxy * bx));
        d += delta;
        if (!d.allFinite()) {
          ok = false;
          break;
        }
        if (delta.norm() < params.lk_epsilon) break;
      }
      if (!ok) break;
      if (l > 0) {
        guess = 2.0 * (guess + d);
      } else {
        flow = guess + d;
      }
    }

    if (ok) {
      result[pi] = {p + flow, true};
    }
  });
  return result;
}

std::vector<Correspondence> build_correspondences(const GrayImage& img0, const GrayImage& img1,
                                                  const DepthMap& depth0, const Intrinsics& k,
                                                  const FlowParams& params) {
  if (img0.width != depth0.width || img0.height != depth0.height) {
    throw std::invalid_argument("build_correspondences: image/depth grids must be aligned");
  }
  const std::vector<Vec2> corners = detect_fast(img0, params);

  std::vector<Vec2> with_depth;
  with_depth.reserve(corners.size());
  for (const Vec2& c : corners) {
    if (depth0.valid_at(static_cast<int>(c.x()), static_cast<int>(c.y()))) {
      with_depth.push_back(c);
    }
  }

  std::vector<Correspondence> out;
  if (!with_depth.empty()) {
    const std::vector<TrackedPoint> tracked = lk_track(img0, img1, with_depth, params);
    out.reserve(tracked.size());
    for (std::size_t i = 0; i < tracked.size(); ++i) {
      if (!tracked[i].tracked) continue;
      const Vec2& p = with_depth[i];
      const double z = depth0.at(static_cast<int>(p.x()), static_cast<int>(p.y()));
      out.push_back({p, tracked[i].p, lift(p, z, k)});
    }
  }
  if (out.size() < 3) {
    throw InsufficientFeatures("build_correspondences: fewer than 3 tracked features with depth");
  }
  return out;
}

}  // namespace depthprop
