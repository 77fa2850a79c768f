#include "depthprop/image.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace depthprop {

namespace {

// Sliding-window sums along one axis with border truncation.
void box_sum_1d(const double* src, double* dst, int n, int stride, int r) {
  double s = 0.0;
  const int hi = std::min(r, n - 1);
  for (int i = 0; i <= hi; ++i) s += src[static_cast<std::size_t>(i) * stride];
  dst[0] = s;
  for (int i = 1; i < n; ++i) {
    const int add = i + r;
    const int drop = i - r - 1;
    if (add < n) s += src[static_cast<std::size_t>(add) * stride];
    if (drop >= 0) s -= src[static_cast<std::size_t>(drop) * stride];
    dst[static_cast<std::size_t>(i) * stride] = s;
  }
}

// Separable truncated-window sum over the whole image. The vertical pass
// keeps a running row accumulator so both passes sweep memory in row order;
// the scratch buffers are caller-provided so repeated filtering does not
// thrash the allocator.
struct BoxWorkspace {
  std::vector<double> row;
  std::vector<double> tmp;
  std::vector<double> acc;
};

// fill(y, row) writes one row of the field; generating rows on the fly keeps
// the horizontal pass cache-hot and avoids materializing the field at all.
template <typename RowFill>
void box_sum_rows(RowFill&& fill, std::vector<double>& out, int w, int h, int r,
                  BoxWorkspace& ws) {
  const std::size_t n = static_cast<std::size_t>(w) * h;
  ws.row.resize(w);
  ws.tmp.resize(n);
  ws.acc.assign(w, 0.0);
  out.resize(n);
  for (int y = 0; y < h; ++y) {
    fill(y, ws.row.data());
    box_sum_1d(ws.row.data(), ws.tmp.data() + static_cast<std::size_t>(y) * w, w, 1, r);
  }
  double* acc = ws.acc.data();
  const int hi = std::min(r, h - 1);
  for (int y = 0; y <= hi; ++y) {
    const double* row = ws.tmp.data() + static_cast<std::size_t>(y) * w;
    for (int x = 0; x < w; ++x) acc[x] += row[x];
  }
  std::copy(acc, acc + w, out.begin());
  for (int y = 1; y < h; ++y) {
    const int add = y + r;
    const int drop = y - r - 1;
    if (add < h) {
      const double* row = ws.tmp.data() + static_cast<std::size_t>(add) * w;
      for (int x = 0; x < w; ++x) acc[x] += row[x];
    }
    if (drop >= 0) {
      const double* row = ws.tmp.data() + static_cast<std::size_t>(drop) * w;
      for (int x = 0; x < w; ++x) acc[x] -= row[x];
    }
    std::copy(acc, acc + w, out.begin() + static_cast<std::size_t>(y) * w);
  }
}


// Box sums of K fields in one sweep: a ring buffer of generated field rows
// feeds incremental column sums, and a horizontal sliding window turns those
// into the final truncated-window sums. No per-field temporaries.
template <int K, typename RowFill>
void box_sum_multi(RowFill&& fill, std::array<std::vector<double>*, K> outs, int w, int h, int r) {
  const int ring_n = 2 * r + 2;
  std::vector<double> ring(static_cast<std::size_t>(ring_n) * K * w);
  std::vector<double> colsum(static_cast<std::size_t>(K) * w, 0.0);
  for (auto* out : outs) out->resize(static_cast<std::size_t>(w) * h);

  const auto ring_row = [&](int y, int field) {
    return ring.data() + (static_cast<std::size_t>(y % ring_n) * K + field) * w;
  };

  int filled = -1;  // highest generated source row
  const auto add_row = [&](int y, double sign) {
    for (int f = 0; f < K; ++f) {
      const double* row = ring_row(y, f);
      double* cs = colsum.data() + static_cast<std::size_t>(f) * w;
      for (int x = 0; x < w; ++x) cs[x] += sign * row[x];
    }
  };

  std::array<double*, K> rows;
  for (int y = 0; y <= std::min(r, h - 1); ++y) {
    for (int f = 0; f < K; ++f) rows[f] = ring_row(y, f);
    fill(y, rows);
    filled = y;
    add_row(y, 1.0);
  }
  for (int y = 0; y < h; ++y) {
    if (y > 0) {
      const int enter = y + r;
      if (enter < h && enter > filled) {
        for (int f = 0; f < K; ++f) rows[f] = ring_row(enter, f);
        fill(enter, rows);
        filled = enter;
        add_row(enter, 1.0);
      }
      const int leave = y - r - 1;
      if (leave >= 0) add_row(leave, -1.0);
    }
    // Horizontal sliding window over the column sums.
    for (int f = 0; f < K; ++f) {
      const double* cs = colsum.data() + static_cast<std::size_t>(f) * w;
      double* out = outs[f]->data() + static_cast<std::size_t>(y) * w;
      double s = 0.0;
      const int hi = std::min(r, w - 1);
      for (int x = 0; x <= hi; ++x) s += cs[x];
      out[0] = s;
      for (int x = 1; x < w; ++x) {
        const int add = x + r;
        const int drop = x - r - 1;
        if (add < w) s += cs[add];
        if (drop >= 0) s -= cs[drop];
        out[x] = s;
      }
    }
  }
}

void box_sum_into(const std::vector<double>& src, std::vector<double>& out, int w, int h, int r,
                  BoxWorkspace& ws) {
  box_sum_rows(
      [&src, w](int y, double* row) {
        std::copy(src.begin() + static_cast<std::size_t>(y) * w,
                  src.begin() + static_cast<std::size_t>(y + 1) * w, row);
      },
      out, w, h, r, ws);
}

inline int axis_count(int i, int n, int r) {
  return std::min(i + r, n - 1) - std::max(i - r, 0) + 1;
}

}  // namespace

GrayImage to_gray(const ColorImage& rgb) {
  if (rgb.width <= 0 || rgb.height <= 0 ||
      rgb.data.size() != static_cast<std::size_t>(rgb.width) * rgb.height * 3) {
    throw std::invalid_argument("to_gray: dimension mismatch");
  }
  GrayImage out(rgb.width, rgb.height);
  const float* src = rgb.data.data();
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const float v = 0.299f * src[3 * i] + 0.587f * src[3 * i + 1] + 0.114f * src[3 * i + 2];
    out.data[i] = std::clamp(v, 0.0f, 1.0f);
  }
  return out;
}

std::optional<float> sample_bilinear(const GrayImage& img, double x, double y) {
  if (!(x >= 0.0) || !(y >= 0.0) || !(x <= img.width - 1.0) || !(y <= img.height - 1.0)) {
    return std::nullopt;
  }
  int x0 = static_cast<int>(x);
  int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double v =
      (1.0 - fy) * ((1.0 - fx) * img.at(x0, y0) + fx * img.at(x1, y0)) +
      fy * ((1.0 - fx) * img.at(x0, y1) + fx * img.at(x1, y1));
  return static_cast<float>(v);
}

GrayImage box_filter(const GrayImage& img, int radius) {
  if (radius < 1) throw std::invalid_argument("box_filter: radius must be >= 1");
  if (radius >= std::min(img.width, img.height)) {
    throw std::invalid_argument("box_filter: radius must be smaller than both image dimensions");
  }
  BoxWorkspace ws;
  std::vector<double> sums;
  box_sum_rows(
      [&img](int y, double* row) {
        const float* src = img.data.data() + static_cast<std::size_t>(y) * img.width;
        for (int x = 0; x < img.width; ++x) row[x] = src[x];
      },
      sums, img.width, img.height, radius, ws);
  GrayImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    const int cy = axis_count(y, img.height, radius);
    for (int x = 0; x < img.width; ++x) {
      const int count = axis_count(x, img.width, radius) * cy;
      out.at(x, y) = static_cast<float>(sums[static_cast<std::size_t>(y) * img.width + x] / count);
    }
  }
  return out;
}

ErrorMap guided_filter(const ErrorMap& input, const GrayImage& guide, int radius, float eps) {
  if (input.width != guide.width || input.height != guide.height) {
    throw std::invalid_argument("guided_filter: input/guide dimension mismatch");
  }
  if (!(eps > 0.0f)) throw std::invalid_argument("guided_filter: eps must be positive");
  const int w = input.width;
  const int h = input.height;
  const std::size_t n = input.data.size();

  std::vector<double> nv(n), sg(n), sp(n), sgg(n), sgp(n);
  const std::uint8_t* mask = input.mask.data();
  const float* g_data = guide.data.data();
  const float* p_data = input.data.data();

  // Window statistics over valid pixels only: the five masked raw moments in
  // one sweep.
  box_sum_multi<5>(
      [&](int y, const std::array<double*, 5>& rows) {
        const std::size_t base = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          const std::size_t i = base + x;
          if (mask[i]) {
            const double g = g_data[i];
            const double pv = p_data[i];
            rows[0][x] = 1.0;
            rows[1][x] = g;
            rows[2][x] = pv;
            rows[3][x] = g * g;
            rows[4][x] = g * pv;
          } else {
            rows[0][x] = rows[1][x] = rows[2][x] = rows[3][x] = rows[4][x] = 0.0;
          }
        }
      },
      {&nv, &sg, &sp, &sgg, &sgp}, w, h, radius);

  // Second stage: per-window affine coefficients a, b (where any valid pixel
  // exists) are generated row by row and box-summed in the same sweep.
  std::vector<double> sa(n), sb(n), nd(n);
  box_sum_multi<3>(
      [&](int y, const std::array<double*, 3>& rows) {
        const std::size_t base = static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
          const std::size_t i = base + x;
          if (nv[i] <= 0.0) {
            rows[0][x] = rows[1][x] = rows[2][x] = 0.0;
            continue;
          }
          const double mean_g = sg[i] / nv[i];
          const double mean_p = sp[i] / nv[i];
          const double var_g = std::max(sgg[i] / nv[i] - mean_g * mean_g, 0.0);
          const double cov_gp = sgp[i] / nv[i] - mean_g * mean_p;
          const double a = cov_gp / (var_g + eps);
          rows[0][x] = a;
          rows[1][x] = mean_p - a * mean_g;
          rows[2][x] = 1.0;
        }
      },
      {&sa, &sb, &nd}, w, h, radius);

  ErrorMap out(w, h);
  out.mask = input.mask;
  for (std::size_t i = 0; i < n; ++i) {
    if (!input.mask[i]) continue;
    // A valid pixel always has at least its own defined window.
    out.data[i] = static_cast<float>((sa[i] / nd[i]) * guide.data[i] + sb[i] / nd[i]);
  }
  return out;
}

}  // namespace depthprop
