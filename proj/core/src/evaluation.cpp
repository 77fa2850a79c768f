#include "depthprop/evaluation.hpp"

#include <cmath>

namespace depthprop {

FrameMetrics compute_metrics(const DepthMap& estimate, const DepthMap& truth, double max_depth) {
  if (estimate.width != truth.width || estimate.height != truth.height) {
    throw std::invalid_argument("compute_metrics: dimension mismatch");
  }
  std::size_t n_truth = 0;
  std::size_t n_joint = 0;
  double sum_rel = 0.0;
  double sum_abs = 0.0;
  double sum_sq = 0.0;
  for (int y = 0; y < truth.height; ++y) {
    for (int x = 0; x < truth.width; ++x) {
      if (!truth.valid_at(x, y)) continue;
      const double z = truth.at(x, y);
      if (z > max_depth) continue;
      ++n_truth;
      if (!estimate.valid_at(x, y)) continue;
      ++n_joint;
      const double err = std::abs(z - static_cast<double>(estimate.at(x, y)));
      sum_rel += err / z;
      sum_abs += err;
      sum_sq += err * err;
    }
  }
  if (n_joint == 0) {
    throw EmptyOverlap("compute_metrics: no jointly valid pixels within the cutoff");
  }
  FrameMetrics m;
  m.n_evaluated = n_joint;
  m.mre = sum_rel / n_joint;
  m.mae = sum_abs / n_joint;
  m.rmse = std::sqrt(sum_sq / n_joint);
  m.coverage = static_cast<double>(n_joint) / n_truth;
  return m;
}

std::vector<FrameMetrics> sequential_run(const std::vector<SequenceFrame>& frames,
                                         const Intrinsics& k, int start, int horizon,
                                         const PipelineParams& params, double max_depth) {
  if (start < 0 || horizon < 1 ||
      start + horizon >= static_cast<int>(frames.size())) {
    throw std::invalid_argument("sequential_run: start + horizon must stay inside the sequence");
  }
  bool any_valid = false;
  for (int y = 0; y < frames[start].truth.height && !any_valid; ++y) {
    for (int x = 0; x < frames[start].truth.width; ++x) {
      if (frames[start].truth.valid_at(x, y)) {
        any_valid = true;
        break;
      }
    }
  }
  if (!any_valid) {
    throw std::invalid_argument("sequential_run: start frame has no measured depth");
  }

  std::vector<FrameMetrics> metrics;
  metrics.reserve(horizon);
  DepthMap prior = frames[start].truth;
  for (int step = 0; step < horizon; ++step) {
    const int i = start + step;
    const DepthEstimate est =
        estimate_depth(frames[i].image, frames[i + 1].image, prior, k, params);
    FrameMetrics m = compute_metrics(est.depth, frames[i + 1].truth, max_depth);
    m.degraded = est.degraded;
    metrics.push_back(m);
    prior = est.depth;
  }
  return metrics;
}

SequenceReport aggregate(const std::vector<std::vector<FrameMetrics>>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate: no runs");
  const std::size_t horizon = runs[0].size();
  for (const auto& r : runs) {
    if (r.size() != horizon) throw std::invalid_argument("aggregate: runs must share one horizon");
  }
  SequenceReport report;
  report.horizon = static_cast<int>(horizon);
  for (std::size_t off = 0; off < horizon; ++off) {
    OffsetAggregate agg;
    agg.offset = static_cast<int>(off) + 1;
    agg.n_runs = static_cast<int>(runs.size());
    for (const auto& r : runs) {
      agg.mre += r[off].mre;
      agg.mae += r[off].mae;
      agg.rmse += r[off].rmse;
      agg.coverage += r[off].coverage;
    }
    agg.mre /= runs.size();
    agg.mae /= runs.size();
    agg.rmse /= runs.size();
    agg.coverage /= runs.size();
    report.offsets.push_back(agg);
  }
  OffsetAggregate& s = report.summary;
  s.offset = 0;
  s.n_runs = static_cast<int>(runs.size());
  for (const auto& o : report.offsets) {
    s.mre += o.mre;
    s.mae += o.mae;
    s.rmse += o.rmse;
    s.coverage += o.coverage;
  }
  s.mre /= horizon;
  s.mae /= horizon;
  s.rmse /= horizon;
  s.coverage /= horizon;
  return report;
}

}  // namespace depthprop
