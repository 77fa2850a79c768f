#include "depthprop/motion.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <Eigen/Dense>

#include "depthprop/random.hpp"

namespace depthprop {

namespace {

// Coefficient rows of the two residuals for unknowns (wx, wy, wz, tx, ty, tz).
// With a = x' - xc, b = y' - yc and P = (X, Y, Z):
//   phi_x = a*(Z + wx*Y - wy*X + tz) - f*(X + wy*Z - wz*Y + tx)
//   phi_y = b*(Z + wx*Y - wy*X + tz) - f*(Y + wz*X - wx*Z + ty)
void residual_rows(const Correspondence& c, const Intrinsics& k,
                   Eigen::Matrix<double, 2, 6>& rows, Eigen::Vector2d& constants) {
  const double a = c.p_prime.x() - k.xc;
  const double b = c.p_prime.y() - k.yc;
  const double X = c.P.x();
  const double Y = c.P.y();
  const double Z = c.P.z();
  const double f = k.f;
  rows << a * Y, -(a * X + f * Z), f * Y, -f, 0.0, a,
          b * Y + f * Z, -b * X, -f * X, 0.0, -f, b;
  constants << a * Z - f * X, b * Z - f * Y;
}

constexpr double kConditionLimit = 1e12;  // on the 6x6 normal matrix

RigidMotion solve_rows(const Eigen::MatrixXd& A, const Eigen::VectorXd& rhs) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  const auto& R = qr.matrixR();
  const double r_max = std::abs(R(0, 0));
  const double r_min = std::abs(R(5, 5));
  // cond(A'A) = cond(A)^2, estimated from the pivoted R diagonal.
  if (!(r_min > 0.0) || (r_max / r_min) * (r_max / r_min) >= kConditionLimit) {
    throw DegenerateConfiguration("solve_motion: rank-deficient or ill-conditioned system");
  }
  const Eigen::Matrix<double, 6, 1> u = qr.solve(rhs);
  RigidMotion m;
  m.omega = u.head<3>();
  m.t = u.tail<3>();
  return m;
}

// Shared RANSAC body; the engine is threaded through so that sequential
// multi-motion extraction keeps drawing from one seeded stream.
std::pair<RigidMotion, std::vector<int>> ransac_impl(const std::vector<Correspondence>& cs,
                                                     const Intrinsics& k,
                                                     const MotionParams& params, Rng& rng) {
  const int n = static_cast<int>(cs.size());
  RigidMotion best_motion;
  std::vector<int> best_inliers;

  std::vector<Correspondence> sample(3);
  for (int iter = 0; iter < params.ransac_iters; ++iter) {
    std::array<int, 3> idx{};
    idx[0] = static_cast<int>(rng.uniform_index(n));
    do {
      idx[1] = static_cast<int>(rng.uniform_index(n));
    } while (idx[1] == idx[0]);
    do {
      idx[2] = static_cast<int>(rng.uniform_index(n));
    } while (idx[2] == idx[0] || idx[2] == idx[1]);

    for (int j = 0; j < 3; ++j) sample[j] = cs[idx[j]];
    RigidMotion hypothesis;
    try {
      hypothesis = solve_motion(sample, k);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    std::vector<int> inliers = inlier_set(cs, hypothesis, k, params.inlier_eps);
    if (inliers.size() > best_inliers.size()) {
      best_motion = hypothesis;
      best_inliers = std::move(inliers);
    }
  }

  if (best_inliers.size() < 3) {
    throw NoConsensus("ransac_motion: no hypothesis reached 3 inliers");
  }

  // One refit on the winning consensus, then a single inlier recount.
  std::vector<Correspondence> consensus;
  consensus.reserve(best_inliers.size());
  for (int i : best_inliers) consensus.push_back(cs[i]);
  try {
    best_motion = solve_motion(consensus, k);
    best_inliers = inlier_set(cs, best_motion, k, params.inlier_eps);
  } catch (const DegenerateConfiguration&) {
    // Keep the hypothesis motion when the consensus set is itself degenerate.
  }
  return {best_motion, std::move(best_inliers)};
}

}  // namespace

std::pair<double, double> residuals(const Correspondence& c, const RigidMotion& m,
                                    const Intrinsics& k) {
  const Vec3 moved = apply_motion(c.P, m);
  const double phi_x = (c.p_prime.x() - k.xc) * moved.z() - k.f * moved.x();
  const double phi_y = (c.p_prime.y() - k.yc) * moved.z() - k.f * moved.y();
  return {phi_x, phi_y};
}

RigidMotion solve_motion(const std::vector<Correspondence>& cs, const Intrinsics& k) {
  if (cs.size() < 3) {
    throw std::invalid_argument("solve_motion: need at least 3 correspondences");
  }
  const int n = static_cast<int>(cs.size());
  Eigen::MatrixXd A(2 * n, 6);
  Eigen::VectorXd rhs(2 * n);
  Eigen::Matrix<double, 2, 6> rows;
  Eigen::Vector2d constants;
  for (int i = 0; i < n; ++i) {
    residual_rows(cs[i], k, rows, constants);
    A.block<2, 6>(2 * i, 0) = rows;
    rhs.segment<2>(2 * i) = -constants;
  }
  return solve_rows(A, rhs);
}

std::vector<int> inlier_set(const std::vector<Correspondence>& cs, const RigidMotion& m,
                            const Intrinsics& k, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("inlier_set: eps must be positive");
  std::vector<int> out;
  out.reserve(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) {
    const Vec3 moved = apply_motion(cs[i].P, m);
    if (!(moved.z() > 0.0)) continue;
    const Vec2 projected = project(moved, k);
    if ((projected - cs[i].p_prime).squaredNorm() <= eps) {
      out.push_back(static_cast<int>(i));
    }
  }
  return out;
}

std::pair<RigidMotion, std::vector<int>> ransac_motion(const std::vector<Correspondence>& cs,
                                                       const Intrinsics& k,
                                                       const MotionParams& params) {
  params.validate();
  if (cs.size() < 3) {
    throw std::invalid_argument("ransac_motion: need at least 3 correspondences");
  }
  Rng rng(params.rng_seed);
  return ransac_impl(cs, k, params, rng);
}

MotionSet estimate_motions(const std::vector<Correspondence>& cs, const Intrinsics& k,
                           const MotionParams& params) {
  params.validate();
  if (cs.size() < 3) {
    throw std::invalid_argument("estimate_motions: need at least 3 correspondences");
  }
  Rng rng(params.rng_seed);

  std::vector<int> remaining(cs.size());
  for (std::size_t i = 0; i < cs.size(); ++i) remaining[i] = static_cast<int>(i);

  MotionSet set;
  while (remaining.size() >= 3 && static_cast<int>(set.size()) < params.max_motions) {
    std::vector<Correspondence> subset;
    subset.reserve(remaining.size());
    for (int i : remaining) subset.push_back(cs[i]);

    RigidMotion motion;
    std::vector<int> inliers;
    try {
      std::tie(motion, inliers) = ransac_impl(subset, k, params, rng);
    } catch (const NoConsensus&) {
      break;
    }
    if (static_cast<int>(inliers.size()) < params.n_min) break;

    set.motions.push_back(motion);
    set.inlier_counts.push_back(static_cast<int>(inliers.size()));

    std::vector<bool> is_inlier(remaining.size(), false);
    for (int i : inliers) is_inlier[i] = true;
    std::vector<int> next;
    next.reserve(remaining.size() - inliers.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) {
      if (!is_inlier[i]) next.push_back(remaining[i]);
    }
    remaining = std::move(next);
  }

  if (set.motions.empty()) {
    throw NoMotion("estimate_motions: no motion reached n_min inliers");
  }
  return set;
}

}  // namespace depthprop
