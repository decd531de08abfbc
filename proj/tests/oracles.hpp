// Independent reference computations used only by the test suites. None of
// these call into the code paths they check.
#ifndef AUTOPOS_TESTS_ORACLES_HPP_
#define AUTOPOS_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace oracle {

struct ClassFractions {
  double los{0.0};
  double nlos{0.0};
  double outlier{0.0};
  double failed{0.0};
};

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

/// Exact class probabilities of one directed draw at distance d.
inline ClassFractions pair_class_probabilities(double d, double d_max, double p_out, double mp_mean,
                                               double mp_sigma, bool nlos_enabled, bool failures_enabled) {
  ClassFractions f;
  if (d >= d_max) {
    f.failed = 1.0;
    return f;
  }
  const double p_fail = failures_enabled ? d / d_max : 0.0;
  const double avail = 1.0 - p_fail;
  f.failed = p_fail;

  // p_eps ~ U(0,1); multipath test is p_eps > thr.
  const double thr = std::clamp(0.8 - 0.3 * d / d_max, 0.0, 1.0);
  const double p_above = nlos_enabled ? 1.0 - thr : 0.0;
  const double p_mp_short = normal_cdf((std::log(d) - mp_mean) / mp_sigma);  // P(LN < d)
  f.nlos = avail * p_above * p_mp_short;

  // Outlier: p_eps < p_out and not NLOS. Split p_eps < p_out into the part
  // below thr (never multipath) and above thr (multipath tested, fell through).
  const double below = nlos_enabled ? std::min(p_out, thr) : p_out;
  const double above = nlos_enabled ? std::max(0.0, p_out - thr) : 0.0;
  f.outlier = avail * (below + above * (1.0 - p_mp_short));
  f.los = avail - f.nlos - f.outlier;
  return f;
}

/// Class fractions averaged over every ordered pair of a layout.
template <typename Positions>
ClassFractions expected_fractions(const Positions& pts, double d_max, double p_out, double mp_mean,
                                  double mp_sigma, bool nlos_enabled, bool failures_enabled) {
  ClassFractions acc;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < pts.size(); ++j) {
      if (i == j) continue;
      const double d = std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y);
      const auto f = pair_class_probabilities(d, d_max, p_out, mp_mean, mp_sigma, nlos_enabled, failures_enabled);
      acc.los += f.los;
      acc.nlos += f.nlos;
      acc.outlier += f.outlier;
      acc.failed += f.failed;
      ++pairs;
    }
  }
  const auto n = static_cast<double>(pairs);
  return {acc.los / n, acc.nlos / n, acc.outlier / n, acc.failed / n};
}

struct Point {
  double x{0.0};
  double y{0.0};
};

/// Exhaustive search of sum_k (|X - A_k| - r_k)^2 on a regular lattice.
inline Point lse_grid_search(const std::vector<Point>& anchors, const std::vector<double>& ranges, double x0,
                             double x1, double y0, double y1, double step) {
  Point best;
  double best_cost = std::numeric_limits<double>::infinity();
  const auto nx = static_cast<long>(std::floor((x1 - x0) / step + 0.5));
  const auto ny = static_cast<long>(std::floor((y1 - y0) / step + 0.5));
  for (long iy = 0; iy <= ny; ++iy) {
    const double y = y0 + static_cast<double>(iy) * step;
    for (long ix = 0; ix <= nx; ++ix) {
      const double x = x0 + static_cast<double>(ix) * step;
      double cost = 0.0;
      for (std::size_t k = 0; k < anchors.size(); ++k) {
        const double r = std::hypot(x - anchors[k].x, y - anchors[k].y) - ranges[k];
        cost += r * r;
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = {x, y};
      }
    }
  }
  return best;
}

/// Cell-by-cell Bayes update in linear space: prior * N(y; 0, sigma), normalized.
inline std::vector<double> naive_posterior(const std::vector<double>& prior, const std::vector<Point>& centers,
                                           Point origin, double range, double sigma) {
  std::vector<double> post(prior.size());
  double total = 0.0;
  for (std::size_t m = 0; m < prior.size(); ++m) {
    const double y = std::sqrt((centers[m].x - origin.x) * (centers[m].x - origin.x) +
                               (centers[m].y - origin.y) * (centers[m].y - origin.y)) -
                     range;
    post[m] = prior[m] * std::exp(-(y * y) / (2.0 * sigma * sigma));
    total += post[m];
  }
  for (double& p : post) p /= total;
  return post;
}

/// Full 2-D convolution of an interior point mass with a truncated Gaussian
/// (radius ceil(4 sigma)), normalized over the result.
inline std::vector<double> gaussian_bump(std::size_t nx, std::size_t ny, std::size_t cx, std::size_t cy,
                                         double sigma_cells) {
  const long radius = static_cast<long>(std::ceil(4.0 * sigma_cells));
  std::vector<double> out(nx * ny, 0.0);
  double total = 0.0;
  for (long dy = -radius; dy <= radius; ++dy) {
    for (long dx = -radius; dx <= radius; ++dx) {
      const long x = static_cast<long>(cx) + dx;
      const long y = static_cast<long>(cy) + dy;
      if (x < 0 || y < 0 || x >= static_cast<long>(nx) || y >= static_cast<long>(ny)) continue;
      const double w = std::exp(-0.5 * static_cast<double>(dx * dx + dy * dy) / (sigma_cells * sigma_cells));
      out[static_cast<std::size_t>(y) * nx + static_cast<std::size_t>(x)] = w;
      total += w;
    }
  }
  for (double& v : out) v /= total;
  return out;
}

/// Percentile as the smallest sample whose empirical CDF reaches p.
inline double percentile_by_count(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const auto n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (static_cast<double>(i + 1) / n >= p) return v[i];
  }
  return v.back();
}

}  // namespace oracle

#endif  // AUTOPOS_TESTS_ORACLES_HPP_
