#ifndef AUTOPOS_CGP_HPP_
#define AUTOPOS_CGP_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "autopos/core.hpp"

// Collaborative grid positioning: one discrete Bayes (histogram) filter per
// node over an equidistant grid. Nodes are resolved in index order; every
// node already estimated acts as a range origin for the later ones, and its
// positional uncertainty widens the likelihood it contributes.

namespace autopos::cgp {

/// Raised when a belief carries no mass to update.
class UnderflowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Equidistant cell decomposition of a rectangle. Cell (ix, iy) has linear
/// index iy * nx + ix and center (x_min + (ix + 0.5) * cell, y_min + (iy + 0.5) * cell).
class GridDomain {
 public:
  GridDomain() = default;

  GridDomain(double x_min, double y_min, std::size_t nx, std::size_t ny, double cell_size)
      : x_min_(x_min), y_min_(y_min), cell_(cell_size), nx_(nx), ny_(ny) {
    if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
      throw std::invalid_argument("grid cell_size must be > 0");
    }
    if (!std::isfinite(x_min) || !std::isfinite(y_min)) {
      throw std::invalid_argument("grid origin must be finite");
    }
    if (nx * ny < 2) {
      throw std::invalid_argument("grid needs at least two cells");
    }
  }

  /// Smallest grid with the given cell size covering [x_min, x_max] x [y_min, y_max].
  static GridDomain covering(double x_min, double x_max, double y_min, double y_max, double cell_size) {
    if (!(x_max > x_min) || !(y_max >= y_min)) {
      throw std::invalid_argument("grid bounds are empty");
    }
    const auto count = [cell_size](double span) {
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / cell_size - 1e-9)));
    };
    return {x_min, y_min, count(x_max - x_min), count(y_max - y_min), cell_size};
  }

  /// One row of cells along +x with centers at y = 0, starting at x = 0.
  static GridDomain positive_x_axis(double x_max, double cell_size) {
    if (!(x_max > 0.0)) {
      throw std::invalid_argument("axis extent must be > 0");
    }
    const auto nx =
        std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(x_max / cell_size - 1e-9)));
    return {0.0, -0.5 * cell_size, nx, 1, cell_size};
  }

  [[nodiscard]] double x_min() const { return x_min_; }
  [[nodiscard]] double y_min() const { return y_min_; }
  [[nodiscard]] double x_max() const { return x_min_ + static_cast<double>(nx_) * cell_; }
  [[nodiscard]] double y_max() const { return y_min_ + static_cast<double>(ny_) * cell_; }
  [[nodiscard]] double cell_size() const { return cell_; }
  [[nodiscard]] std::size_t nx() const { return nx_; }
  [[nodiscard]] std::size_t ny() const { return ny_; }
  [[nodiscard]] std::size_t size() const { return nx_ * ny_; }

  [[nodiscard]] double center_x(std::size_t ix) const {
    return x_min_ + (static_cast<double>(ix) + 0.5) * cell_;
  }
  [[nodiscard]] double center_y(std::size_t iy) const {
    return y_min_ + (static_cast<double>(iy) + 0.5) * cell_;
  }
  [[nodiscard]] NodePosition center(std::size_t m) const {
    return {center_x(m % nx_), center_y(m / nx_)};
  }

  friend bool operator==(const GridDomain&, const GridDomain&) = default;

 private:
  double x_min_{0.0};
  double y_min_{0.0};
  double cell_{1.0};
  std::size_t nx_{0};
  std::size_t ny_{0};
};

/// Discrete probability mass over a GridDomain.
class BeliefGrid {
 public:
  BeliefGrid() = default;
  BeliefGrid(GridDomain domain, std::vector<double> mass) : domain_(domain), mass_(std::move(mass)) {
    if (mass_.size() != domain_.size()) {
      throw std::invalid_argument("belief size does not match its domain");
    }
  }

  [[nodiscard]] const GridDomain& domain() const { return domain_; }
  [[nodiscard]] std::span<const double> mass() const { return mass_; }
  [[nodiscard]] std::span<double> mass() { return mass_; }
  [[nodiscard]] double operator[](std::size_t m) const { return mass_[m]; }

  [[nodiscard]] double total() const {
    double s = 0.0;
    for (double v : mass_) s += v;
    return s;
  }

  /// Rescales to unit total. Throws UnderflowError when there is nothing to rescale.
  void normalize() {
    const double s = total();
    if (!(s >= 1e-300) || !std::isfinite(s)) {
      throw UnderflowError("belief has no mass left to normalize");
    }
    const double inv = 1.0 / s;
    for (double& v : mass_) v *= inv;
  }

 private:
  GridDomain domain_;
  std::vector<double> mass_;
};

inline BeliefGrid init_uniform(const GridDomain& domain) {
  return {domain, std::vector<double>(domain.size(), 1.0 / static_cast<double>(domain.size()))};
}

namespace detail {

/// Normalized discrete Gaussian taps for offsets -radius..radius.
inline std::vector<double> gaussian_taps(double sigma_cells) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma_cells));
  std::vector<double> taps(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double v = std::exp(-0.5 * static_cast<double>(k * k) / (sigma_cells * sigma_cells));
    taps[static_cast<std::size_t>(k + radius)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

/// Half-sample symmetric reflection into [0, n).
inline std::size_t reflect(std::ptrdiff_t i, std::ptrdiff_t n) {
  while (i < 0 || i >= n) {
    i = i < 0 ? -i - 1 : 2 * n - i - 1;
  }
  return static_cast<std::size_t>(i);
}

}  // namespace detail

/// Static-node transition: isotropic Gaussian diffusion of `sigma_cells`
/// cells with mirrored borders, then renormalized. sigma_cells = 0 is the identity.
inline BeliefGrid predict(const BeliefGrid& prior, double sigma_cells) {
  if (!(sigma_cells >= 0.0)) {
    throw std::invalid_argument("prediction sigma must be >= 0");
  }
  if (sigma_cells == 0.0) {
    return prior;
  }
  const auto& dom = prior.domain();
  const auto nx = static_cast<std::ptrdiff_t>(dom.nx());
  const auto ny = static_cast<std::ptrdiff_t>(dom.ny());
  const auto taps = detail::gaussian_taps(sigma_cells);
  const auto radius = static_cast<std::ptrdiff_t>(taps.size() / 2);
  const auto in = prior.mass();

  std::vector<double> rows(in.size(), 0.0);
  for (std::ptrdiff_t iy = 0; iy < ny; ++iy) {
    for (std::ptrdiff_t ix = 0; ix < nx; ++ix) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] *
               in[static_cast<std::size_t>(iy * nx) + detail::reflect(ix + k, nx)];
      }
      rows[static_cast<std::size_t>(iy * nx + ix)] = acc;
    }
  }
  std::vector<double> out(in.size(), 0.0);
  for (std::ptrdiff_t iy = 0; iy < ny; ++iy) {
    for (std::ptrdiff_t ix = 0; ix < nx; ++ix) {
      double acc = 0.0;
      for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
        acc += taps[static_cast<std::size_t>(k + radius)] *
               rows[detail::reflect(iy + k, ny) * static_cast<std::size_t>(nx) +
                    static_cast<std::size_t>(ix)];
      }
      out[static_cast<std::size_t>(iy * nx + ix)] = acc;
    }
  }
  BeliefGrid res(dom, std::move(out));
  res.normalize();
  return res;
}

/// Inter-node range noise: sigma_r + sqrt(tr(origin_cov)) + sqrt(tr(peer_cov)).
/// A peer without an estimate yet contributes nothing.
inline double combined_sigma(const CovarianceMatrix2& origin_cov,
                             const std::optional<CovarianceMatrix2>& peer_cov, double sigma_r) {
  double s = sigma_r + std::sqrt(std::max(0.0, origin_cov.trace()));
  if (peer_cov) {
    s += std::sqrt(std::max(0.0, peer_cov->trace()));
  }
  return s;
}

struct GridObservation {
  NodeEstimate origin;
  double range{0.0};
  double sigma_combined{0.0};
};

/// Multiplies the belief by exp(log_likelihood) cell-wise and renormalizes.
/// Work happens in log space shifted by the maximum, so arbitrarily peaked
/// likelihoods do not underflow the surviving cells.
inline BeliefGrid apply_log_likelihood(const BeliefGrid& belief, std::span<const double> log_likelihood) {
  const auto prior = belief.mass();
  if (log_likelihood.size() != prior.size()) {
    throw std::invalid_argument("likelihood size does not match the belief");
  }
  std::vector<double> post(prior.size(), 0.0);
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; m < prior.size(); ++m) {
    if (prior[m] > 0.0) {
      post[m] = std::log(prior[m]) + log_likelihood[m];
      peak = std::max(peak, post[m]);
    }
  }
  if (!std::isfinite(peak)) {
    throw UnderflowError("belief has no support left for the observation");
  }
  for (std::size_t m = 0; m < prior.size(); ++m) {
    post[m] = prior[m] > 0.0 ? std::exp(post[m] - peak) : 0.0;
  }
  BeliefGrid res(belief.domain(), std::move(post));
  res.normalize();
  return res;
}

/// Log of the unnormalized Gaussian range likelihood, -y^2 / (2 sigma^2),
/// with y = |origin - X_m| - range.
inline std::vector<double> range_log_likelihood(const GridDomain& dom, const NodePosition& origin,
                                                double range, double sigma) {
  std::vector<double> ll(dom.size());
  const double k = -0.5 / (sigma * sigma);
  for (std::size_t iy = 0; iy < dom.ny(); ++iy) {
    const double dy = dom.center_y(iy) - origin.y;
    for (std::size_t ix = 0; ix < dom.nx(); ++ix) {
      const double dx = dom.center_x(ix) - origin.x;
      const double y = std::sqrt(dx * dx + dy * dy) - range;
      ll[iy * dom.nx() + ix] = k * y * y;
    }
  }
  return ll;
}

inline BeliefGrid update(const BeliefGrid& belief, const GridObservation& obs) {
  if (!(obs.sigma_combined > 0.0)) {
    throw std::invalid_argument("observation sigma must be > 0");
  }
  if (!std::isfinite(obs.range) || obs.range < 0.0) {
    throw std::invalid_argument("observation range must be finite and >= 0");
  }
  const auto ll = range_log_likelihood(belief.domain(), obs.origin.position, obs.range, obs.sigma_combined);
  return apply_log_likelihood(belief, ll);
}

/// Zeroes every cell whose center has y < 0 and renormalizes.
inline BeliefGrid restrict_to_upper_half_plane(const BeliefGrid& belief) {
  const auto& dom = belief.domain();
  std::vector<double> mass(belief.mass().begin(), belief.mass().end());
  for (std::size_t iy = 0; iy < dom.ny(); ++iy) {
    if (dom.center_y(iy) < 0.0) {
      std::fill_n(mass.begin() + static_cast<std::ptrdiff_t>(iy * dom.nx()), dom.nx(), 0.0);
    }
  }
  BeliefGrid res(dom, std::move(mass));
  res.normalize();
  return res;
}

/// Maximum a-posteriori cell (ties resolve to the lowest linear index) and
/// the belief-weighted spread of the cells around that cell.
inline NodeEstimate estimate(const BeliefGrid& belief, NodeId node = {}) {
  const auto mass = belief.mass();
  const auto best = static_cast<std::size_t>(std::max_element(mass.begin(), mass.end()) - mass.begin());
  const auto& dom = belief.domain();
  const NodePosition x_hat = dom.center(best);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t iy = 0; iy < dom.ny(); ++iy) {
    const double dy = dom.center_y(iy) - x_hat.y;
    for (std::size_t ix = 0; ix < dom.nx(); ++ix) {
      const double p = mass[iy * dom.nx() + ix];
      if (p == 0.0) continue;
      const double dx = dom.center_x(ix) - x_hat.x;
      sxx += p * dx * dx;
      sxy += p * dx * dy;
      syy += p * dy * dy;
    }
  }
  // Clip rounding so the PSD check in CovarianceMatrix2 cannot trip on a
  // numerically rank-deficient belief.
  const double lim = std::sqrt(sxx * syy);
  sxy = std::clamp(sxy, -lim, lim);
  return {node, x_hat, CovarianceMatrix2(sxx, sxy, syy), true};
}

/// 1-D filter for A1 on the positive x-axis given its range to A0.
inline BeliefGrid a1_axis_update(const BeliefGrid& prior, double range_to_a0, double sigma_r) {
  return update(prior, GridObservation{NodeEstimate{NodeId{0}, {0.0, 0.0}, {}, true}, range_to_a0, sigma_r});
}

inline NodeEstimate estimate_a1_1d(double range_to_a0, double sigma_r, double x_max, double cell_size) {
  const auto dom = GridDomain::positive_x_axis(x_max, cell_size);
  return estimate(a1_axis_update(init_uniform(dom), range_to_a0, sigma_r), NodeId{1});
}

inline NodeEstimate estimate_a1_1d(std::optional<double> range_to_a0, double sigma_r, double x_max,
                                   double cell_size) {
  if (!range_to_a0) {
    return NodeEstimate::invalid(NodeId{1});
  }
  return estimate_a1_1d(*range_to_a0, sigma_r, x_max, cell_size);
}

/// Indirect A1 likelihood along the axis when the A0-A1 range is missing.
///
/// Every node k >= 2 that ranged both A0 and A1 constrains the axis through
/// its unknown position: L(x1) = sum_p N(|p| - r0k) N(|p - (x1, 0)| - r1k),
/// summed over the upper half of `plane` (the reflection is symmetric).
/// On its own that only bounds x1 to an interval, so every pair (k, l) of
/// such nodes with a mutual range adds a consistency term: both are placed
/// by circle intersection for the candidate x1 and their distance is scored
/// against r_kl, summing over the two relative mirror configurations.
/// Returns false when no node provides both ranges.
inline bool a1_indirect_log_likelihood(const MeasurementMatrix& matrix, const GridDomain& axis,
                                       const GridDomain& plane, double sigma_r,
                                       std::vector<double>& out) {
  out.assign(axis.size(), 0.0);
  bool any = false;
  const double k = -0.5 / (sigma_r * sigma_r);
  // Positions with log-weight below this relative to the ring peak contribute nothing.
  constexpr double kCutoff = -40.0;
  std::vector<NodePosition> ring;
  std::vector<double> ring_ll;
  std::vector<double> terms;
  for (std::size_t node = 2; node < matrix.node_count(); ++node) {
    const auto r0 = matrix.pair_range(0, node);
    const auto r1 = matrix.pair_range(1, node);
    if (!r0 || !r1) continue;
    ring.clear();
    ring_ll.clear();
    for (std::size_t m = 0; m < plane.size(); ++m) {
      const NodePosition p = plane.center(m);
      if (p.y < 0.0) continue;
      const double y = std::hypot(p.x, p.y) - *r0;
      const double l = k * y * y;
      if (l > kCutoff) {
        ring.push_back(p);
        ring_ll.push_back(l);
      }
    }
    if (ring.empty()) continue;
    any = true;
    terms.resize(ring.size());
    for (std::size_t ix = 0; ix < axis.size(); ++ix) {
      const double x1 = axis.center_x(ix);
      double peak = -std::numeric_limits<double>::infinity();
      for (std::size_t q = 0; q < ring.size(); ++q) {
        const double y = std::hypot(ring[q].x - x1, ring[q].y) - *r1;
        terms[q] = ring_ll[q] + k * y * y;
        peak = std::max(peak, terms[q]);
      }
      double s = 0.0;
      for (double t : terms) s += std::exp(t - peak);
      out[ix] += peak + std::log(s);
    }
  }

  struct Placed {
    std::size_t node;
    double r0;
    double r1;
  };
  std::vector<Placed> placed;
  for (std::size_t node = 2; node < matrix.node_count(); ++node) {
    const auto r0 = matrix.pair_range(0, node);
    const auto r1 = matrix.pair_range(1, node);
    if (r0 && r1) placed.push_back({node, *r0, *r1});
  }
  // Intersection points carry roughly twice the range noise.
  const double kp = k / 4.0;
  std::vector<NodePosition> pos(placed.size());
  for (std::size_t ix = 0; ix < axis.size(); ++ix) {
    const double x1 = axis.center_x(ix);
    for (std::size_t a = 0; a < placed.size(); ++a) {
      const double px = (placed[a].r0 * placed[a].r0 - placed[a].r1 * placed[a].r1 + x1 * x1) / (2.0 * x1);
      pos[a] = {px, std::sqrt(std::max(0.0, placed[a].r0 * placed[a].r0 - px * px))};
    }
    for (std::size_t a = 0; a < placed.size(); ++a) {
      for (std::size_t b = a + 1; b < placed.size(); ++b) {
        const auto rab = matrix.pair_range(placed[a].node, placed[b].node);
        if (!rab) continue;
        const double same = std::hypot(pos[a].x - pos[b].x, pos[a].y - pos[b].y) - *rab;
        const double flip = std::hypot(pos[a].x - pos[b].x, pos[a].y + pos[b].y) - *rab;
        const double ls = kp * same * same;
        const double lf = kp * flip * flip;
        const double top = std::max(ls, lf);
        out[ix] += top + std::log(std::exp(ls - top) + std::exp(lf - top));
      }
    }
  }
  return any;
}

struct CgpConfig {
  double sigma_r{0.9};
  double cell_size{0.1};
  double margin{5.0};
  double axis_cell_size{0.01};  ///< resolution of the 1-D A1 filter
  double sigma_pred_cells{1.0};
  bool carry_beliefs{false};
};

/// Grid over the constellation's bounding box (gauge frame) plus a margin.
inline GridDomain default_domain(std::span<const NodePosition> gauge_positions, double cell_size,
                                 double margin) {
  if (gauge_positions.empty()) {
    throw std::invalid_argument("cannot size a grid without positions");
  }
  double x0 = gauge_positions[0].x, x1 = x0, y0 = gauge_positions[0].y, y1 = y0;
  for (const auto& p : gauge_positions) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  return GridDomain::covering(x0 - margin, x1 + margin, y0 - margin, y1 + margin, cell_size);
}

/// Node-by-node CGP over one epoch, optionally carrying beliefs to the next.
class CgpPipeline {
 public:
  CgpPipeline(CgpConfig config, GridDomain plane, std::size_t node_count)
      : config_(config),
        plane_(plane),
        axis_(GridDomain::positive_x_axis(plane.x_max(), std::min(config.axis_cell_size, plane.cell_size()))),
        beliefs_(node_count),
        previous_(node_count) {
    if (node_count < 3) {
      throw std::invalid_argument("CGP needs at least 3 nodes");
    }
    if (!(config_.sigma_r > 0.0)) {
      throw std::invalid_argument("sigma_r must be > 0");
    }
  }

  [[nodiscard]] const GridDomain& plane() const { return plane_; }
  [[nodiscard]] const GridDomain& axis() const { return axis_; }

  /// Latest posterior of a node, empty for A0 and for nodes never estimated.
  [[nodiscard]] const std::optional<BeliefGrid>& belief(std::size_t node) const { return beliefs_.at(node); }

  /// Times a node belief had to be rebuilt from a uniform prior after losing all mass.
  [[nodiscard]] std::size_t reinitializations() const { return reinitializations_; }

  std::vector<NodeEstimate> process(const MeasurementMatrix& matrix) {
    const std::size_t n = beliefs_.size();
    if (matrix.node_count() != n) {
      throw std::invalid_argument("measurement matrix does not match the pipeline size");
    }
    std::vector<NodeEstimate> est;
    est.reserve(n);
    est.push_back(NodeEstimate{NodeId{0}, {0.0, 0.0}, CovarianceMatrix2::zero(), true});
    est.push_back(process_a1(matrix));

    for (std::size_t node = 2; node < n; ++node) {
      const bool carried = config_.carry_beliefs && beliefs_[node].has_value();
      const auto fresh = [&] {
        auto b = init_uniform(plane_);
        return node == 2 ? restrict_to_upper_half_plane(b) : b;
      };
      BeliefGrid b = carried ? predict(*beliefs_[node], config_.sigma_pred_cells) : fresh();
      if (node == 2 && carried) {
        b = restrict_to_upper_half_plane(b);
      }
      std::optional<CovarianceMatrix2> peer;
      if (carried && previous_[node].valid) {
        peer = previous_[node].covariance;
      }

      std::size_t used = 0;
      for (std::size_t k = 0; k < node; ++k) {
        const auto r = matrix.pair_range(k, node);
        if (!est[k].valid || !r) continue;
        const GridObservation obs{est[k], *r, combined_sigma(est[k].covariance, peer, config_.sigma_r)};
        try {
          b = update(b, obs);
        } catch (const UnderflowError&) {
          ++reinitializations_;
          b = update(fresh(), obs);
        }
        ++used;
      }
      if (used == 0 && !carried) {
        est.push_back(NodeEstimate::invalid(NodeId{node}));
        continue;
      }
      est.push_back(estimate(b, NodeId{node}));
      beliefs_[node] = std::move(b);
    }
    previous_ = est;
    return est;
  }

 private:
  NodeEstimate process_a1(const MeasurementMatrix& matrix) {
    const bool carried = config_.carry_beliefs && beliefs_[1].has_value();
    BeliefGrid b = carried ? predict(*beliefs_[1], config_.sigma_pred_cells) : init_uniform(axis_);
    if (const auto r = matrix.pair_range(0, 1)) {
      b = a1_axis_update(b, *r, config_.sigma_r);
    } else if (!carried) {
      // Evaluated at plane resolution and interpolated onto the finer axis.
      const auto coarse = GridDomain::positive_x_axis(plane_.x_max(), plane_.cell_size());
      std::vector<double> coarse_ll;
      if (!a1_indirect_log_likelihood(matrix, coarse, plane_, config_.sigma_r, coarse_ll)) {
        return NodeEstimate::invalid(NodeId{1});
      }
      std::vector<double> ll(axis_.size());
      for (std::size_t i = 0; i < axis_.size(); ++i) {
        const double u = axis_.center_x(i) / coarse.cell_size() - 0.5;
        const double c = std::clamp(u, 0.0, static_cast<double>(coarse.size() - 1));
        const auto lo = std::min(static_cast<std::size_t>(c), coarse.size() - 2);
        const double w = c - static_cast<double>(lo);
        ll[i] = (1.0 - w) * coarse_ll[lo] + w * coarse_ll[lo + 1];
      }
      b = apply_log_likelihood(b, ll);
    }
    auto e = estimate(b, NodeId{1});
    beliefs_[1] = std::move(b);
    return e;
  }

  CgpConfig config_;
  GridDomain plane_;
  GridDomain axis_;
  std::vector<std::optional<BeliefGrid>> beliefs_;
  std::vector<NodeEstimate> previous_;
  std::size_t reinitializations_{0};
};

/// Stateless single-epoch CGP.
inline std::vector<NodeEstimate> cgp_autoposition(const MeasurementMatrix& matrix, const CgpConfig& config,
                                                  const GridDomain& plane) {
  CgpConfig c = config;
  c.carry_beliefs = false;
  CgpPipeline pipeline(c, plane, matrix.node_count());
  return pipeline.process(matrix);
}

}  // namespace autopos::cgp

#endif  // AUTOPOS_CGP_HPP_
