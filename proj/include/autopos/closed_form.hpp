#ifndef AUTOPOS_CLOSED_FORM_HPP_
#define AUTOPOS_CLOSED_FORM_HPP_

#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "autopos/core.hpp"

namespace autopos::cf {

enum class FailureReason {
  kNone,
  kMissingRange,
  kNegativeDiscriminant,
  kDegenerateGeometry,
  kInsufficientRanges,
};

inline std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::kNone:
      return "NONE";
    case FailureReason::kMissingRange:
      return "MISSING_RANGE";
    case FailureReason::kNegativeDiscriminant:
      return "NEGATIVE_DISCRIMINANT";
    case FailureReason::kDegenerateGeometry:
      return "DEGENERATE_GEOMETRY";
    case FailureReason::kInsufficientRanges:
      return "INSUFFICIENT_RANGES";
  }
  return "?";
}

/// Either a position or the reason none could be produced.
struct Placement {
  std::optional<NodePosition> position;
  FailureReason reason{FailureReason::kNone};

  [[nodiscard]] bool ok() const { return position.has_value(); }
};

struct FrameAnchors {
  Placement a0;
  Placement a1;
  Placement a2;
};

/// Gauge-defining triangle: A0 at the origin, A1 on +x, A2 in the upper half-plane.
inline FrameAnchors place_frame_anchors(double d01, double d02, double d12) {
  FrameAnchors out;
  out.a0.position = NodePosition{0.0, 0.0};
  if (!(d01 > 0.0)) {
    out.a1.reason = FailureReason::kDegenerateGeometry;
    out.a2.reason = FailureReason::kDegenerateGeometry;
    return out;
  }
  const double x1 = d01;
  out.a1.position = NodePosition{x1, 0.0};

  const double x2 = (d02 * d02 - d12 * d12 + x1 * x1) / (2.0 * x1);
  const double disc = d02 * d02 - x2 * x2;
  if (disc < 0.0) {
    out.a2.reason = FailureReason::kNegativeDiscriminant;
    return out;
  }
  out.a2.position = NodePosition{x2, std::sqrt(disc)};
  return out;
}

struct LseOptions {
  double step_tolerance{1e-6};
  int max_iterations{50};
  double max_condition{1e8};
};

/// Gauss-Newton minimizer of sum_k (|X - A_k| - r_k)^2, started at the centroid of A_k.
inline Placement trilaterate_lse(std::span<const NodePosition> anchors, std::span<const double> ranges,
                                 const LseOptions& opt = {}) {
  if (anchors.size() != ranges.size()) {
    throw std::invalid_argument("anchors and ranges must have equal length");
  }
  if (anchors.size() < 3) {
    return {std::nullopt, FailureReason::kInsufficientRanges};
  }

  NodePosition x{0.0, 0.0};
  for (const auto& a : anchors) {
    x.x += a.x;
    x.y += a.y;
  }
  x.x /= static_cast<double>(anchors.size());
  x.y /= static_cast<double>(anchors.size());

  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    // Normal equations (J^T J) dx = -J^T f
    double h00 = 0.0, h01 = 0.0, h11 = 0.0, g0 = 0.0, g1 = 0.0;
    for (std::size_t k = 0; k < anchors.size(); ++k) {
      double dx = x.x - anchors[k].x;
      double dy = x.y - anchors[k].y;
      double dist = std::hypot(dx, dy);
      if (dist < 1e-12) {
        // Iterate sits on an anchor; the gradient direction is undefined there.
        dx = 1e-9;
        dy = 1e-9;
        dist = std::hypot(dx, dy);
      }
      const double jx = dx / dist;
      const double jy = dy / dist;
      const double f = dist - ranges[k];
      h00 += jx * jx;
      h01 += jx * jy;
      h11 += jy * jy;
      g0 += jx * f;
      g1 += jy * f;
    }
    const double mean = 0.5 * (h00 + h11);
    const double spread = std::hypot(0.5 * (h00 - h11), h01);
    const double lmax = mean + spread;
    const double lmin = mean - spread;
    if (!(lmin > 0.0) || lmax / lmin > opt.max_condition) {
      return {std::nullopt, FailureReason::kDegenerateGeometry};
    }
    const double det = h00 * h11 - h01 * h01;
    const double sx = -(h11 * g0 - h01 * g1) / det;
    const double sy = -(-h01 * g0 + h00 * g1) / det;
    x.x += sx;
    x.y += sy;
    if (!x.is_finite()) {
      return {std::nullopt, FailureReason::kDegenerateGeometry};
    }
    if (std::hypot(sx, sy) < opt.step_tolerance) {
      return {x, FailureReason::kNone};
    }
  }
  return {std::nullopt, FailureReason::kDegenerateGeometry};
}

inline Placement trilaterate_lse(std::span<const NodeEstimate> known, std::span<const double> ranges,
                                 const LseOptions& opt = {}) {
  std::vector<NodePosition> anchors;
  std::vector<double> r;
  if (known.size() != ranges.size()) {
    throw std::invalid_argument("anchors and ranges must have equal length");
  }
  for (std::size_t k = 0; k < known.size(); ++k) {
    if (known[k].valid) {
      anchors.push_back(known[k].position);
      r.push_back(ranges[k]);
    }
  }
  return trilaterate_lse(std::span<const NodePosition>(anchors), std::span<const double>(r), opt);
}

struct CfResult {
  std::vector<NodeEstimate> estimates;
  std::vector<FailureReason> reasons;  ///< per node, kNone when valid

  [[nodiscard]] bool success() const {
    for (const auto& e : estimates) {
      if (!e.valid) return false;
    }
    return !estimates.empty();
  }

  /// First non-kNone reason in node order.
  [[nodiscard]] FailureReason failure_reason() const {
    for (auto r : reasons) {
      if (r != FailureReason::kNone) return r;
    }
    return FailureReason::kNone;
  }
};

/// Baseline closed-form auto-positioning of one epoch.
///
/// A node n > 2 requires the ranges to A0 and A1 (the classical availability
/// condition) and is then placed by least squares from every valid earlier
/// node with an available range.
inline CfResult cf_autoposition(const MeasurementMatrix& matrix, const LseOptions& opt = {}) {
  const std::size_t n = matrix.node_count();
  if (n < 3) {
    throw std::invalid_argument("closed-form positioning needs at least 3 nodes");
  }
  CfResult res;
  res.estimates.reserve(n);
  res.reasons.assign(n, FailureReason::kNone);
  for (std::size_t i = 0; i < n; ++i) {
    res.estimates.push_back(NodeEstimate::invalid(NodeId{i}));
  }
  const auto fail_from = [&](std::size_t first, FailureReason why) {
    for (std::size_t i = first; i < n; ++i) res.reasons[i] = why;
  };

  // A0 and A1 define the frame together; without A1 nothing is expressible.
  const auto d01 = matrix.pair_range(0, 1);
  if (!d01) {
    fail_from(0, FailureReason::kMissingRange);
    return res;
  }
  const auto d02 = matrix.pair_range(0, 2);
  const auto d12 = matrix.pair_range(1, 2);
  const FrameAnchors frame = place_frame_anchors(*d01, d02.value_or(0.0), d12.value_or(0.0));
  if (!frame.a1.ok()) {
    fail_from(0, frame.a1.reason);
    return res;
  }
  res.estimates[0].position = *frame.a0.position;
  res.estimates[0].valid = true;
  res.estimates[1].position = *frame.a1.position;
  res.estimates[1].valid = true;
  if (!d02 || !d12) {
    res.reasons[2] = FailureReason::kMissingRange;
  } else if (!frame.a2.ok()) {
    res.reasons[2] = frame.a2.reason;
  } else {
    res.estimates[2].position = *frame.a2.position;
    res.estimates[2].valid = true;
  }

  std::vector<NodePosition> anchors;
  std::vector<double> ranges;
  for (std::size_t node = 3; node < n; ++node) {
    if (!matrix.pair_range(0, node) || !matrix.pair_range(1, node)) {
      res.reasons[node] = FailureReason::kMissingRange;
      continue;
    }
    anchors.clear();
    ranges.clear();
    for (std::size_t k = 0; k < node; ++k) {
      const auto r = matrix.pair_range(k, node);
      if (res.estimates[k].valid && r) {
        anchors.push_back(res.estimates[k].position);
        ranges.push_back(*r);
      }
    }
    const Placement p = trilaterate_lse(std::span<const NodePosition>(anchors),
                                        std::span<const double>(ranges), opt);
    if (!p.ok()) {
      res.reasons[node] = p.reason;
      continue;
    }
    res.estimates[node].position = *p.position;
    res.estimates[node].valid = true;
  }
  return res;
}

}  // namespace autopos::cf

#endif  // AUTOPOS_CLOSED_FORM_HPP_
