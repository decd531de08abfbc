#ifndef AUTOPOS_EVAL_HPP_
#define AUTOPOS_EVAL_HPP_

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string_view>
#include <utility>
#include <vector>

#include "autopos/core.hpp"

namespace autopos::eval {

enum class Method { kCf, kCgp };

inline std::string_view to_string(Method m) { return m == Method::kCf ? "CF" : "CGP"; }

/// Re-expresses ground truth in the estimator gauge: node 0 at the origin,
/// node 1 on the positive x-axis, node 2 in the upper half-plane.
inline std::vector<NodePosition> gauge_frame(std::span<const NodePosition> truth) {
  if (truth.size() < 2) {
    throw std::invalid_argument("gauge frame needs at least two nodes");
  }
  const NodePosition o = truth[0];
  const double angle = std::atan2(truth[1].y - o.y, truth[1].x - o.x);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  std::vector<NodePosition> out;
  out.reserve(truth.size());
  for (const auto& p : truth) {
    const double dx = p.x - o.x;
    const double dy = p.y - o.y;
    out.push_back({c * dx + s * dy, -s * dx + c * dy});
  }
  // Exact by construction, not up to rounding.
  out[0] = {0.0, 0.0};
  out[1].y = 0.0;
  if (out.size() > 2 && out[2].y < 0.0) {
    for (auto& p : out) p.y = -p.y;
  }
  return out;
}

struct AlignedEpoch {
  std::vector<NodePosition> truth;  ///< gauge-frame truth
  bool aligned{false};              ///< false when the estimator produced no frame
};

/// Pairs one epoch's estimates with truth in their gauge. Without a valid A1
/// the estimator's frame is undefined and nothing in the epoch is comparable.
inline AlignedEpoch align_frame(std::span<const NodeEstimate> estimates, std::span<const NodePosition> truth) {
  if (estimates.size() != truth.size()) {
    throw std::invalid_argument("estimate and truth counts differ");
  }
  AlignedEpoch out;
  out.truth = gauge_frame(truth);
  out.aligned = estimates.size() >= 2 && estimates[0].valid && estimates[1].valid;
  return out;
}

struct ErrorSample {
  std::size_t epoch{0};
  std::size_t node{0};
  Method method{Method::kCf};
  double position_error{0.0};
  bool success{false};
};

inline std::vector<ErrorSample> error_samples(std::size_t epoch, Method method,
                                              std::span<const NodeEstimate> estimates,
                                              std::span<const NodePosition> truth) {
  const AlignedEpoch a = align_frame(estimates, truth);
  std::vector<ErrorSample> out;
  out.reserve(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    ErrorSample s{epoch, i, method, 0.0, false};
    if (a.aligned && estimates[i].valid) {
      s.success = true;
      s.position_error = euclidean_distance(estimates[i].position, a.truth[i]);
    }
    out.push_back(s);
  }
  return out;
}

/// Nearest-rank percentile of an ascending sample: value at rank ceil(p * n).
inline double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) {
    throw std::invalid_argument("percentile of an empty sample");
  }
  const auto n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline constexpr double kOneSigma = 0.6827;
inline constexpr double kTwoSigma = 0.9545;
inline constexpr double kThreeSigma = 0.9973;

struct EvalReport {
  std::optional<double> rmse;  ///< empty when nothing succeeded
  std::optional<double> q1;
  std::optional<double> q2;
  std::optional<double> q3;
  double success_rate{0.0};        ///< successful / attempted node estimates
  double epoch_success_rate{0.0};  ///< epochs where every node succeeded
  std::size_t attempted{0};
  std::size_t successful{0};
  std::vector<std::pair<double, double>> ecdf;  ///< (error_m, cumulative fraction)
};

inline EvalReport compute_report(std::span<const ErrorSample> samples) {
  if (samples.empty()) {
    throw std::invalid_argument("cannot report on an empty sample list");
  }
  EvalReport r;
  std::vector<double> errors;
  std::map<std::size_t, bool> epoch_ok;
  for (const auto& s : samples) {
    ++r.attempted;
    auto [it, inserted] = epoch_ok.emplace(s.epoch, true);
    it->second = it->second && s.success;
    if (s.success) {
      errors.push_back(s.position_error);
    }
  }
  r.successful = errors.size();
  r.success_rate = static_cast<double>(r.successful) / static_cast<double>(r.attempted);
  const auto good_epochs = std::count_if(epoch_ok.begin(), epoch_ok.end(), [](const auto& e) { return e.second; });
  r.epoch_success_rate = static_cast<double>(good_epochs) / static_cast<double>(epoch_ok.size());
  if (errors.empty()) {
    return r;
  }

  std::sort(errors.begin(), errors.end());
  double sq = 0.0;
  for (double e : errors) sq += e * e;
  r.rmse = std::sqrt(sq / static_cast<double>(errors.size()));
  r.q1 = nearest_rank(errors, kOneSigma);
  r.q2 = nearest_rank(errors, kTwoSigma);
  r.q3 = nearest_rank(errors, kThreeSigma);

  r.ecdf.reserve(errors.size());
  const auto n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    r.ecdf.emplace_back(errors[i], static_cast<double>(i + 1) / n);
  }
  return r;
}

}  // namespace autopos::eval

#endif  // AUTOPOS_EVAL_HPP_
