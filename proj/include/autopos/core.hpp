#ifndef AUTOPOS_CORE_HPP_
#define AUTOPOS_CORE_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace autopos {

/// Index of a network node. Node 0 is the frame origin.
struct NodeId {
  std::size_t index{0};

  friend constexpr bool operator==(NodeId, NodeId) = default;
  friend constexpr auto operator<=>(NodeId, NodeId) = default;
};

/// 2-D position in the local frame, meters.
struct NodePosition {
  double x{0.0};
  double y{0.0};

  friend constexpr bool operator==(const NodePosition&, const NodePosition&) = default;

  [[nodiscard]] bool is_finite() const { return std::isfinite(x) && std::isfinite(y); }
};

inline double euclidean_distance(const NodePosition& a, const NodePosition& b) {
  return std::hypot(a.x - b.x, a.y - b.y);
}

/// Symmetric positive semidefinite 2x2 matrix (m^2).
class CovarianceMatrix2 {
 public:
  static constexpr double kPsdTolerance = 1e-12;

  CovarianceMatrix2() = default;

  CovarianceMatrix2(double xx, double xy, double yy) : xx_(xx), xy_(xy), yy_(yy) {
    if (!std::isfinite(xx) || !std::isfinite(xy) || !std::isfinite(yy)) {
      throw std::invalid_argument("covariance entries must be finite");
    }
    if (min_eigenvalue() < -kPsdTolerance * std::max(1.0, xx + yy)) {
      throw std::invalid_argument("covariance must be positive semidefinite");
    }
  }

  static CovarianceMatrix2 diagonal(double xx, double yy) { return {xx, 0.0, yy}; }
  static CovarianceMatrix2 zero() { return {}; }

  [[nodiscard]] double xx() const { return xx_; }
  [[nodiscard]] double xy() const { return xy_; }
  [[nodiscard]] double yx() const { return xy_; }
  [[nodiscard]] double yy() const { return yy_; }

  [[nodiscard]] double trace() const { return xx_ + yy_; }

  [[nodiscard]] double min_eigenvalue() const {
    const double mean = 0.5 * (xx_ + yy_);
    const double half_diff = 0.5 * (xx_ - yy_);
    return mean - std::hypot(half_diff, xy_);
  }

  friend bool operator==(const CovarianceMatrix2&, const CovarianceMatrix2&) = default;

 private:
  // Stored once; symmetry holds by construction.
  double xx_{0.0};
  double xy_{0.0};
  double yy_{0.0};
};

inline double trace(const CovarianceMatrix2& c) { return c.trace(); }

/// Ground-truth node layout.
class Constellation {
 public:
  Constellation() = default;

  explicit Constellation(std::vector<NodePosition> positions) : positions_(std::move(positions)) {
    if (positions_.empty()) {
      throw std::invalid_argument("constellation must contain at least one node");
    }
    for (std::size_t i = 0; i < positions_.size(); ++i) {
      if (!positions_[i].is_finite()) {
        throw std::invalid_argument("constellation node " + std::to_string(i) + " is not finite");
      }
      for (std::size_t j = i + 1; j < positions_.size(); ++j) {
        if (!(euclidean_distance(positions_[i], positions_[j]) > 0.0)) {
          throw std::invalid_argument("constellation nodes " + std::to_string(i) + " and " +
                                      std::to_string(j) + " coincide");
        }
      }
    }
  }

  [[nodiscard]] std::size_t size() const { return positions_.size(); }
  [[nodiscard]] const NodePosition& operator[](std::size_t i) const { return positions_[i]; }
  [[nodiscard]] const std::vector<NodePosition>& positions() const { return positions_; }

  [[nodiscard]] double distance(std::size_t i, std::size_t j) const {
    return euclidean_distance(positions_[i], positions_[j]);
  }

 private:
  std::vector<NodePosition> positions_;
};

/// Simulator ground-truth label; estimators never read it.
enum class ErrorClass { kLos, kNlos, kOutlier, kFailed };

inline std::string_view to_string(ErrorClass c) {
  switch (c) {
    case ErrorClass::kLos:
      return "LOS";
    case ErrorClass::kNlos:
      return "NLOS";
    case ErrorClass::kOutlier:
      return "OUTLIER";
    case ErrorClass::kFailed:
      return "FAILED";
  }
  return "?";
}

/// Range value plus its class. `range` is empty exactly when the class is kFailed.
struct RangeDraw {
  std::optional<double> range;
  ErrorClass error_class{ErrorClass::kFailed};

  static RangeDraw failed() { return {std::nullopt, ErrorClass::kFailed}; }
  [[nodiscard]] bool is_failed() const { return !range.has_value(); }
};

struct RangingMeasurement {
  NodeId from;
  NodeId to;
  RangeDraw value;

  [[nodiscard]] bool is_failed() const { return value.is_failed(); }
};

/// Directed pair-wise ranges for one epoch. Entry (i, j) is the measurement
/// node i took of node j; (i, j) and (j, i) are independent.
class MeasurementMatrix {
 public:
  MeasurementMatrix() = default;
  MeasurementMatrix(std::size_t epoch, std::size_t node_count)
      : epoch_(epoch), n_(node_count), entries_(node_count * node_count) {}

  [[nodiscard]] std::size_t epoch() const { return epoch_; }
  [[nodiscard]] std::size_t node_count() const { return n_; }

  void set(std::size_t from, std::size_t to, RangeDraw value) {
    check_pair(from, to);
    entries_[from * n_ + to] = RangingMeasurement{NodeId{from}, NodeId{to}, value};
  }

  void clear(std::size_t from, std::size_t to) {
    check_pair(from, to);
    entries_[from * n_ + to].reset();
  }

  [[nodiscard]] const std::optional<RangingMeasurement>& at(std::size_t from, std::size_t to) const {
    static const std::optional<RangingMeasurement> kAbsent;
    if (from >= n_ || to >= n_ || from == to) {
      return kAbsent;
    }
    return entries_[from * n_ + to];
  }

  /// Range of the directed entry, empty when absent or failed.
  [[nodiscard]] std::optional<double> directed_range(std::size_t from, std::size_t to) const {
    const auto& e = at(from, to);
    if (!e || e->is_failed()) {
      return std::nullopt;
    }
    return e->value.range;
  }

  /// Scalar pair range: mean of both directions when both exist, else the one present.
  [[nodiscard]] std::optional<double> pair_range(std::size_t i, std::size_t j) const {
    const auto a = directed_range(i, j);
    const auto b = directed_range(j, i);
    if (a && b) {
      return 0.5 * (*a + *b);
    }
    return a ? a : b;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& e : entries_) {
      if (e) {
        fn(*e);
      }
    }
  }

 private:
  void check_pair(std::size_t from, std::size_t to) const {
    if (from >= n_ || to >= n_) {
      throw std::out_of_range("measurement index out of range");
    }
    if (from == to) {
      throw std::invalid_argument("self-measurement is not allowed");
    }
  }

  std::size_t epoch_{0};
  std::size_t n_{0};
  std::vector<std::optional<RangingMeasurement>> entries_;
};

struct NodeEstimate {
  NodeId node;
  NodePosition position;
  CovarianceMatrix2 covariance;
  bool valid{false};

  static NodeEstimate invalid(NodeId id) { return {id, {}, {}, false}; }
};

}  // namespace autopos

#endif  // AUTOPOS_CORE_HPP_
