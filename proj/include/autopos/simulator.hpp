#ifndef AUTOPOS_SIMULATOR_HPP_
#define AUTOPOS_SIMULATOR_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>

#include "autopos/core.hpp"

namespace autopos {

/// Semi-empirical UWB ranging error model.
///
/// A range is r = d + e. Availability is a Bernoulli draw that fails with
/// probability d / d_max. The error e is then multipath (lognormal, positive),
/// outlier (uniform on [-d, d_max - d]) or hardware noise (zero-mean normal).
struct RangingModelParams {
  double sigma_r{0.9};    ///< LOS noise standard deviation [m]
  double d_max{100.0};    ///< empirical maximum range [m]
  double p_out{0.0};      ///< outlier probability
  double mp_mean{0.8};    ///< lognormal log-space mean
  double mp_sigma{1.07};  ///< lognormal log-space standard deviation
  bool nlos_enabled{true};
  bool failures_enabled{true};
  std::uint64_t seed{0};

  void validate() const {
    if (!(sigma_r > 0.0)) throw std::invalid_argument("sigma_r must be > 0");
    if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be > 0");
    if (!(p_out >= 0.0 && p_out <= 1.0)) throw std::invalid_argument("p_out must lie in [0, 1]");
    if (!(mp_sigma > 0.0)) throw std::invalid_argument("mp_sigma must be > 0");
    if (!std::isfinite(mp_mean)) throw std::invalid_argument("mp_mean must be finite");
  }
};

/// Multipath branch threshold: the branch is entered when p_eps exceeds it.
inline double multipath_threshold(double true_distance, double d_max) {
  return 0.8 - 0.3 * true_distance / d_max;
}

/// Error branch chosen for a given classification draw. Branches are tested
/// in the order multipath, outlier, LOS; a multipath draw that is not below
/// the true distance falls through to the later tests.
///
/// `multipath_draw` is only consulted when the multipath test passes.
inline ErrorClass select_error_branch(double true_distance, const RangingModelParams& params,
                                      double p_eps, double multipath_draw) {
  if (params.nlos_enabled && p_eps > multipath_threshold(true_distance, params.d_max) &&
      multipath_draw < true_distance) {
    return ErrorClass::kNlos;
  }
  if (p_eps < params.p_out) {
    return ErrorClass::kOutlier;
  }
  return ErrorClass::kLos;
}

/// Two-stage draw of one directed measurement.
template <typename Rng>
RangeDraw draw_measurement(double true_distance, const RangingModelParams& params, Rng& rng) {
  if (!(true_distance > 0.0)) {
    throw std::invalid_argument("true distance must be > 0");
  }
  if (true_distance >= params.d_max) {
    return RangeDraw::failed();
  }

  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (params.failures_enabled) {
    const double p = unit(rng);
    if (p <= true_distance / params.d_max) {
      return RangeDraw::failed();
    }
  }

  const double p_eps = unit(rng);
  double multipath = 0.0;
  if (params.nlos_enabled && p_eps > multipath_threshold(true_distance, params.d_max)) {
    multipath = std::lognormal_distribution<double>(params.mp_mean, params.mp_sigma)(rng);
  }

  const ErrorClass cls = select_error_branch(true_distance, params, p_eps, multipath);
  double error = 0.0;
  switch (cls) {
    case ErrorClass::kNlos:
      error = multipath;
      break;
    case ErrorClass::kOutlier:
      error = std::uniform_real_distribution<double>(-true_distance,
                                                     params.d_max - true_distance)(rng);
      break;
    default:
      error = std::normal_distribution<double>(0.0, params.sigma_r)(rng);
      break;
  }
  return RangeDraw{std::max(0.0, true_distance + error), cls};
}

/// Random stream owned by one epoch; depends only on (seed, epoch).
inline std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch) {
  const auto e = static_cast<std::uint64_t>(epoch);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(e >> 32),
                    0x5eedu};
  return std::mt19937_64(seq);
}

/// One draw per ordered pair (i != j), row-major.
inline MeasurementMatrix simulate_epoch(const Constellation& constellation,
                                        const RangingModelParams& params, std::size_t epoch) {
  auto rng = epoch_rng(params.seed, epoch);
  const std::size_t n = constellation.size();
  MeasurementMatrix m(epoch, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) {
        m.set(i, j, draw_measurement(constellation.distance(i, j), params, rng));
      }
    }
  }
  return m;
}

struct SimulationSummary {
  double los{0.0};
  double nlos{0.0};
  double outlier{0.0};
  double failed{0.0};
  std::size_t attempted{0};
};

inline SimulationSummary summarize(std::span<const MeasurementMatrix> matrices) {
  if (matrices.empty()) {
    throw std::invalid_argument("summarize needs at least one measurement matrix");
  }
  std::array<std::size_t, 4> counts{};
  std::size_t total = 0;
  for (const auto& m : matrices) {
    m.for_each([&](const RangingMeasurement& r) {
      ++counts[static_cast<std::size_t>(r.value.error_class)];
      ++total;
    });
  }
  if (total == 0) {
    throw std::invalid_argument("summarize needs at least one measurement");
  }
  const auto frac = [&](ErrorClass c) {
    return static_cast<double>(counts[static_cast<std::size_t>(c)]) / static_cast<double>(total);
  };
  return {frac(ErrorClass::kLos), frac(ErrorClass::kNlos), frac(ErrorClass::kOutlier),
          frac(ErrorClass::kFailed), total};
}

}  // namespace autopos

#endif  // AUTOPOS_SIMULATOR_HPP_
