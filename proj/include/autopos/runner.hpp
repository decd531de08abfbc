#ifndef AUTOPOS_RUNNER_HPP_
#define AUTOPOS_RUNNER_HPP_

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>
#include <system_error>
#include <thread>
#include <vector>

#include "autopos/cgp.hpp"
#include "autopos/closed_form.hpp"
#include "autopos/config.hpp"
#include "autopos/eval.hpp"
#include "autopos/simulator.hpp"

namespace autopos {

inline constexpr const char* kToolVersion = "1.0.0";

/// Shortest round-trip decimal; identical bytes for identical doubles.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_double(*v) : "NA"; }

struct ScenarioTimings {
  double simulate_s{0.0};
  double cf_s{0.0};
  double cgp_s{0.0};
  double total_s{0.0};
};

struct ScenarioResult {
  ScenarioConfig config;
  cgp::GridDomain plane;
  SimulationSummary simulation;
  std::vector<MeasurementMatrix> matrices;
  std::vector<eval::ErrorSample> cf_samples;
  std::vector<eval::ErrorSample> cgp_samples;
  eval::EvalReport cf;
  eval::EvalReport cgp;
  std::vector<std::optional<cgp::BeliefGrid>> final_beliefs;  ///< CGP posteriors of the last epoch
  std::size_t cgp_reinitializations{0};
  ScenarioTimings timings;
};

namespace detail {

/// Runs fn(i) for i in [0, count) on up to `workers` threads. Results must be
/// written to slot i so ordering never depends on completion order.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(count)));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
  }
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Simulation, both estimators and evaluation for one scenario; no file I/O.
inline ScenarioResult run_scenario(const ScenarioConfig& config,
                                   unsigned workers = std::max(1u, std::thread::hardware_concurrency())) {
  config.validate();
  const auto t_start = std::chrono::steady_clock::now();
  ScenarioResult res;
  res.config = config;
  const auto& truth = config.constellation.positions();
  const std::size_t n = truth.size();
  const std::size_t epochs = config.epochs;

  auto t0 = std::chrono::steady_clock::now();
  res.matrices.resize(epochs);
  detail::parallel_for(epochs, workers, [&](std::size_t t) {
    res.matrices[t] = simulate_epoch(config.constellation, config.params, t);
  });
  res.simulation = summarize(res.matrices);
  res.timings.simulate_s = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  std::vector<std::vector<eval::ErrorSample>> per_epoch(epochs);
  detail::parallel_for(epochs, workers, [&](std::size_t t) {
    const auto cf = cf::cf_autoposition(res.matrices[t]);
    per_epoch[t] = eval::error_samples(t, eval::Method::kCf, cf.estimates, truth);
  });
  for (auto& v : per_epoch) res.cf_samples.insert(res.cf_samples.end(), v.begin(), v.end());
  res.timings.cf_s = detail::seconds_since(t0);

  t0 = std::chrono::steady_clock::now();
  const auto gauge = eval::gauge_frame(truth);
  res.plane = cgp::default_domain(gauge, config.grid.cell_size, config.grid.margin);
  if (config.grid.carry_beliefs) {
    cgp::CgpPipeline pipeline(config.grid, res.plane, n);
    for (std::size_t t = 0; t < epochs; ++t) {
      const auto est = pipeline.process(res.matrices[t]);
      per_epoch[t] = eval::error_samples(t, eval::Method::kCgp, est, truth);
    }
    res.cgp_reinitializations = pipeline.reinitializations();
    for (std::size_t i = 0; i < n; ++i) res.final_beliefs.push_back(pipeline.belief(i));
  } else {
    std::vector<std::size_t> reinit(epochs, 0);
    detail::parallel_for(epochs, workers, [&](std::size_t t) {
      cgp::CgpPipeline pipeline(config.grid, res.plane, n);
      const auto est = pipeline.process(res.matrices[t]);
      per_epoch[t] = eval::error_samples(t, eval::Method::kCgp, est, truth);
      reinit[t] = pipeline.reinitializations();
      if (t + 1 == epochs) {
        for (std::size_t i = 0; i < n; ++i) res.final_beliefs.push_back(pipeline.belief(i));
      }
    });
    for (auto r : reinit) res.cgp_reinitializations += r;
  }
  for (auto& v : per_epoch) res.cgp_samples.insert(res.cgp_samples.end(), v.begin(), v.end());
  res.timings.cgp_s = detail::seconds_since(t0);

  res.cf = eval::compute_report(res.cf_samples);
  res.cgp = eval::compute_report(res.cgp_samples);
  res.timings.total_s = detail::seconds_since(t_start);
  return res;
}

// ---------------------------------------------------------------------------
// Output files

inline void write_report_header(std::ostream& os) {
  os << "method,scenario,rmse,q1,q2,q3,success_rate,epoch_success_rate\n";
}

inline void write_report_row(std::ostream& os, eval::Method m, const std::string& scenario,
                             const eval::EvalReport& r) {
  os << eval::to_string(m) << ',' << scenario << ',' << format_optional(r.rmse) << ',' << format_optional(r.q1)
     << ',' << format_optional(r.q2) << ',' << format_optional(r.q3) << ',' << format_double(r.success_rate)
     << ',' << format_double(r.epoch_success_rate) << '\n';
}

inline void write_ecdf(std::ostream& os, const eval::EvalReport& r) {
  os << "error_m,cum_fraction\n";
  for (const auto& [e, f] : r.ecdf) os << format_double(e) << ',' << format_double(f) << '\n';
}

inline void write_errors(std::ostream& os, std::span<const eval::ErrorSample> samples) {
  for (const auto& s : samples) {
    os << s.epoch << ',' << s.node << ',' << eval::to_string(s.method) << ','
       << (s.success ? format_double(s.position_error) : std::string()) << ',' << (s.success ? 1 : 0) << '\n';
  }
}

inline void write_measurements(std::ostream& os, const Constellation& c, std::span<const MeasurementMatrix> ms) {
  os << "epoch,from,to,true_distance,range,error_class\n";
  for (const auto& m : ms) {
    m.for_each([&](const RangingMeasurement& r) {
      os << m.epoch() << ',' << r.from.index << ',' << r.to.index << ','
         << format_double(c.distance(r.from.index, r.to.index)) << ','
         << (r.value.range ? format_double(*r.value.range) : std::string()) << ','
         << to_string(r.value.error_class) << '\n';
    });
  }
}

inline void write_belief(std::ostream& os, const cgp::BeliefGrid& b) {
  os << "x,y,mass\n";
  const auto& d = b.domain();
  for (std::size_t m = 0; m < d.size(); ++m) {
    const auto p = d.center(m);
    os << format_double(p.x) << ',' << format_double(p.y) << ',' << format_double(b[m]) << '\n';
  }
}

/// Writes through a temporary sibling and renames it into place.
template <typename Fn>
void write_file_atomically(const std::filesystem::path& path, Fn&& fill) {
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) {
      throw std::filesystem::filesystem_error("cannot open for writing", tmp,
                                              std::make_error_code(std::errc::io_error));
    }
    fill(os);
    os.flush();
    if (!os) {
      throw std::filesystem::filesystem_error("write failed", tmp, std::make_error_code(std::errc::io_error));
    }
  }
  std::filesystem::rename(tmp, path);
}

inline void write_table_summary(std::ostream& os, const ScenarioResult& r) {
  const auto pct = [](double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    return s.str();
  };
  const auto opt = [&](const std::optional<double>& v) { return v ? pct(*v) : std::string("NA"); };
  os << "Scenario " << r.config.scenario_label << " (" << r.config.epochs << " epochs, "
     << r.config.constellation.size() << " nodes, cell " << r.config.grid.cell_size << " m"
     << (r.config.grid.carry_beliefs ? ", carried beliefs" : "") << ")\n";
  os << "  Simulation   LOS " << pct(r.simulation.los) << "  NLOS " << pct(r.simulation.nlos) << "  Outlier "
     << pct(r.simulation.outlier) << "  Failures " << pct(r.simulation.failed) << '\n';
  for (const auto* pair : {&r.cf, &r.cgp}) {
    os << "  " << (pair == &r.cf ? "CF " : "CGP") << "  RMSE " << opt(pair->rmse) << "  1-sigma " << opt(pair->q1)
       << "  2-sigma " << opt(pair->q2) << "  3-sigma " << opt(pair->q3) << "  success " << pct(pair->success_rate)
       << " (epochs " << pct(pair->epoch_success_rate) << ")\n";
  }
}

struct RunManifest {
  std::filesystem::path config_path;
  std::vector<std::string> overrides;
  std::string tool_version{kToolVersion};
};

/// Writes report.csv, ecdf_<method>_<scenario>.csv, errors.csv, the
/// optional dumps and manifest.yaml into config.output.dir.
inline void write_scenario_outputs(const ScenarioResult& r, const RunManifest& manifest) {
  namespace fs = std::filesystem;
  const auto& cfg = r.config;
  const fs::path dir = cfg.output.dir;
  fs::create_directories(dir);
  const std::string& label = cfg.scenario_label;

  write_file_atomically(dir / "report.csv", [&](std::ostream& os) {
    write_report_header(os);
    write_report_row(os, eval::Method::kCf, label, r.cf);
    write_report_row(os, eval::Method::kCgp, label, r.cgp);
  });
  write_file_atomically(dir / ("ecdf_cf_" + label + ".csv"), [&](std::ostream& os) { write_ecdf(os, r.cf); });
  write_file_atomically(dir / ("ecdf_cgp_" + label + ".csv"), [&](std::ostream& os) { write_ecdf(os, r.cgp); });
  write_file_atomically(dir / "errors.csv", [&](std::ostream& os) {
    os << "epoch,node,method,position_error,success\n";
    write_errors(os, r.cf_samples);
    write_errors(os, r.cgp_samples);
  });
  if (cfg.output.dump_measurements) {
    write_file_atomically(dir / "measurements.csv",
                          [&](std::ostream& os) { write_measurements(os, cfg.constellation, r.matrices); });
  }
  if (cfg.output.dump_beliefs) {
    fs::create_directories(dir / "beliefs");
    for (std::size_t i = 0; i < r.final_beliefs.size(); ++i) {
      if (!r.final_beliefs[i]) continue;
      write_file_atomically(dir / "beliefs" / ("node_" + std::to_string(i) + ".csv"),
                            [&](std::ostream& os) { write_belief(os, *r.final_beliefs[i]); });
    }
  }

  YAML::Node m;
  m["tool_version"] = manifest.tool_version;
  m["config_path"] = manifest.config_path.string();
  m["scenario_label"] = label;
  m["seed"] = cfg.params.seed;
  m["output_dir"] = dir.string();
  for (const auto& o : manifest.overrides) m["overrides"].push_back(o);
  m["effective_config"] = to_yaml(cfg);
  m["grid_cells"] = r.plane.size();
  m["cgp_reinitializations"] = r.cgp_reinitializations;
  m["timings_s"]["simulate"] = r.timings.simulate_s;
  m["timings_s"]["cf"] = r.timings.cf_s;
  m["timings_s"]["cgp"] = r.timings.cgp_s;
  m["timings_s"]["total"] = r.timings.total_s;
  YAML::Emitter out;
  out << m;
  write_file_atomically(dir / "manifest.yaml", [&](std::ostream& os) { os << out.c_str() << '\n'; });
}

}  // namespace autopos

#endif  // AUTOPOS_RUNNER_HPP_
