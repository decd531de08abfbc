#ifndef AUTOPOS_CONFIG_HPP_
#define AUTOPOS_CONFIG_HPP_

// Scenario configuration files (YAML). Schema:
//
//   scenario_label: II            # required, used in file names and reports
//   epochs: 1000                  # required, >= 1
//   seed: 2023                    # required, unsigned 64-bit
//   constellation:                # required, >= 3 nodes, [x, y] in meters
//     - [0.0, 0.0]
//     - ...
//   ranging:
//     sigma_r: 0.9                # LOS noise standard deviation [m]
//     d_max: 100.0                # maximum range [m]
//     p_out: 0.07                 # outlier probability
//     mp_mean: 0.8                # multipath lognormal, log-space mean
//     mp_sigma: 1.07              # multipath lognormal, log-space std deviation
//     nlos_enabled: true
//     failures_enabled: true
//   grid:
//     cell_size: 0.1              # [m]
//     margin: 5.0                 # added around the constellation bounding box [m]
//     axis_cell_size: 0.01        # A1 1-D filter resolution [m]
//     sigma_pred_cells: 1.0       # transition diffusion, cells
//     carry_beliefs: false        # propagate posteriors across epochs
//   output:
//     dir: out/II
//     dump_measurements: false
//     dump_beliefs: false
//
// Every key outside `scenario_label`, `epochs`, `seed` and `constellation`
// is optional and defaults to the values above.

#include <yaml-cpp/yaml.h>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "autopos/cgp.hpp"
#include "autopos/core.hpp"
#include "autopos/simulator.hpp"

namespace autopos {

/// Configuration problem tied to a schema field.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& what)
      : std::runtime_error(field + ": " + what), field_(std::move(field)) {}

  [[nodiscard]] const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct OutputSettings {
  std::filesystem::path dir;
  bool dump_measurements{false};
  bool dump_beliefs{false};
};

struct ScenarioConfig {
  std::string scenario_label;
  std::size_t epochs{1};
  Constellation constellation;
  RangingModelParams params;
  cgp::CgpConfig grid;
  OutputSettings output;

  void validate() const {
    if (scenario_label.empty()) throw ConfigError("scenario_label", "must not be empty");
    if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
    if (constellation.size() < 3) throw ConfigError("constellation", "needs at least 3 nodes");
    try {
      params.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("ranging", e.what());
    }
    if (!(grid.cell_size > 0.0)) throw ConfigError("grid.cell_size", "must be > 0");
    if (!(grid.axis_cell_size > 0.0)) throw ConfigError("grid.axis_cell_size", "must be > 0");
    if (!(grid.margin >= 0.0)) throw ConfigError("grid.margin", "must be >= 0");
    if (!(grid.sigma_pred_cells >= 0.0)) throw ConfigError("grid.sigma_pred_cells", "must be >= 0");
  }
};

/// Command-line values that beat the file.
struct ConfigOverrides {
  std::optional<std::size_t> epochs;
  std::optional<double> cell_size;
  std::optional<std::uint64_t> seed;
  std::optional<bool> carry_beliefs;
  std::optional<bool> dump_measurements;
  std::optional<bool> dump_beliefs;
  std::optional<std::filesystem::path> out_dir;

  void apply(ScenarioConfig& c) const {
    if (epochs) c.epochs = *epochs;
    if (cell_size) c.grid.cell_size = *cell_size;
    if (seed) c.params.seed = *seed;
    if (carry_beliefs) c.grid.carry_beliefs = *carry_beliefs;
    if (dump_measurements) c.output.dump_measurements = *dump_measurements;
    if (dump_beliefs) c.output.dump_beliefs = *dump_beliefs;
    if (out_dir) c.output.dir = *out_dir;
  }
};

namespace detail {

template <typename T>
T read_scalar(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(field, "has the wrong type");
  }
}

template <typename T>
void read_optional(const YAML::Node& parent, const char* key, const std::string& prefix, T& out) {
  if (const YAML::Node n = parent[key]) {
    out = read_scalar<T>(n, prefix + key);
  }
}

inline YAML::Node require(const YAML::Node& parent, const char* key) {
  const YAML::Node n = parent[key];
  if (!n) throw ConfigError(key, "is required");
  return n;
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const YAML::Node& root) {
  using detail::read_optional;
  using detail::read_scalar;
  if (!root.IsMap()) {
    throw ConfigError("<root>", "must be a mapping");
  }
  ScenarioConfig c;
  c.scenario_label = read_scalar<std::string>(detail::require(root, "scenario_label"), "scenario_label");
  const auto epochs = read_scalar<long long>(detail::require(root, "epochs"), "epochs");
  if (epochs < 1) throw ConfigError("epochs", "must be >= 1");
  c.epochs = static_cast<std::size_t>(epochs);
  c.params.seed = read_scalar<std::uint64_t>(detail::require(root, "seed"), "seed");

  const YAML::Node nodes = detail::require(root, "constellation");
  if (!nodes.IsSequence()) throw ConfigError("constellation", "must be a list of [x, y] pairs");
  std::vector<NodePosition> positions;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string field = "constellation[" + std::to_string(i) + "]";
    const YAML::Node p = nodes[i];
    if (!p.IsSequence() || p.size() != 2) throw ConfigError(field, "must be an [x, y] pair");
    positions.push_back({read_scalar<double>(p[0], field), read_scalar<double>(p[1], field)});
  }
  try {
    c.constellation = Constellation(std::move(positions));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("constellation", e.what());
  }

  if (const YAML::Node r = root["ranging"]) {
    read_optional(r, "sigma_r", "ranging.", c.params.sigma_r);
    read_optional(r, "d_max", "ranging.", c.params.d_max);
    read_optional(r, "p_out", "ranging.", c.params.p_out);
    read_optional(r, "mp_mean", "ranging.", c.params.mp_mean);
    read_optional(r, "mp_sigma", "ranging.", c.params.mp_sigma);
    read_optional(r, "nlos_enabled", "ranging.", c.params.nlos_enabled);
    read_optional(r, "failures_enabled", "ranging.", c.params.failures_enabled);
  }
  if (!(c.params.sigma_r > 0.0)) throw ConfigError("ranging.sigma_r", "must be > 0");
  if (!(c.params.d_max > 0.0)) throw ConfigError("ranging.d_max", "must be > 0");
  if (!(c.params.p_out >= 0.0 && c.params.p_out <= 1.0)) throw ConfigError("ranging.p_out", "must lie in [0, 1]");
  if (!(c.params.mp_sigma > 0.0)) throw ConfigError("ranging.mp_sigma", "must be > 0");

  if (const YAML::Node g = root["grid"]) {
    read_optional(g, "cell_size", "grid.", c.grid.cell_size);
    read_optional(g, "margin", "grid.", c.grid.margin);
    read_optional(g, "axis_cell_size", "grid.", c.grid.axis_cell_size);
    read_optional(g, "sigma_pred_cells", "grid.", c.grid.sigma_pred_cells);
    read_optional(g, "carry_beliefs", "grid.", c.grid.carry_beliefs);
  }
  c.grid.sigma_r = c.params.sigma_r;

  c.output.dir = std::filesystem::path("out") / c.scenario_label;
  if (const YAML::Node o = root["output"]) {
    if (const YAML::Node d = o["dir"]) c.output.dir = read_scalar<std::string>(d, "output.dir");
    read_optional(o, "dump_measurements", "output.", c.output.dump_measurements);
    read_optional(o, "dump_beliefs", "output.", c.output.dump_beliefs);
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_scenario(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw std::filesystem::filesystem_error("cannot open config", path,
                                            std::make_error_code(std::errc::no_such_file_or_directory));
  } catch (const YAML::Exception& e) {
    throw ConfigError("<syntax>", e.what());
  }
  // A run manifest carries the effective configuration; accept it directly.
  if (root.IsMap() && root["effective_config"]) {
    return parse_scenario(root["effective_config"]);
  }
  return parse_scenario(root);
}

/// Serializes the effective configuration in the same schema.
inline YAML::Node to_yaml(const ScenarioConfig& c) {
  YAML::Node root;
  root["scenario_label"] = c.scenario_label;
  root["epochs"] = c.epochs;
  root["seed"] = c.params.seed;
  for (const auto& p : c.constellation.positions()) {
    YAML::Node pair;
    pair.SetStyle(YAML::EmitterStyle::Flow);
    pair.push_back(p.x);
    pair.push_back(p.y);
    root["constellation"].push_back(pair);
  }
  root["ranging"]["sigma_r"] = c.params.sigma_r;
  root["ranging"]["d_max"] = c.params.d_max;
  root["ranging"]["p_out"] = c.params.p_out;
  root["ranging"]["mp_mean"] = c.params.mp_mean;
  root["ranging"]["mp_sigma"] = c.params.mp_sigma;
  root["ranging"]["nlos_enabled"] = c.params.nlos_enabled;
  root["ranging"]["failures_enabled"] = c.params.failures_enabled;
  root["grid"]["cell_size"] = c.grid.cell_size;
  root["grid"]["margin"] = c.grid.margin;
  root["grid"]["axis_cell_size"] = c.grid.axis_cell_size;
  root["grid"]["sigma_pred_cells"] = c.grid.sigma_pred_cells;
  root["grid"]["carry_beliefs"] = c.grid.carry_beliefs;
  root["output"]["dir"] = c.output.dir.string();
  root["output"]["dump_measurements"] = c.output.dump_measurements;
  root["output"]["dump_beliefs"] = c.output.dump_beliefs;
  return root;
}

}  // namespace autopos

#endif  // AUTOPOS_CONFIG_HPP_
