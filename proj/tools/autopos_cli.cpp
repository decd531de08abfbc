// Batch runner: simulate ranging, solve with CF and CGP, write reports.
//
//   autopos run --config configs/scenario2.yaml [--epochs N] [--cell M] ...
//   autopos run-all --config-dir configs [--out-dir out] ...
//
// Exit codes: 0 success, 1 configuration error, 2 I/O error.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "autopos/autopos.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kIoError = 2;

struct CommonFlags {
  std::optional<std::size_t> epochs;
  std::optional<double> cell;
  std::optional<std::uint64_t> seed;
  bool carry_beliefs{false};
  bool independent_epochs{false};
  bool dump_measurements{false};
  bool dump_beliefs{false};
  std::optional<std::string> out_dir;
  unsigned workers{0};
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--epochs", f.epochs, "Override the number of epochs")->check(CLI::PositiveNumber);
  app->add_option("--cell", f.cell, "Override the grid cell size [m]")->check(CLI::PositiveNumber);
  app->add_option("--seed", f.seed, "Override the random seed");
  app->add_flag("--carry-beliefs", f.carry_beliefs, "Propagate CGP posteriors across epochs");
  app->add_flag("--independent-epochs", f.independent_epochs, "Restart CGP from uniform priors every epoch");
  app->add_flag("--dump-measurements", f.dump_measurements, "Write measurements.csv");
  app->add_flag("--dump-beliefs", f.dump_beliefs, "Write the last epoch's CGP beliefs per node");
  app->add_option("--out-dir", f.out_dir, "Output directory");
  app->add_option("--workers", f.workers, "Worker threads (0 = hardware concurrency)");
}

autopos::ConfigOverrides to_overrides(const CommonFlags& f, std::vector<std::string>& notes) {
  autopos::ConfigOverrides o;
  if (f.epochs) {
    o.epochs = f.epochs;
    notes.push_back("epochs=" + std::to_string(*f.epochs));
  }
  if (f.cell) {
    o.cell_size = f.cell;
    notes.push_back("cell=" + autopos::format_double(*f.cell));
  }
  if (f.seed) {
    o.seed = f.seed;
    notes.push_back("seed=" + std::to_string(*f.seed));
  }
  if (f.carry_beliefs) {
    o.carry_beliefs = true;
    notes.emplace_back("carry_beliefs=true");
  } else if (f.independent_epochs) {
    o.carry_beliefs = false;
    notes.emplace_back("carry_beliefs=false");
  }
  if (f.dump_measurements) {
    o.dump_measurements = true;
    notes.emplace_back("dump_measurements=true");
  }
  if (f.dump_beliefs) {
    o.dump_beliefs = true;
    notes.emplace_back("dump_beliefs=true");
  }
  return o;
}

unsigned worker_count(const CommonFlags& f) {
  return f.workers > 0 ? f.workers : std::max(1u, std::thread::hardware_concurrency());
}

struct Outcome {
  int code{kOk};
  std::optional<autopos::ScenarioResult> result;
};

Outcome run_one(const fs::path& config_path, const CommonFlags& flags, const std::optional<fs::path>& out_dir) {
  Outcome out;
  try {
    auto cfg = autopos::load_scenario(config_path);
    std::vector<std::string> notes;
    auto overrides = to_overrides(flags, notes);
    if (out_dir) {
      overrides.out_dir = *out_dir;
      notes.push_back("out_dir=" + out_dir->string());
    }
    overrides.apply(cfg);
    cfg.validate();
    auto result = autopos::run_scenario(cfg, worker_count(flags));
    autopos::write_scenario_outputs(result, {config_path, notes});
    autopos::write_table_summary(std::cout, result);
    out.result = std::move(result);
  } catch (const autopos::ConfigError& e) {
    std::cerr << "config error in " << config_path.string() << ": " << e.what() << '\n';
    out.code = kConfigError;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    out.code = kIoError;
  }
  return out;
}

int run_all(const fs::path& dir, const CommonFlags& flags) {
  std::vector<fs::path> configs;
  std::error_code ec;
  for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
    const auto ext = it->path().extension();
    if (it->is_regular_file() && (ext == ".yaml" || ext == ".yml")) configs.push_back(it->path());
  }
  if (ec) {
    std::cerr << "I/O error: cannot read " << dir.string() << ": " << ec.message() << '\n';
    return kIoError;
  }
  if (configs.empty()) {
    std::cerr << "no scenario configs (*.yaml) in " << dir.string() << '\n';
    return kConfigError;
  }
  std::sort(configs.begin(), configs.end());

  const fs::path root = flags.out_dir ? fs::path(*flags.out_dir) : fs::path("out");
  int worst = kOk;
  std::vector<autopos::ScenarioResult> done;
  for (const auto& c : configs) {
    // Each scenario gets its own subdirectory named after the config file.
    auto o = run_one(c, flags, root / c.stem());
    worst = std::max(worst, o.code);
    if (o.result) done.push_back(std::move(*o.result));
  }

  try {
    fs::create_directories(root);
    autopos::write_file_atomically(root / "combined_report.csv", [&](std::ostream& os) {
      autopos::write_report_header(os);
      for (const auto& r : done) {
        autopos::write_report_row(os, autopos::eval::Method::kCf, r.config.scenario_label, r.cf);
        autopos::write_report_row(os, autopos::eval::Method::kCgp, r.config.scenario_label, r.cgp);
      }
    });
    autopos::write_file_atomically(root / "combined_ecdf.csv", [&](std::ostream& os) {
      os << "method,scenario,error_m,cum_fraction\n";
      for (const auto& r : done) {
        for (const auto* rep : {&r.cf, &r.cgp}) {
          const auto m = rep == &r.cf ? autopos::eval::Method::kCf : autopos::eval::Method::kCgp;
          for (const auto& [e, f] : rep->ecdf) {
            os << autopos::eval::to_string(m) << ',' << r.config.scenario_label << ','
               << autopos::format_double(e) << ',' << autopos::format_double(f) << '\n';
          }
        }
      }
    });
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kIoError;
  }
  return worst;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collaborative auto-positioning lab: closed-form vs. grid-based Bayesian estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", autopos::kToolVersion);

  CommonFlags run_flags;
  std::string config;
  auto* run = app.add_subcommand("run", "Run one scenario config");
  run->add_option("--config", config, "Scenario config (YAML) or run manifest")->required();
  add_common(run, run_flags);

  CommonFlags all_flags;
  std::string config_dir;
  auto* all = app.add_subcommand("run-all", "Run every *.yaml scenario in a directory");
  all->add_option("--config-dir", config_dir, "Directory of scenario configs")->required();
  add_common(all, all_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kConfigError;
  }

  if (*run) {
    std::optional<fs::path> out;
    if (run_flags.out_dir) out = fs::path(*run_flags.out_dir);
    return run_one(config, run_flags, out).code;
  }
  return run_all(config_dir, all_flags);
}
