// Batch driver for the gate-calibration engine: builds likelihood grids,
// runs closed-loop calibrations against the simulated apparatus, and emits
// the evaluation studies as CSV.  Every command is reproducible from the
// config file and seed.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "mscal/config.hpp"
#include "mscal/evaluation.hpp"
#include "mscal/physics.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace mscal;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitRejected = 3;

std::string hex_digest(std::uint64_t digest) {
  char buffer[19];
  std::snprintf(buffer, sizeof buffer, "0x%016llx", static_cast<unsigned long long>(digest));
  return buffer;
}

std::string format_number(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.12g", v);
  return buffer;
}

// --out > MSCAL_GRID_DIR > config for grids; --out > config for reports
fs::path resolve_grid_dir(const RunConfig& config, const std::string& override_dir) {
  if (!override_dir.empty()) return override_dir;
  if (const char* env = std::getenv("MSCAL_GRID_DIR"); env && *env) return env;
  return config.grid_dir;
}

fs::path resolve_out_dir(const RunConfig& config, const std::string& override_dir) {
  return override_dir.empty() ? config.out_dir : fs::path(override_dir);
}

GridStore load_grids(const RunConfig& config, const fs::path& grid_dir) {
  GridStore store(config.model);
  for (const MeasurementSetting& setting : config.menu.all()) {
    const fs::path path = grid_dir / grid_filename(setting);
    if (!fs::exists(path))
      throw std::runtime_error("missing grid for setting (" + std::to_string(setting.n_gates) +
                               ", " + format_number(setting.phase_target) + "): " +
                               path.string());
    store.add(load_grid(path));
  }
  return store;
}

json control_json(const ControlParams& control) {
  return {{"gate_time", control.gate_time},
          {"centerline_freq", control.centerline_freq},
          {"sideband_freq", control.sideband_freq},
          {"phase", control.phase}};
}

int cmd_precompute(const RunConfig& config, const std::string& setting_arg,
                   const std::string& scale, bool force, const fs::path& grid_dir) {
  std::vector<MeasurementSetting> targets;
  if (setting_arg == "all") {
    targets = config.menu.all();
  } else {
    const int gates = std::atoi(setting_arg.c_str());
    for (const MeasurementSetting& s : config.menu.all())
      if (s.n_gates == gates) targets.push_back(s);
    if (targets.empty()) {
      std::fprintf(stderr, "no menu setting with %s gates\n", setting_arg.c_str());
      return kExitError;
    }
  }

  fs::create_directories(grid_dir);
  for (const MeasurementSetting& setting : targets) {
    const fs::path path = grid_dir / grid_filename(setting);
    if (fs::exists(path) && !force) {
      std::fprintf(stderr, "refusing to overwrite %s (use --force)\n", path.c_str());
      return kExitError;
    }
    const GridSpec spec = scale == "test"     ? test_scale_grid_spec(setting, config.model)
                          : setting.n_gates == 1 ? single_gate_grid_spec(config.model)
                                                 : multi_gate_grid_spec(setting, config.model);
    const auto t0 = std::chrono::steady_clock::now();
    const GridTable table = build_grid(spec, config.model, config.threads);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    save_grid(table, path);
    std::printf("%s: %zu nodes, %.1f s\n", path.c_str(), spec.node_count(), seconds);
  }
  return 0;
}

int cmd_calibrate(const RunConfig& config, const fs::path& grid_dir, const fs::path& out_dir) {
  const GridStore store = load_grids(config, grid_dir);
  VirtualLab lab(config.model, config.truth, config.noise,
                 RandomStream::mix(config.seed, 0xA5));

  fs::create_directories(out_dir);
  const fs::path log_path = out_dir / ("calibration-" + std::to_string(config.seed) + ".jsonl");
  std::ofstream log(log_path, std::ios::binary);
  if (!log) {
    std::fprintf(stderr, "cannot write %s\n", log_path.c_str());
    return kExitError;
  }
  log << json{{"config_digest", hex_digest(config.digest())},
              {"seed", config.seed},
              {"strategy",
               config.strategy == StrategyKind::kVarianceMin ? "variance-min" : "thresholded"},
              {"particles", config.particles}}
      << '\n';

  const int attempts = config.retry_on_reject ? 2 : 1;
  CalibrationRecord record;
  ConfirmationResult confirmation;
  bool confirmed = false;
  for (int attempt = 0; attempt < attempts; ++attempt) {
    const std::uint64_t run_seed =
        attempt == 0 ? config.seed : RandomStream::mix(config.seed, 0x7E57);
    record = run_calibration(lab, store, config.calibration(), run_seed);
    for (std::size_t i = 0; i < record.iterations.size(); ++i) {
      const IterationEntry& entry = record.iterations[i];
      log << json{{"attempt", attempt},
                  {"iteration", i},
                  {"setting", {{"gates", entry.setting.n_gates},
                               {"phase_target", entry.setting.phase_target}}},
                  {"counts", {{"gg", entry.counts.gg},
                              {"one", entry.counts.one},
                              {"ee", entry.counts.ee}}},
                  {"mean", {entry.mean.rabi, entry.mean.centerline, entry.mean.sideband,
                            entry.mean.phase_step}},
                  {"variance", {entry.variance[0], entry.variance[1], entry.variance[2],
                                entry.variance[3]}},
                  {"control", control_json(entry.control)}}
          << '\n';
    }
    confirmed = false;
    if (record.converged() && config.confirm) {
      confirmation = confirm(lab, record.final_control);
      confirmed = confirmation.accept;
    }
    json summary{{"attempt", attempt},
                 {"stop_reason", record.stop_reason},
                 {"iterations", record.iterations.size()},
                 {"total_shots", record.total_shots},
                 {"final_control", control_json(record.final_control)}};
    if (record.converged() && config.confirm)
      summary["confirmation"] = {{"fixed_ground", confirmation.fixed_ground},
                                 {"stepped_ground", confirmation.stepped_ground},
                                 {"accept", confirmation.accept}};
    log << summary << '\n';

    if (!record.converged() || !config.confirm || confirmed) break;
  }

  std::printf("%s after %zu iterations, %ld shots; log %s\n", record.stop_reason.c_str(),
              record.iterations.size(), record.total_shots, log_path.c_str());
  if (!record.converged()) return kExitNotConverged;
  if (config.confirm && !confirmed) return kExitRejected;
  return 0;
}

class CsvWriter {
 public:
  CsvWriter(const fs::path& path, const RunConfig& config, const std::string& header)
      : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# seed=" << config.seed << " config_digest=" << hex_digest(config.digest()) << "\n";
    out_ << header << "\n";
  }

  void comment(const std::string& line) { out_ << "# " << line << "\n"; }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      out_ << cells[i] << (i + 1 < cells.size() ? "," : "");
    out_ << "\n";
  }

 private:
  std::ofstream out_;
};

int cmd_study_curve(const RunConfig& config, const fs::path& out_dir) {
  // curves characterize the ideal-envelope gate; pulse shaping only adds a
  // miscalibration-independent floor
  ModelConfig flat = config.model;
  flat.ramp_time = 0.0;
  const StopThresholds stop = resolved_stop(config.calibration());
  const char* names[4] = {"rabi", "centerline", "sideband", "phase_step"};

  CsvWriter csv(out_dir / "infidelity-curve.csv", config, "axis,name,offset,infidelity");
  for (int axis = 0; axis < 4; ++axis) {
    const double half = config.curve_span * stop.vec()[axis];
    const InfidelityCurve curve =
        infidelity_curve(axis, flat, half, config.curve_points, config.threads);
    for (int i = 0; i < config.curve_points; ++i)
      csv.row({std::to_string(axis), names[axis], format_number(curve.offsets[i]),
               format_number(curve.infidelity[i])});
    if (config.rb_check) {
      Eigen::Vector4d v = optimal_params(flat).vec();
      v[axis] += stop.vec()[axis];
      const GateParams theta = GateParams::from_vec(v);
      csv.comment("rb-check " + std::string(names[axis]) +
                  " proxy=" + format_number(miscalibration_infidelity(theta, flat)) +
                  " sequence=" +
                  format_number(benchmarking_infidelity(theta, flat, config.seed)));
    }
  }
  std::printf("infidelity-curve.csv: %d axes x %d points\n", 4, config.curve_points);
  return 0;
}

int cmd_study_capture(const RunConfig& config, const fs::path& grid_dir,
                      const fs::path& out_dir) {
  const GridStore store = load_grids(config, grid_dir);
  // the capture protocol fixes its own start uncertainty; [prior] applies to
  // the calibrate and endpoints paths
  CalibrationConfig base = config.calibration();
  base.prior = capture_study_prior(base.model);
  const CaptureReport report =
      capture_range_study(config.capture_distances, config.capture_particles,
                          config.capture_trials, base, store, config.seed, config.threads);
  CsvWriter csv(out_dir / "capture.csv", config,
                "distance,particles,trials,captured,fraction,low,high");
  for (const CaptureCell& cell : report.cells)
    csv.row({format_number(cell.distance), std::to_string(cell.particles),
             std::to_string(cell.trials), std::to_string(cell.captured),
             format_number(cell.fraction), format_number(cell.low), format_number(cell.high)});
  std::printf("capture.csv: %zu cells x %d trials\n", report.cells.size(),
              config.capture_trials);
  return 0;
}

int cmd_study_endpoints(const RunConfig& config, const fs::path& grid_dir,
                        const fs::path& out_dir) {
  const GridStore store = load_grids(config, grid_dir);
  const std::vector<EndpointRun> runs =
      collect_endpoint_runs(config.endpoint_runs, config.calibration(), store, config.noise,
                            config.confirm, 1.0, config.seed, config.threads);

  std::vector<GateParams> accepted;
  for (const EndpointRun& run : runs)
    if (run.accepted) accepted.push_back(run.endpoint);

  std::vector<double> joint(runs.size(), std::nan(""));
  std::string summary;
  if (accepted.size() >= 20) {
    ModelConfig flat = config.model;
    flat.ramp_time = 0.0;
    const EndpointDistribution dist = endpoint_infidelity_distribution(accepted, flat);
    std::size_t k = 0;
    for (std::size_t i = 0; i < runs.size(); ++i)
      if (runs[i].accepted) joint[i] = dist.infidelities[Eigen::Index(k++)];
    summary = "accepted=" + std::to_string(accepted.size()) +
              " median_infidelity=" + format_number(dist.median);
  } else {
    summary = "insufficient sample (accepted=" + std::to_string(accepted.size()) + " < 20)";
  }

  CsvWriter csv(out_dir / "endpoints.csv", config,
                "run,start_distance,converged,accepted,shots,rabi,centerline,sideband,phase_step,"
                "infidelity");
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const EndpointRun& run = runs[i];
    csv.row({std::to_string(i), format_number(run.start_distance),
             run.record.converged() ? "1" : "0", run.accepted ? "1" : "0",
             std::to_string(run.record.total_shots), format_number(run.endpoint.rabi),
             format_number(run.endpoint.centerline), format_number(run.endpoint.sideband),
             format_number(run.endpoint.phase_step), format_number(joint[i])});
  }
  csv.comment(summary);
  std::printf("endpoints.csv: %zu runs, %s\n", runs.size(), summary.c_str());
  return 0;
}

int cmd_study_baseline(const RunConfig& config, const fs::path& out_dir) {
  VirtualLab lab(config.model, config.truth, config.noise,
                 RandomStream::mix(config.seed, 0xA5));
  const CalibrationRecord record = manual_baseline(lab, config.model);

  CsvWriter csv(out_dir / "baseline.csv", config,
                "scan,gates,shots,gate_time,centerline_freq,sideband_freq,phase");
  for (std::size_t i = 0; i < record.iterations.size(); ++i) {
    const IterationEntry& entry = record.iterations[i];
    csv.row({std::to_string(i), std::to_string(entry.setting.n_gates),
             std::to_string(entry.counts.total()), format_number(entry.control.gate_time),
             format_number(entry.control.centerline_freq),
             format_number(entry.control.sideband_freq), format_number(entry.control.phase)});
  }
  csv.comment("total_shots=" + std::to_string(record.total_shots));
  std::printf("baseline.csv: %zu scans, total shots %ld\n", record.iterations.size(),
              record.total_shots);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Closed-loop Bayesian calibration of a two-qubit entangling gate"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  app.add_option("--config", config_path, "run configuration (TOML)");
  app.add_option("--out", out_override, "output directory override");
  app.add_option_function<std::uint64_t>(
         "--seed", [&](std::uint64_t s) { seed_override = s; seed_given = true; },
         "seed override");

  auto* precompute = app.add_subcommand("precompute", "build likelihood grids");
  std::string setting_arg = "all";
  std::string scale = "full";
  bool force = false;
  precompute->add_option("setting", setting_arg, "menu gate count, or 'all'");
  precompute->add_option("--scale", scale, "grid preset: full or test")
      ->check(CLI::IsMember({"full", "test"}));
  precompute->add_flag("--force", force, "overwrite existing grid files");

  auto* calibrate = app.add_subcommand("calibrate", "run one closed-loop calibration");

  auto* study = app.add_subcommand("study", "run an evaluation study");
  std::string kind;
  study->add_option("kind", kind, "capture | infidelity-curve | endpoints | baseline")
      ->required()
      ->check(CLI::IsMember({"capture", "infidelity-curve", "endpoints", "baseline"}));

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig config = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (seed_given) config.seed = seed_override;
    config.validate();

    const fs::path grid_dir = resolve_grid_dir(config, precompute->parsed() ? out_override : "");
    const fs::path out_dir = resolve_out_dir(config, out_override);
    if (!precompute->parsed()) fs::create_directories(out_dir);

    if (precompute->parsed()) return cmd_precompute(config, setting_arg, scale, force, grid_dir);
    if (calibrate->parsed()) return cmd_calibrate(config, grid_dir, out_dir);
    if (kind == "infidelity-curve") return cmd_study_curve(config, out_dir);
    if (kind == "capture") return cmd_study_capture(config, grid_dir, out_dir);
    if (kind == "endpoints") return cmd_study_endpoints(config, grid_dir, out_dir);
    return cmd_study_baseline(config, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitError;
  }
}
