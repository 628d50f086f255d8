#pragma once

#include "crowd/analysis.hpp"
#include "crowd/behavior.hpp"
#include "crowd/macro.hpp"
#include "crowd/micro.hpp"
#include "crowd/scenario.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace crowd {

/// Desired velocity field of each agent type, on the scenario grid. Type t
/// walks toward its own exits only.
std::vector<VelocityField> type_fields(const Scenario &s, const Grid &grid);

struct MicroSetup {
  Grid grid;
  MicroWorld world;
  std::vector<VelocityField> fields; ///< per type
  std::vector<BehaviorParams> behavior; ///< per type, field = type index
  std::vector<int> types;               ///< per disk
  MicroState state;
  MicroParams params;
};

/// Builds the initial disk configuration (groups in order; random fills use
/// the placement seed) and checks it is feasible inside the room. Velocities
/// start at the sampled desired velocities.
MicroSetup prepare_micro(const Scenario &s);

struct MacroSetup {
  Grid grid;
  std::vector<VelocityField> fields; ///< per population
  std::vector<SpeedFactor> factors;  ///< per population, empty when unused
  MacroState state;
  ProjectionParams projection;
  double initial_rho_ref = 1.0; ///< reference used for from_micro populations
};

/// Initial densities from blocks, or from the rasterized micro groups of the
/// same type normalized by analysis.rho_ref (or, when that is "max", by the
/// largest rasterized value of the initial configuration). Throws when the
/// joint density exceeds 1 anywhere.
MacroSetup prepare_macro(const Scenario &s);

/// Velocity fields actually used for one macro step: the type fields, scaled
/// by the speed factor of the total density where one is configured.
std::vector<VelocityField> macro_step_fields(const MacroSetup &m, const MacroState &state);

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::optional<long> stride;
  bool write = true; ///< false: compute only
};

struct MicroRunSummary {
  long steps = 0; ///< steps taken
  long initial = 0;
  long remaining = 0;
  bool jammed = false;
  long jam_step = -1;
  double min_disk_gap = 0.0; ///< over all steps, meters
  double min_wall_gap = 0.0;
  double max_primal = 0.0; ///< largest KKT residuals seen, meters
  double max_complementarity = 0.0;
  double min_multiplier = 0.0;
  double min_pressure = 0.0;
  double rho_ref = 1.0; ///< normalization of the emitted density frames
  double upstream_mean_raw = -1.0; ///< time mean of the raw covered fraction, -1 without a window
  double eta = 0.0;          ///< prox_regularity_bound(N, r), inf below two disks
  double step_length = 0.0;  ///< tau * largest desired speed
  bool eta_warning = false;  ///< step_length > eta / 2; a heuristic, not a stability bound
  std::vector<EvacuationSample> samples;
  std::vector<long> frame_steps;
  std::vector<std::vector<double>> frames_raw; ///< rasterized density per frame
};

struct MacroRunSummary {
  long steps = 0;
  double initial_mass = 0.0;
  double final_interior = 0.0;
  double max_balance_drift = 0.0; ///< relative, interior + absorbed
  double min_density = 0.0;       ///< over interior cells and frames, all populations summed
  double max_density = 0.0;
  bool strictly_decreasing = true; ///< interior mass fell at every step while above stop_mass
  bool jammed = false;
  std::vector<EvacuationSample> samples; ///< remaining and exited in mass units
  std::vector<long> frame_steps;
  std::vector<std::vector<double>> frames; ///< total density per frame
  std::vector<double> pressure;            ///< odometer summed over the run
};

struct RunSummary {
  Scenario scenario; ///< as run, after overrides
  std::optional<MicroRunSummary> micro;
  std::optional<MacroRunSummary> macro;
};

/// Runs the scenario and, unless opts.write is false, writes the run
/// directory:
///   manifest.json                 resolved scenario, seeds, file list
///   micro/frames.jsonl            positions, exited flags, contact pressures
///   micro/metrics.csv             one line per step
///   micro/jamming.json            final jamming report and verdict
///   micro/density/NNNNNN.csv|pgm  normalized rasterized density per frame
///   macro/metrics.csv, macro/density/..., macro/pressure/...
///   compare/...                   in "both" mode, see compare_runs
RunSummary run_scenario(const Scenario &s, const std::filesystem::path &out, const RunOptions &opts = {});

MicroRunSummary run_micro(const Scenario &s, const std::filesystem::path &dir, bool write);
MacroRunSummary run_macro(const Scenario &s, const std::filesystem::path &dir, bool write);

} // namespace crowd
