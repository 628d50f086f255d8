#pragma once

#include "crowd/analysis.hpp"
#include "crowd/behavior.hpp"
#include "crowd/geometry.hpp"
#include "crowd/micro.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace crowd {

enum class Model { micro, macro, both };

/// One kind of agent: where it wants to go, how fast, and how it reacts to
/// the people in front of it.
struct TypeSpec {
  std::string name;
  std::vector<int> exits; ///< indices into room.exits; empty means all of them
  double speed = 1.0;
  bool normalize = true; ///< unit-speed field, or the raw -grad D capped at speed
  Strategy strategy = Strategy::none;
  double proximity_range = 0.5;
  double view_half_angle_deg = 60.0;
  /// Macro speed modulation: "none" or "linear", alpha = max(0, 1 - rho / jam_density).
  std::string speed_factor = "none";
  double jam_density = 1.0;
};

struct MicroGroup {
  enum class Kind { positions, lattice, random };
  std::string type;
  Kind kind = Kind::positions;
  std::vector<Vec2> positions;
  LatticeSpec lattice; ///< radius comes from MicroSpec
  long count = 0;      ///< random fill
  Vec2 lo, hi;         ///< random fill region
};

struct MicroSpec {
  double radius = 0.2;
  std::vector<MicroGroup> groups;
  MicroParams params;
};

struct DensityBlock {
  Vec2 lo, hi;
  double density = 0.0;
};

struct MacroPopulation {
  std::string type;
  std::vector<DensityBlock> blocks;
  bool from_micro = false; ///< rasterized micro groups of the same type
};

struct MacroSpec {
  std::vector<MacroPopulation> populations;
  long long max_walk_steps = 2'000'000'000LL;
  double stop_mass = 1e-9; ///< a run ends once the interior mass drops below this
};

struct AnalysisSpec {
  RasterOptions raster;
  double rho_ref = -1.0; ///< <= 0: the largest rasterized density of the micro run
  bool has_upstream_window = false;
  Vec2 upstream_lo, upstream_hi;
  long upstream_from = 0; ///< steps averaged over the window, inclusive
  long upstream_to = -1;  ///< -1: to the end of the run
  JamParams jam;
  double jam_contact_eps_rel = 1e-3; ///< contact threshold of the jamming report, units of r
  bool stop_on_jam = true;
};

struct OutputSpec {
  long stride = 10;
  bool pgm = true;
};

struct Scenario {
  std::string name = "scenario";
  Model model = Model::micro;
  std::uint64_t seed = 0;
  double tau = 0.02;
  long steps = 1000;
  double resolution = 0.1;
  Room room;
  std::vector<TypeSpec> types;
  MicroSpec micro;
  MacroSpec macro;
  AnalysisSpec analysis;
  OutputSpec output;

  int type_index(const std::string &name) const; ///< -1 if unknown
  bool has_micro() const { return model != Model::macro; }
  bool has_macro() const { return model != Model::micro; }
};

/// Child seeds of the scenario seed, one per consumer:
///   placement  = derive_seed(seed, 1)  random micro fills
///   projection = derive_seed(seed, 2)  macro correction, then per step
///                projection_seed(projection, step)
struct SeedStreams {
  std::uint64_t placement;
  std::uint64_t projection;
};
SeedStreams split_seed(std::uint64_t seed);

/// Reads a scenario from JSON (comments allowed). Every error names the
/// offending field, e.g. "micro.groups[1].lattice.count: must be >= 1".
Scenario parse_scenario(const nlohmann::json &doc);
Scenario load_scenario(const std::filesystem::path &path);

/// Checks cross-field consistency (references, CFL, densities). Geometry of
/// the initial micro configuration is checked when it is materialized.
void validate(const Scenario &s);

/// Every field with its resolved value; parse_scenario(to_json(s)) == s.
nlohmann::json to_json(const Scenario &s);

std::string to_string(Model m);
std::string to_string(Strategy s);

} // namespace crowd
