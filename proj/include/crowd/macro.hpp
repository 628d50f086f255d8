#pragma once

#include "crowd/geometry.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace crowd {

/// Densities of one or more populations on a grid. Values are dimensionless
/// (1 = saturated); absorbed amounts are masses, i.e. density times cell area,
/// kept per exit cell.
struct MacroState {
  std::vector<std::vector<double>> density; ///< [population][cell]
  std::vector<std::vector<double>> absorbed; ///< [population][cell], nonzero on exit cells only
  double time = 0.0;
  long step = 0;

  MacroState() = default;
  MacroState(const Grid &grid, int populations);

  int populations() const { return static_cast<int>(density.size()); }
};

/// Mass of one population still in the room.
double interior_mass(const Grid &grid, const MacroState &state, int population);
double absorbed_mass(const MacroState &state, int population);
/// Sum over populations.
double interior_mass(const Grid &grid, const MacroState &state);
double absorbed_mass(const MacroState &state);

struct TransportOptions {
  bool periodic_x = false; ///< wrap in x, for test strips
};

/// Largest tau * |U| over non-wall cells; must not exceed min(dx, dy).
void check_cfl(const Grid &grid, const VelocityField &u, double tau);

/// Moves every cell rigidly by tau * U(center) and spreads its mass over the
/// (at most four) cells the translated square overlaps, in proportion to the
/// overlap areas. Shares that would land on wall cells or outside the grid
/// stay in the source cell; shares landing on exit cells are added to
/// `absorbed` (mass units). The result may exceed 1. OpenMP gather.
std::vector<double> transport_density(const Grid &grid, std::span<const double> rho, const VelocityField &u,
                                      double tau, std::span<double> absorbed, const TransportOptions &opts = {});

namespace reference {
/// Serial scatter version of transport_density.
std::vector<double> transport_density(const Grid &grid, std::span<const double> rho, const VelocityField &u,
                                      double tau, std::span<double> absorbed, const TransportOptions &opts = {});
} // namespace reference

struct ProjectionParams {
  std::uint64_t seed = 0;
  /// Bound on the total number of walk steps in one correction.
  long long max_walk_steps = 2'000'000'000LL;
  bool periodic_x = false;
};

/// Per-cell mass (density units) emitted during one correction.
using Odometer = std::vector<double>;

/// Redistributes the excess of every cell whose total density exceeds 1 by a
/// random walk. Sources are visited in row-major order. A walker steps to one
/// of the four neighbors uniformly; a step toward a wall cell or off the grid
/// leaves it in place, an exit cell absorbs everything it carries. Each
/// unsaturated cell visited is filled up to 1 before the walk goes on. An
/// excess above one cell's capacity leaves in several walkers of at most that
/// amount, one after the other.
///
/// With several populations the walker carries a mix taken from the source in
/// proportion to the local shares and deposits it in proportion to what it
/// carries; the joint constraint is sum over populations <= 1.
///
/// Throws SolverError when the excess cannot be placed (no exit and not enough
/// room, or the step bound is reached).
Odometer stochastic_project(const Grid &grid, std::vector<std::vector<double>> &density,
                            std::vector<std::vector<double>> &absorbed, const ProjectionParams &params);

/// Single-population convenience overload.
Odometer stochastic_project(const Grid &grid, std::vector<double> &density, std::vector<double> &absorbed,
                            const ProjectionParams &params);

/// The odometer is the discrete pressure; a window sum is just the sum of the
/// per-step odometers.
std::vector<double> pressure_from_odometer(std::span<const Odometer> window);

/// Speed modulation alpha(rho) in [0, 1], non-increasing, alpha(0) = 1.
using SpeedFactor = std::function<double(double)>;

/// U scaled per cell by alpha of the total density in the downstream cell, the
/// neighbor (8-connected) closest to U's direction. Wall or off-grid
/// downstream cells fall back to the cell itself. Throws InvalidArgument if
/// alpha leaves [0, 1].
VelocityField density_dependent_velocity(const Grid &grid, std::span<const double> rho, const VelocityField &u,
                                         const SpeedFactor &alpha);

struct MacroStepReport {
  Odometer odometer;
  std::vector<double> absorbed_this_step; ///< per population, mass
};

/// Transport of each population by its own field, then one shared
/// correction. The projection seed is derived from params.seed and the step
/// index.
MacroState step_macro(const Grid &grid, const MacroState &state, double tau, std::span<const VelocityField> fields,
                      const ProjectionParams &params, MacroStepReport *report = nullptr,
                      const TransportOptions &opts = {});

/// Seed of the correction at a given step.
std::uint64_t projection_seed(std::uint64_t base, long step);

} // namespace crowd
