#pragma once

#include "crowd/geometry.hpp"
#include "crowd/micro.hpp"
#include "crowd/spatial.hpp"

#include <numbers>
#include <span>
#include <vector>

namespace crowd {

enum class Strategy { none, decelerate, bypass };

struct BehaviorParams {
  double proximity_range = 0.5;               ///< l_prox, meters
  double view_half_angle = std::numbers::pi / 3; ///< radians
  Strategy strategy = Strategy::none;
  int field = 0; ///< index of the desired velocity field for this type

  void validate() const;
};

/// Disks j != i with |q_i - q_j| < 2r + l_prox and d_i . e_ij >= cos(alpha).
/// Empty when d_i vanishes.
std::vector<int> neighbor_set(const Configuration &q, int i, Vec2 direction, const BehaviorParams &params);
std::vector<int> neighbor_set(const Configuration &q, const SpatialBins &bins, int i, Vec2 direction,
                              const BehaviorParams &params);

/// Weight of neighbor j in the speed barycenter: angular alignment times a
/// linear proximity falloff, 1 at dead-ahead contact and 0 on the boundary of
/// the neighbor region.
double deceleration_weight(const Configuration &q, int i, int j, Vec2 direction, const BehaviorParams &params);

/// Barycenter of the neighbors' previous speeds, used only when it is below
/// the agent's own desired speed.
double decelerate(const Configuration &q, int i, std::span<const int> neighbors, Vec2 direction,
                  std::span<const double> previous_speeds, double desired_speed, const BehaviorParams &params);

/// New unit direction for an agent that keeps its speed and walks around its
/// neighbors. Each neighbor blocks the cone of headings along which disk i
/// would touch it (half-width asin(2r / distance)). If the wanted heading is
/// free it is kept; otherwise the closest free heading through a gap between
/// neighbors is taken, and failing that the closer of the two tangents around
/// the whole group (left on ties).
Vec2 bypass(const Configuration &q, int i, std::span<const int> neighbors, Vec2 direction,
            const BehaviorParams &params);

/// Samples each disk's own field and applies its type's strategy. Previous
/// speeds are read from state.velocity. Exited disks get zero.
std::vector<Vec2> assign_desired(const Grid &grid, const MicroState &state, std::span<const int> types,
                                 std::span<const VelocityField> fields, std::span<const BehaviorParams> per_type);

} // namespace crowd
