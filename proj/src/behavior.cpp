#include "crowd/behavior.hpp"

#include "crowd/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crowd {

void BehaviorParams::validate() const {
  if (!(proximity_range >= 0.0)) throw InvalidArgument("behavior: proximity_range must be >= 0");
  if (!(view_half_angle > 0.0 && view_half_angle < std::numbers::pi))
    throw InvalidArgument("behavior: view_half_angle must lie in (0, pi)");
}

namespace {

bool is_neighbor(const Configuration &q, int i, int j, Vec2 d, double cos_alpha, double reach) {
  if (j == i || !q.active(j)) return false;
  const Vec2 v = q.positions[j] - q.positions[i];
  const double dist = norm(v);
  if (!(dist < reach) || dist == 0.0) return false;
  return dot(d, v / dist) >= cos_alpha;
}

Vec2 unit_or_zero(Vec2 d) {
  const double n = norm(d);
  return n > 0.0 ? d / n : Vec2{};
}

} // namespace

std::vector<int> neighbor_set(const Configuration &q, int i, Vec2 direction, const BehaviorParams &params) {
  std::vector<int> out;
  const Vec2 d = unit_or_zero(direction);
  if (d == Vec2{}) return out;
  const double reach = 2.0 * q.radius + params.proximity_range;
  const double ca = std::cos(params.view_half_angle);
  for (int j = 0; j < static_cast<int>(q.size()); ++j)
    if (is_neighbor(q, i, j, d, ca, reach)) out.push_back(j);
  return out;
}

std::vector<int> neighbor_set(const Configuration &q, const SpatialBins &bins, int i, Vec2 direction,
                              const BehaviorParams &params) {
  std::vector<int> out;
  const Vec2 d = unit_or_zero(direction);
  if (d == Vec2{}) return out;
  const double reach = 2.0 * q.radius + params.proximity_range;
  const double ca = std::cos(params.view_half_angle);
  bins.for_each_candidate(q.positions[i], reach, [&](int j) {
    if (is_neighbor(q, i, j, d, ca, reach)) out.push_back(j);
  });
  std::sort(out.begin(), out.end());
  return out;
}

double deceleration_weight(const Configuration &q, int i, int j, Vec2 direction, const BehaviorParams &params) {
  const Vec2 d = unit_or_zero(direction);
  const Vec2 v = q.positions[j] - q.positions[i];
  const double dist = norm(v);
  const double ca = std::cos(params.view_half_angle);
  const double angular = std::clamp((dot(d, v / dist) - ca) / (1.0 - ca), 0.0, 1.0);
  const double proximity =
      params.proximity_range > 0.0
          ? std::clamp(1.0 - (dist - 2.0 * q.radius) / params.proximity_range, 0.0, 1.0)
          : 1.0;
  return angular * proximity;
}

double decelerate(const Configuration &q, int i, std::span<const int> neighbors, Vec2 direction,
                  std::span<const double> previous_speeds, double desired_speed, const BehaviorParams &params) {
  double wsum = 0.0, acc = 0.0;
  for (int j : neighbors) {
    const double w = deceleration_weight(q, i, j, direction, params);
    wsum += w;
    acc += w * previous_speeds[j];
  }
  if (!(wsum > 0.0)) return desired_speed;
  const double s = acc / wsum;
  return s < desired_speed ? std::max(0.0, s) : desired_speed;
}

Vec2 bypass(const Configuration &q, int i, std::span<const int> neighbors, Vec2 direction,
            const BehaviorParams &params) {
  (void)params;
  const Vec2 d = unit_or_zero(direction);
  if (neighbors.empty() || d == Vec2{}) return d;
  const double r = q.radius;
  const Vec2 p = q.positions[i];

  // Blocked heading intervals, as angles measured from d (counter-clockwise).
  std::vector<std::pair<double, double>> blocked;
  blocked.reserve(neighbors.size());
  for (int j : neighbors) {
    const Vec2 v = q.positions[j] - p;
    const double dist = norm(v);
    if (dist < 2.0 * r * (1.0 - 1e-9))
      throw InvalidArgument("bypass: disks " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
    const double half = std::asin(std::min(1.0, 2.0 * r / dist));
    const double theta = std::atan2(cross(d, v), dot(d, v));
    blocked.emplace_back(theta - half, theta + half);
  }
  std::sort(blocked.begin(), blocked.end());
  std::vector<std::pair<double, double>> merged;
  for (const auto &iv : blocked) {
    if (!merged.empty() && iv.first <= merged.back().second)
      merged.back().second = std::max(merged.back().second, iv.second);
    else
      merged.push_back(iv);
  }

  const bool straight_blocked =
      std::any_of(merged.begin(), merged.end(), [](const auto &iv) { return iv.first < 0.0 && 0.0 < iv.second; });
  if (!straight_blocked) return d;

  // Closest heading among the candidates, left preferred on ties.
  auto pick = [](double best, double cand) {
    if (std::abs(cand) < std::abs(best)) return cand;
    if (std::abs(cand) == std::abs(best)) return std::max(best, cand);
    return best;
  };
  double angle = 0.0;
  bool found = false;
  for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
    const double a = merged[k].second, b = merged[k + 1].first;
    angle = found ? pick(pick(angle, a), b) : pick(a, b);
    found = true;
  }
  if (!found) angle = pick(merged.front().first, merged.back().second);
  return rotate(d, angle);
}

std::vector<Vec2> assign_desired(const Grid &grid, const MicroState &state, std::span<const int> types,
                                 std::span<const VelocityField> fields, std::span<const BehaviorParams> per_type) {
  const Configuration &q = state.config;
  const int n = static_cast<int>(q.size());
  if (types.size() != q.size()) throw InvalidArgument("assign_desired: one type per disk is required");
  for (int i = 0; i < n; ++i) {
    if (types[i] < 0 || types[i] >= static_cast<int>(per_type.size()))
      throw InvalidArgument("assign_desired: disk " + std::to_string(i) + " has unknown type " +
                            std::to_string(types[i]));
  }
  for (std::size_t t = 0; t < per_type.size(); ++t) {
    per_type[t].validate();
    if (per_type[t].field < 0 || per_type[t].field >= static_cast<int>(fields.size()))
      throw InvalidArgument("assign_desired: type " + std::to_string(t) + " refers to missing field " +
                            std::to_string(per_type[t].field));
  }

  double reach = 0.0;
  bool any_strategy = false;
  for (const BehaviorParams &bp : per_type) {
    reach = std::max(reach, 2.0 * q.radius + bp.proximity_range);
    any_strategy = any_strategy || bp.strategy != Strategy::none;
  }
  SpatialBins bins;
  std::vector<double> speeds;
  if (any_strategy) {
    bins = SpatialBins(q.positions, q.exited, reach);
    speeds.resize(q.size());
    for (std::size_t j = 0; j < q.size(); ++j) speeds[j] = j < state.velocity.size() ? norm(state.velocity[j]) : 0.0;
  }

  std::vector<Vec2> out(q.size());
#pragma omp parallel for schedule(dynamic, 64) if (n > 1024)
  for (int i = 0; i < n; ++i) {
    if (!q.active(i)) continue;
    const BehaviorParams &bp = per_type[types[i]];
    const Vec2 u = sample_velocity(grid, fields[bp.field], q.positions[i]);
    const double speed = norm(u);
    if (bp.strategy == Strategy::none || speed == 0.0) {
      out[i] = u;
      continue;
    }
    const Vec2 d = u / speed;
    const std::vector<int> nb = neighbor_set(q, bins, i, d, bp);
    const double s = decelerate(q, i, nb, d, speeds, speed, bp);
    if (s >= speed) {
      out[i] = u; // neighbors are not slower: nothing to adapt to
    } else if (bp.strategy == Strategy::decelerate) {
      out[i] = s * d;
    } else {
      out[i] = speed * bypass(q, i, nb, d, bp);
    }
  }
  return out;
}

} // namespace crowd
