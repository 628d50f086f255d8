#include "crowd/micro.hpp"

#include "crowd/error.hpp"
#include "crowd/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <omp.h>

namespace crowd {

Configuration::Configuration(std::vector<Vec2> q, double r)
    : positions(std::move(q)), radius(r), exited(positions.size(), 0) {
  if (!(r > 0.0)) throw InvalidArgument("Configuration: radius must be > 0");
}

std::size_t Configuration::active_count() const {
  return static_cast<std::size_t>(std::count(exited.begin(), exited.end(), std::uint8_t{0}));
}

ContactConstraint gap_and_gradient(const Configuration &q, int i, int j) {
  if (i == j) throw InvalidArgument("gap_and_gradient: i == j");
  const Vec2 d = q.positions[j] - q.positions[i];
  const double len = norm(d);
  if (!(len > 1e-12 * q.radius))
    throw InvalidArgument("gap_and_gradient: coincident centers for disks " + std::to_string(i) + " and " +
                          std::to_string(j));
  const Vec2 e = d / len;
  ContactConstraint c;
  c.kind = ContactKind::disk;
  c.i = std::min(i, j);
  c.j = std::max(i, j);
  c.gap = len - 2.0 * q.radius;
  // Gradient is -e at the first slot and +e at the second, in (i, j) order.
  c.grad_i = i < j ? -e : e;
  c.grad_j = i < j ? e : -e;
  return c;
}

ContactConstraint wall_gap_and_gradient(const Configuration &q, int i, const Segment &wall, int wall_index) {
  const Vec2 p = q.positions[i];
  const Vec2 c = closest_point(wall, p);
  const double len = norm(p - c);
  if (!(len > 1e-12 * q.radius))
    throw InvalidArgument("wall_gap_and_gradient: center of disk " + std::to_string(i) + " lies on wall " +
                          std::to_string(wall_index));
  ContactConstraint out;
  out.kind = ContactKind::wall;
  out.i = i;
  out.j = wall_index;
  out.gap = len - q.radius;
  out.grad_i = (p - c) / len;
  return out;
}

namespace {

void sort_by_key(ActiveSet &set) {
  std::sort(set.begin(), set.end(),
            [](const ContactConstraint &a, const ContactConstraint &b) { return a.key() < b.key(); });
}

void add_walls(const Configuration &q, std::span<const Segment> walls, int i, double eps, ActiveSet &out) {
  for (std::size_t w = 0; w < walls.size(); ++w) {
    if (distance(walls[w], q.positions[i]) - q.radius <= eps)
      out.push_back(wall_gap_and_gradient(q, i, walls[w], static_cast<int>(w)));
  }
}

} // namespace

ActiveSet active_constraints(const Configuration &q, std::span<const Segment> walls, double eps) {
  if (eps < 0.0) throw InvalidArgument("active_constraints: eps must be >= 0");
  const double reach = 2.0 * q.radius + eps;
  const SpatialBins bins(q.positions, q.exited, reach);
  const int n = static_cast<int>(q.size());
  ActiveSet out;
#pragma omp parallel if (n > 512)
  {
    ActiveSet local;
#pragma omp for schedule(static) nowait
    for (int i = 0; i < n; ++i) {
      if (!q.active(i)) continue;
      bins.for_each_candidate(q.positions[i], reach, [&](int j) {
        if (j <= i) return;
        if (norm(q.positions[j] - q.positions[i]) - 2.0 * q.radius <= eps) local.push_back(gap_and_gradient(q, i, j));
      });
      add_walls(q, walls, i, eps, local);
    }
#pragma omp critical
    out.insert(out.end(), local.begin(), local.end());
  }
  sort_by_key(out);
  return out;
}

namespace reference {

ActiveSet active_constraints(const Configuration &q, std::span<const Segment> walls, double eps) {
  if (eps < 0.0) throw InvalidArgument("active_constraints: eps must be >= 0");
  ActiveSet out;
  const int n = static_cast<int>(q.size());
  for (int i = 0; i < n; ++i) {
    if (!q.active(i)) continue;
    for (int j = i + 1; j < n; ++j) {
      if (!q.active(j)) continue;
      if (norm(q.positions[j] - q.positions[i]) - 2.0 * q.radius <= eps) out.push_back(gap_and_gradient(q, i, j));
    }
    add_walls(q, walls, i, eps, out);
  }
  sort_by_key(out);
  return out;
}

} // namespace reference

double prox_regularity_bound(long n, double r) {
  if (n < 2) throw InvalidArgument("prox_regularity_bound: needs at least two disks");
  if (!(r > 0.0)) throw InvalidArgument("prox_regularity_bound: radius must be > 0");
  const double nd = static_cast<double>(n);
  return r * std::sqrt(12.0 / (nd * (nd - 1.0) * (nd + 1.0)));
}

std::vector<ContactPressure> pressures(const SaddleSolution &solution, const ActiveSet &constraints, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("pressures: tau must be > 0");
  std::vector<ContactPressure> out;
  out.reserve(constraints.size());
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const ContactConstraint &c = constraints[k];
    out.push_back({c.kind, c.i, c.j, solution.multipliers[k] / tau});
  }
  return out;
}

MicroWorld MicroWorld::from_room(const Room &room) { return {room.wall_segments(), room.exits}; }

std::pair<double, double> min_gaps(const Configuration &q, std::span<const Segment> walls) {
  const int n = static_cast<int>(q.size());
  double disk = std::numeric_limits<double>::infinity();
  double wall = std::numeric_limits<double>::infinity();
#pragma omp parallel for reduction(min : disk, wall) schedule(dynamic, 16) if (n > 512)
  for (int i = 0; i < n; ++i) {
    if (!q.active(i)) continue;
    for (int j = i + 1; j < n; ++j)
      if (q.active(j)) disk = std::min(disk, norm(q.positions[j] - q.positions[i]) - 2.0 * q.radius);
    for (const Segment &s : walls) wall = std::min(wall, distance(s, q.positions[i]) - q.radius);
  }
  return {disk, wall};
}

} // namespace crowd
