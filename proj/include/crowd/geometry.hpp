#pragma once

#include "crowd/vec2.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <vector>

namespace crowd {

using Polygon = std::vector<Vec2>;

struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Closest point of segment `s` to `p`.
Vec2 closest_point(const Segment &s, Vec2 p);
double distance(const Segment &s, Vec2 p);
/// True if the closed segments intersect (touching counts).
bool segments_intersect(const Segment &s, const Segment &t);
/// Even-odd point-in-polygon test; points on an edge may land either way.
bool point_in_polygon(const Polygon &poly, Vec2 p);
double signed_area(const Polygon &poly);

/// Polygonal room: outer wall loop, interior obstacles and exit segments lying
/// on the outer loop. Walls are every boundary edge not covered by an exit.
struct Room {
  Polygon outer;
  std::vector<Polygon> obstacles;
  std::vector<Segment> exits;

  /// Throws InvalidArgument on a degenerate/self-intersecting outer loop,
  /// obstacles outside the room or overlapping, or exits off the boundary.
  void validate() const;
  /// Point is inside the outer loop and outside every obstacle.
  bool contains(Vec2 p) const;
  /// Wall segments seen by the disks: outer edges minus exit spans, plus all
  /// obstacle edges.
  std::vector<Segment> wall_segments() const;
};

/// Axis-aligned rectangle room [x0, x1] x [y0, y1] with no obstacles.
Room rectangle_room(double x0, double y0, double x1, double y1);

enum class CellFlag : std::uint8_t { interior, wall, exit };

/// Regular cell grid covering the bounding box of a room. Cell (i, j) has its
/// lower-left corner at origin + (i dx, j dy); storage is row-major in j.
class Grid {
public:
  Grid() = default;
  Grid(int nx, int ny, double dx, double dy, Vec2 origin, std::vector<CellFlag> flags);

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  double dx() const { return dx_; }
  double dy() const { return dy_; }
  double cell_area() const { return dx_ * dy_; }
  Vec2 origin() const { return origin_; }
  std::size_t size() const { return flags_.size(); }

  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx_) + static_cast<std::size_t>(i);
  }
  bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
  Vec2 center(int i, int j) const { return {origin_.x + (i + 0.5) * dx_, origin_.y + (j + 0.5) * dy_}; }
  CellFlag flag(int i, int j) const { return flags_[index(i, j)]; }
  CellFlag flag(std::size_t k) const { return flags_[k]; }
  const std::vector<CellFlag> &flags() const { return flags_; }

  /// Cell containing `p`, clamped to the grid.
  void locate(Vec2 p, int &i, int &j) const;
  std::size_t count(CellFlag f) const;

private:
  int nx_ = 0;
  int ny_ = 0;
  double dx_ = 1.0;
  double dy_ = 1.0;
  Vec2 origin_;
  std::vector<CellFlag> flags_;
};

/// Cells tile the room's bounding box exactly; the requested resolution is an
/// upper bound on the cell size. A cell is wall if its center is outside the
/// room, exit if its center is inside and within half a cell of an exit.
Grid build_grid(const Room &room, double resolution);

/// Geodesic distance to the exit cells, +inf where no exit is reachable.
struct DistanceField {
  int nx = 0;
  int ny = 0;
  std::vector<double> value;

  double at(int i, int j) const { return value[static_cast<std::size_t>(j) * nx + i]; }
  bool reachable(int i, int j) const { return at(i, j) < std::numeric_limits<double>::infinity(); }
  std::size_t unreachable_count(const Grid &grid) const;
};

/// Distance to the exit set avoiding wall cells. Dijkstra over the 8-neighbor
/// cell graph, where each relaxation also tries the straight segment to the
/// predecessor's anchor cell when it is visible, so paths are not restricted
/// to the eight lattice directions.
DistanceField compute_distance_field(const Grid &grid);

/// Per-cell desired velocity, zero on wall cells.
struct VelocityField {
  int nx = 0;
  int ny = 0;
  std::vector<Vec2> value;

  Vec2 at(int i, int j) const { return value[static_cast<std::size_t>(j) * nx + i]; }
  Vec2 &at(int i, int j) { return value[static_cast<std::size_t>(j) * nx + i]; }
  double max_speed() const;
};

/// U = -speed * grad D / |grad D| (or -speed * grad D, capped at `speed`,
/// when `normalize` is false). Central differences, one-sided next to walls
/// and unreachable cells; zero where the gradient vanishes.
VelocityField desired_velocity_from_distance(const Grid &grid, const DistanceField &distance,
                                             double speed, bool normalize = true);

/// Same vector everywhere off walls.
VelocityField uniform_velocity(const Grid &grid, Vec2 u);

/// Bilinear interpolation between cell centers; points beyond the outermost
/// centers are clamped.
Vec2 sample_velocity(const Grid &grid, const VelocityField &field, Vec2 p);

/// CSV grid, one line per row j (bottom row first), `inf` for unreachable.
void write_csv(std::ostream &os, const DistanceField &d);

} // namespace crowd
