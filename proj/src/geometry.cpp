#include "crowd/geometry.hpp"

#include "crowd/error.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <queue>
#include <string>

namespace crowd {

namespace {

double orient(Vec2 a, Vec2 b, Vec2 c) { return cross(b - a, c - a); }

bool on_segment_collinear(Vec2 a, Vec2 b, Vec2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

double bbox_extent(const Polygon &poly) {
  double x0 = poly.front().x, x1 = x0, y0 = poly.front().y, y1 = y0;
  for (const Vec2 &v : poly) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  return std::max(x1 - x0, y1 - y0);
}

Segment edge(const Polygon &poly, std::size_t k) { return {poly[k], poly[(k + 1) % poly.size()]}; }

void check_simple(const Polygon &poly, const std::string &what) {
  const std::size_t n = poly.size();
  if (n < 3) throw InvalidArgument(what + ": polygon needs at least 3 vertices");
  const double scale = bbox_extent(poly);
  if (!(scale > 0.0) || std::abs(signed_area(poly)) <= 1e-12 * scale * scale)
    throw InvalidArgument(what + ": degenerate polygon (zero area)");
  for (std::size_t k = 0; k < n; ++k) {
    if (norm(poly[(k + 1) % n] - poly[k]) <= 1e-12 * scale)
      throw InvalidArgument(what + ": zero-length edge at vertex " + std::to_string(k));
  }
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const bool adjacent = (b == a + 1) || (a == 0 && b == n - 1);
      if (adjacent) continue;
      if (segments_intersect(edge(poly, a), edge(poly, b)))
        throw InvalidArgument(what + ": polygon is self-intersecting (edges " + std::to_string(a) + ", " +
                              std::to_string(b) + ")");
    }
  }
}

bool polygons_touch(const Polygon &p, const Polygon &q) {
  for (std::size_t a = 0; a < p.size(); ++a)
    for (std::size_t b = 0; b < q.size(); ++b)
      if (segments_intersect(edge(p, a), edge(q, b))) return true;
  return point_in_polygon(p, q.front()) || point_in_polygon(q, p.front());
}

// Parameter of p along s when p lies on s (within tol), else a negative value.
double param_on_segment(const Segment &s, Vec2 p, double tol) {
  const Vec2 d = s.b - s.a;
  const double len2 = norm2(d);
  const double t = dot(p - s.a, d) / len2;
  if (t < -tol || t > 1.0 + tol) return -1.0;
  if (distance(s, p) > tol * std::sqrt(len2)) return -1.0;
  return std::clamp(t, 0.0, 1.0);
}

} // namespace

Vec2 closest_point(const Segment &s, Vec2 p) {
  const Vec2 d = s.b - s.a;
  const double len2 = norm2(d);
  if (len2 == 0.0) return s.a;
  const double t = std::clamp(dot(p - s.a, d) / len2, 0.0, 1.0);
  return s.a + t * d;
}

double distance(const Segment &s, Vec2 p) { return norm(p - closest_point(s, p)); }

bool segments_intersect(const Segment &s, const Segment &t) {
  const double d1 = orient(t.a, t.b, s.a);
  const double d2 = orient(t.a, t.b, s.b);
  const double d3 = orient(s.a, s.b, t.a);
  const double d4 = orient(s.a, s.b, t.b);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment_collinear(t.a, t.b, s.a)) return true;
  if (d2 == 0 && on_segment_collinear(t.a, t.b, s.b)) return true;
  if (d3 == 0 && on_segment_collinear(s.a, s.b, t.a)) return true;
  if (d4 == 0 && on_segment_collinear(s.a, s.b, t.b)) return true;
  return false;
}

bool point_in_polygon(const Polygon &poly, Vec2 p) {
  bool inside = false;
  const std::size_t n = poly.size();
  for (std::size_t k = 0, l = n - 1; k < n; l = k++) {
    const Vec2 a = poly[k], b = poly[l];
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

double signed_area(const Polygon &poly) {
  double s = 0.0;
  const std::size_t n = poly.size();
  for (std::size_t k = 0; k < n; ++k) s += cross(poly[k], poly[(k + 1) % n]);
  return 0.5 * s;
}

void Room::validate() const {
  check_simple(outer, "room outer boundary");
  const double scale = bbox_extent(outer);
  for (std::size_t o = 0; o < obstacles.size(); ++o) {
    const std::string name = "obstacle " + std::to_string(o);
    check_simple(obstacles[o], name);
    for (const Vec2 &v : obstacles[o])
      if (!point_in_polygon(outer, v)) throw InvalidArgument(name + ": vertex outside the room");
    for (std::size_t a = 0; a < obstacles[o].size(); ++a)
      for (std::size_t b = 0; b < outer.size(); ++b)
        if (segments_intersect(edge(obstacles[o], a), edge(outer, b)))
          throw InvalidArgument(name + ": crosses the outer boundary");
    for (std::size_t p = 0; p < o; ++p)
      if (polygons_touch(obstacles[o], obstacles[p]))
        throw InvalidArgument(name + ": overlaps obstacle " + std::to_string(p));
  }
  for (std::size_t e = 0; e < exits.size(); ++e) {
    const std::string name = "exit " + std::to_string(e);
    if (norm(exits[e].b - exits[e].a) <= 1e-12 * scale) throw InvalidArgument(name + ": zero length");
    bool found = false;
    for (std::size_t k = 0; k < outer.size() && !found; ++k) {
      const Segment s = edge(outer, k);
      found = param_on_segment(s, exits[e].a, 1e-9) >= 0.0 && param_on_segment(s, exits[e].b, 1e-9) >= 0.0;
    }
    if (!found) throw InvalidArgument(name + ": does not lie on a single edge of the outer boundary");
  }
}

bool Room::contains(Vec2 p) const {
  if (!point_in_polygon(outer, p)) return false;
  for (const Polygon &o : obstacles)
    if (point_in_polygon(o, p)) return false;
  return true;
}

std::vector<Segment> Room::wall_segments() const {
  std::vector<Segment> walls;
  for (std::size_t k = 0; k < outer.size(); ++k) {
    const Segment s = edge(outer, k);
    const double len = norm(s.b - s.a);
    std::vector<std::pair<double, double>> cut;
    for (const Segment &ex : exits) {
      const double ta = param_on_segment(s, ex.a, 1e-9);
      const double tb = param_on_segment(s, ex.b, 1e-9);
      if (ta >= 0.0 && tb >= 0.0) cut.emplace_back(std::min(ta, tb), std::max(ta, tb));
    }
    std::sort(cut.begin(), cut.end());
    double t = 0.0;
    for (const auto &[c0, c1] : cut) {
      if ((c0 - t) * len > 1e-12 * len) walls.push_back({s.a + t * (s.b - s.a), s.a + c0 * (s.b - s.a)});
      t = std::max(t, c1);
    }
    if ((1.0 - t) * len > 1e-12 * len) walls.push_back({s.a + t * (s.b - s.a), s.b});
  }
  for (const Polygon &o : obstacles)
    for (std::size_t k = 0; k < o.size(); ++k) walls.push_back(edge(o, k));
  return walls;
}

Room rectangle_room(double x0, double y0, double x1, double y1) {
  Room room;
  room.outer = {{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
  return room;
}

Grid::Grid(int nx, int ny, double dx, double dy, Vec2 origin, std::vector<CellFlag> flags)
    : nx_(nx), ny_(ny), dx_(dx), dy_(dy), origin_(origin), flags_(std::move(flags)) {
  if (nx <= 0 || ny <= 0) throw InvalidArgument("grid: cell counts must be positive");
  if (!(dx > 0.0) || !(dy > 0.0)) throw InvalidArgument("grid: cell sizes must be positive");
  if (flags_.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny))
    throw InvalidArgument("grid: flag count does not match nx * ny");
}

void Grid::locate(Vec2 p, int &i, int &j) const {
  i = std::clamp(static_cast<int>(std::floor((p.x - origin_.x) / dx_)), 0, nx_ - 1);
  j = std::clamp(static_cast<int>(std::floor((p.y - origin_.y) / dy_)), 0, ny_ - 1);
}

std::size_t Grid::count(CellFlag f) const { return static_cast<std::size_t>(std::count(flags_.begin(), flags_.end(), f)); }

Grid build_grid(const Room &room, double resolution) {
  if (!(resolution > 0.0)) throw InvalidArgument("build_grid: resolution must be > 0");
  room.validate();
  double x0 = room.outer.front().x, x1 = x0, y0 = room.outer.front().y, y1 = y0;
  for (const Vec2 &v : room.outer) {
    x0 = std::min(x0, v.x);
    x1 = std::max(x1, v.x);
    y0 = std::min(y0, v.y);
    y1 = std::max(y1, v.y);
  }
  const int nx = std::max(1, static_cast<int>(std::ceil((x1 - x0) / resolution - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil((y1 - y0) / resolution - 1e-9)));
  const double dx = (x1 - x0) / nx;
  const double dy = (y1 - y0) / ny;
  const double exit_reach = 0.5 * std::max(dx, dy) * (1.0 + 1e-9);

  std::vector<CellFlag> flags(static_cast<std::size_t>(nx) * ny, CellFlag::wall);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const Vec2 c{x0 + (i + 0.5) * dx, y0 + (j + 0.5) * dy};
      CellFlag f = room.contains(c) ? CellFlag::interior : CellFlag::wall;
      if (f == CellFlag::interior) {
        for (const Segment &e : room.exits)
          if (distance(e, c) <= exit_reach) f = CellFlag::exit;
      }
      flags[static_cast<std::size_t>(j) * nx + i] = f;
    }
  }
  return Grid(nx, ny, dx, dy, {x0, y0}, std::move(flags));
}

std::size_t DistanceField::unreachable_count(const Grid &grid) const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < value.size(); ++k)
    if (grid.flag(k) != CellFlag::wall && !(value[k] < std::numeric_limits<double>::infinity())) ++n;
  return n;
}

namespace {

// Walks the cells crossed by the segment between two cell centers; false if
// any of them (or both side cells at an exact corner crossing) is a wall.
bool line_of_sight(const Grid &g, int ia, int ja, int ib, int jb) {
  const double px = ia + 0.5, py = ja + 0.5;
  const int sx = (ib > ia) - (ib < ia);
  const int sy = (jb > ja) - (jb < ja);
  // Parametrize in cell units; t in [0, 1].
  const double ux = static_cast<double>(ib - ia), uy = static_cast<double>(jb - ja);
  const double inf = std::numeric_limits<double>::infinity();
  double tmax_x = sx != 0 ? ((sx > 0 ? ia + 1.0 : ia) - px) / ux : inf;
  double tmax_y = sy != 0 ? ((sy > 0 ? ja + 1.0 : ja) - py) / uy : inf;
  const double tdel_x = sx != 0 ? 1.0 / std::abs(ux) : inf;
  const double tdel_y = sy != 0 ? 1.0 / std::abs(uy) : inf;
  int i = ia, j = ja;
  const int max_steps = std::abs(ib - ia) + std::abs(jb - ja) + 2;
  for (int step = 0; step < max_steps && !(i == ib && j == jb); ++step) {
    const double diff = tmax_x - tmax_y;
    if (std::abs(diff) <= 1e-12) {
      if (!g.in_bounds(i + sx, j) || !g.in_bounds(i, j + sy) || g.flag(i + sx, j) == CellFlag::wall ||
          g.flag(i, j + sy) == CellFlag::wall)
        return false;
      i += sx;
      j += sy;
      tmax_x += tdel_x;
      tmax_y += tdel_y;
    } else if (diff < 0.0) {
      i += sx;
      tmax_x += tdel_x;
    } else {
      j += sy;
      tmax_y += tdel_y;
    }
    if (!g.in_bounds(i, j) || g.flag(i, j) == CellFlag::wall) return false;
  }
  return true;
}

} // namespace

DistanceField compute_distance_field(const Grid &grid) {
  const int nx = grid.nx(), ny = grid.ny();
  const double inf = std::numeric_limits<double>::infinity();
  DistanceField out{nx, ny, std::vector<double>(grid.size(), inf)};
  std::vector<std::size_t> anchor(grid.size());
  std::vector<char> done(grid.size(), 0);

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.flag(k) == CellFlag::exit) {
      out.value[k] = 0.0;
      anchor[k] = k;
      open.emplace(0.0, k);
    }
  }
  if (open.empty()) throw InvalidArgument("compute_distance_field: the grid has no exit cell");

  auto center = [&](std::size_t k) {
    return grid.center(static_cast<int>(k % nx), static_cast<int>(k / nx));
  };

  while (!open.empty()) {
    const auto [dist, k] = open.top();
    open.pop();
    if (done[k]) continue;
    done[k] = 1;
    const int i = static_cast<int>(k % nx), j = static_cast<int>(k / nx);
    const std::size_t a = anchor[k];
    const int ia = static_cast<int>(a % nx), ja = static_cast<int>(a / nx);
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        const int ni = i + di, nj = j + dj;
        if (!grid.in_bounds(ni, nj) || grid.flag(ni, nj) == CellFlag::wall) continue;
        // No corner cutting between two wall cells.
        if (di != 0 && dj != 0 &&
            (grid.flag(i + di, j) == CellFlag::wall || grid.flag(i, j + dj) == CellFlag::wall))
          continue;
        const std::size_t n = grid.index(ni, nj);
        if (done[n]) continue;
        double cand;
        std::size_t cand_anchor;
        if (a != k && line_of_sight(grid, ia, ja, ni, nj)) {
          cand = out.value[a] + norm(center(n) - center(a));
          cand_anchor = a;
        } else {
          cand = dist + norm(center(n) - center(k));
          cand_anchor = k;
        }
        if (cand < out.value[n]) {
          out.value[n] = cand;
          anchor[n] = cand_anchor;
          open.emplace(cand, n);
        }
      }
    }
  }
  return out;
}

double VelocityField::max_speed() const {
  double m = 0.0;
  for (const Vec2 &v : value) m = std::max(m, norm(v));
  return m;
}

VelocityField desired_velocity_from_distance(const Grid &grid, const DistanceField &distance, double speed,
                                             bool normalize) {
  if (distance.nx != grid.nx() || distance.ny != grid.ny())
    throw InvalidArgument("desired_velocity_from_distance: field does not match grid");
  const int nx = grid.nx(), ny = grid.ny();
  VelocityField out{nx, ny, std::vector<Vec2>(grid.size())};
  auto usable = [&](int i, int j) {
    return grid.in_bounds(i, j) && grid.flag(i, j) != CellFlag::wall && distance.reachable(i, j);
  };
  auto derivative = [&](int i, int j, int di, int dj, double h) {
    const bool lo = usable(i - di, j - dj), hi = usable(i + di, j + dj);
    if (lo && hi) return (distance.at(i + di, j + dj) - distance.at(i - di, j - dj)) / (2.0 * h);
    if (hi) return (distance.at(i + di, j + dj) - distance.at(i, j)) / h;
    if (lo) return (distance.at(i, j) - distance.at(i - di, j - dj)) / h;
    return 0.0;
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (!usable(i, j)) continue;
      const Vec2 g{derivative(i, j, 1, 0, grid.dx()), derivative(i, j, 0, 1, grid.dy())};
      const double gn = norm(g);
      if (gn <= 1e-12) continue;
      Vec2 u = normalize ? (-speed / gn) * g : -speed * g;
      if (!normalize && norm(u) > speed) u = (speed / norm(u)) * u;
      out.at(i, j) = u;
    }
  }
  return out;
}

VelocityField uniform_velocity(const Grid &grid, Vec2 u) {
  VelocityField out{grid.nx(), grid.ny(), std::vector<Vec2>(grid.size())};
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (grid.flag(k) != CellFlag::wall) out.value[k] = u;
  return out;
}

Vec2 sample_velocity(const Grid &grid, const VelocityField &field, Vec2 p) {
  const int nx = grid.nx(), ny = grid.ny();
  const double fx = std::clamp((p.x - grid.origin().x) / grid.dx() - 0.5, 0.0, static_cast<double>(nx - 1));
  const double fy = std::clamp((p.y - grid.origin().y) / grid.dy() - 0.5, 0.0, static_cast<double>(ny - 1));
  const int i0 = std::min(static_cast<int>(fx), std::max(nx - 2, 0));
  const int j0 = std::min(static_cast<int>(fy), std::max(ny - 2, 0));
  const int i1 = std::min(i0 + 1, nx - 1), j1 = std::min(j0 + 1, ny - 1);
  const double tx = fx - i0, ty = fy - j0;
  const Vec2 bottom = (1.0 - tx) * field.at(i0, j0) + tx * field.at(i1, j0);
  const Vec2 top = (1.0 - tx) * field.at(i0, j1) + tx * field.at(i1, j1);
  return (1.0 - ty) * bottom + ty * top;
}

void write_csv(std::ostream &os, const DistanceField &d) {
  for (int j = 0; j < d.ny; ++j) {
    for (int i = 0; i < d.nx; ++i) {
      if (i) os << ',';
      if (d.reachable(i, j))
        os << d.at(i, j);
      else
        os << "inf";
    }
    os << '\n';
  }
}

} // namespace crowd
