#include "crowd/analysis.hpp"

#include "crowd/error.hpp"
#include "crowd/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <omp.h>
#include <string>

namespace crowd {

namespace {

// Integral of sqrt(r^2 - x^2) from 0 to x.
double half_chord_primitive(double x, double r) {
  const double t = std::clamp(x / r, -1.0, 1.0);
  const double xc = t * r;
  return 0.5 * (xc * std::sqrt(std::max(0.0, r * r - xc * xc)) + r * r * std::asin(t));
}

double chord_integral(double lo, double hi, double r) {
  lo = std::max(lo, -r);
  hi = std::min(hi, r);
  return hi > lo ? half_chord_primitive(hi, r) - half_chord_primitive(lo, r) : 0.0;
}

// Area of the centered disk intersected with the quadrant {X <= x, Y <= y}.
double quadrant_area(double x, double y, double r) {
  if (x <= -r || y <= -r) return 0.0;
  const double xc = std::min(x, r);
  if (y >= r) return 2.0 * chord_integral(-r, xc, r);
  const double a = std::sqrt(r * r - y * y);
  // For |X| < a the column is cut at height y; outside it is either whole
  // (y >= 0) or empty (y < 0).
  double s = y * std::max(0.0, std::min(xc, a) + a) + chord_integral(-a, std::min(xc, a), r);
  if (y >= 0.0) s += 2.0 * (chord_integral(-r, std::min(xc, -a), r) + chord_integral(a, xc, r));
  return s;
}

struct CellBox {
  double x0, y0, x1, y1;
};

CellBox box_of(const Grid &grid, int i, int j) {
  const Vec2 o = grid.origin();
  return {o.x + i * grid.dx(), o.y + j * grid.dy(), o.x + (i + 1) * grid.dx(), o.y + (j + 1) * grid.dy()};
}

void check_options(const RasterOptions &opts) {
  if (opts.method == RasterMethod::supersample && opts.samples < 1)
    throw InvalidArgument("rasterize_micro: samples must be >= 1");
}

// Adds the covered fraction of one disk to the cells of rows [jlo, jhi].
void splat(const Grid &grid, Vec2 c, double r, const RasterOptions &opts, std::vector<double> &out, int jlo, int jhi) {
  const Vec2 o = grid.origin();
  const int j0 = std::max(jlo, static_cast<int>(std::floor((c.y - r - o.y) / grid.dy())));
  const int j1 = std::min(jhi, static_cast<int>(std::floor((c.y + r - o.y) / grid.dy())));
  if (j0 > j1) return;
  const int i0 = std::max(0, static_cast<int>(std::floor((c.x - r - o.x) / grid.dx())));
  const int i1 = std::min(grid.nx() - 1, static_cast<int>(std::floor((c.x + r - o.x) / grid.dx())));
  const double area = grid.cell_area();
  const int s = opts.samples;
  for (int j = j0; j <= j1; ++j)
    for (int i = i0; i <= i1; ++i) {
      const CellBox b = box_of(grid, i, j);
      if (opts.method == RasterMethod::exact) {
        out[grid.index(i, j)] += disk_rectangle_area(c, r, b.x0, b.y0, b.x1, b.y1) / area;
      } else {
        int hits = 0;
        for (int sj = 0; sj < s; ++sj)
          for (int si = 0; si < s; ++si) {
            const Vec2 p{b.x0 + (si + 0.5) * grid.dx() / s, b.y0 + (sj + 0.5) * grid.dy() / s};
            if (norm2(p - c) < r * r) ++hits;
          }
        out[grid.index(i, j)] += static_cast<double>(hits) / (s * s);
      }
    }
}

} // namespace

double disk_rectangle_area(Vec2 c, double r, double x0, double y0, double x1, double y1) {
  if (!(x1 > x0) || !(y1 > y0) || !(r > 0.0)) return 0.0;
  x0 -= c.x;
  x1 -= c.x;
  y0 -= c.y;
  y1 -= c.y;
  const double a = quadrant_area(x1, y1, r) - quadrant_area(x0, y1, r) - quadrant_area(x1, y0, r) +
                   quadrant_area(x0, y0, r);
  return std::clamp(a, 0.0, std::min(std::numbers::pi * r * r, (x1 - x0) * (y1 - y0)));
}

std::vector<double> rasterize_micro(const Configuration &q, const Grid &grid, const RasterOptions &opts) {
  check_options(opts);
  std::vector<double> out(grid.size(), 0.0);
  if (q.active_count() == 0) return out;
  // Each band of rows is owned by one thread and receives its disks in index
  // order, so the sums match the serial version exactly.
  const int ny = grid.ny();
  const int bands = std::min(ny, 4 * omp_get_max_threads());
#pragma omp parallel for schedule(dynamic, 1)
  for (int band = 0; band < bands; ++band) {
    const int lo = static_cast<int>(static_cast<long>(ny) * band / bands);
    const int hi = static_cast<int>(static_cast<long>(ny) * (band + 1) / bands) - 1;
    for (std::size_t d = 0; d < q.size(); ++d)
      if (q.active(d)) splat(grid, q.positions[d], q.radius, opts, out, lo, hi);
    for (int j = lo; j <= hi; ++j)
      for (int i = 0; i < grid.nx(); ++i) out[grid.index(i, j)] = std::min(1.0, out[grid.index(i, j)]);
  }
  return out;
}

namespace reference {

std::vector<double> rasterize_micro(const Configuration &q, const Grid &grid, const RasterOptions &opts) {
  check_options(opts);
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t d = 0; d < q.size(); ++d)
    if (q.active(d)) splat(grid, q.positions[d], q.radius, opts, out, 0, grid.ny() - 1);
  for (double &v : out) v = std::min(1.0, v);
  return out;
}

} // namespace reference

std::vector<double> normalize_density(std::span<const double> raw, double ref) {
  if (!(ref > 0.0) || !std::isfinite(ref))
    throw InvalidArgument("normalize_density: reference density must be > 0, got " + std::to_string(ref));
  std::vector<double> out(raw.size());
  for (std::size_t k = 0; k < raw.size(); ++k) out[k] = std::min(raw[k] / ref, 1.0);
  return out;
}

double window_mean(const Grid &grid, std::span<const double> rho, Vec2 lo, Vec2 hi) {
  double s = 0.0;
  long cnt = 0;
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      const Vec2 c = grid.center(i, j);
      if (c.x < lo.x || c.x > hi.x || c.y < lo.y || c.y > hi.y) continue;
      s += rho[grid.index(i, j)];
      ++cnt;
    }
  if (cnt == 0) throw InvalidArgument("window_mean: window contains no cell center");
  return s / static_cast<double>(cnt);
}

double window_density(const Configuration &q, Vec2 lo, Vec2 hi, double resolution, const RasterOptions &opts) {
  if (!(hi.x > lo.x && hi.y > lo.y)) throw InvalidArgument("window_density: empty window");
  if (!(resolution > 0.0)) throw InvalidArgument("window_density: resolution must be > 0");
  const int nx = std::max(1, static_cast<int>(std::ceil((hi.x - lo.x) / resolution - 1e-9)));
  const int ny = std::max(1, static_cast<int>(std::ceil((hi.y - lo.y) / resolution - 1e-9)));
  const Grid grid(nx, ny, (hi.x - lo.x) / nx, (hi.y - lo.y) / ny, lo,
                  std::vector<CellFlag>(static_cast<std::size_t>(nx) * ny, CellFlag::interior));
  const std::vector<double> rho = rasterize_micro(q, grid, opts);
  double s = 0.0;
  for (double v : rho) s += v;
  return s / static_cast<double>(rho.size());
}

double lattice_packing_fraction(LatticeKind kind) {
  switch (kind) {
  case LatticeKind::triangular: return std::numbers::pi / (2.0 * std::numbers::sqrt3);
  case LatticeKind::cartesian: return std::numbers::pi / 4.0;
  case LatticeKind::loose_triangular: return std::numbers::pi * std::numbers::sqrt3 / 8.0;
  }
  return 0.0;
}

Vec2 lattice_period(LatticeKind kind, double r) {
  switch (kind) {
  case LatticeKind::triangular: return {2.0 * r, 2.0 * std::numbers::sqrt3 * r};
  case LatticeKind::cartesian: return {2.0 * r, 2.0 * r};
  case LatticeKind::loose_triangular: return {4.0 * r, 4.0 * std::numbers::sqrt3 * r};
  }
  return {};
}

Configuration generate_lattice(const LatticeSpec &spec) {
  if (spec.count < 1) throw InvalidArgument("generate_lattice: count must be >= 1");
  if (!(spec.radius > 0.0)) throw InvalidArgument("generate_lattice: radius must be > 0");
  if (spec.columns < 0) throw InvalidArgument("generate_lattice: columns must be >= 0");
  // A hair of extra spacing keeps computed gaps non-negative despite rounding.
  const double a = 2.0 * spec.radius * (1.0 + 1e-12);
  const double n = static_cast<double>(spec.count);
  int cols = spec.columns;
  if (cols == 0) {
    switch (spec.kind) {
    case LatticeKind::triangular: cols = static_cast<int>(std::ceil(std::sqrt(n * std::numbers::sqrt3 / 2.0))); break;
    case LatticeKind::cartesian: cols = static_cast<int>(std::ceil(std::sqrt(n))); break;
    case LatticeKind::loose_triangular:
      cols = static_cast<int>(std::ceil(std::sqrt(n * 4.0 / 3.0 * std::numbers::sqrt3 / 2.0)));
      break;
    }
    if (spec.kind == LatticeKind::loose_triangular && cols % 2) ++cols;
  }
  std::vector<Vec2> pos;
  pos.reserve(static_cast<std::size_t>(spec.count));
  for (long j = 0; static_cast<long>(pos.size()) < spec.count; ++j) {
    for (int i = 0; i < cols && static_cast<long>(pos.size()) < spec.count; ++i) {
      if (spec.kind == LatticeKind::cartesian) {
        pos.push_back(spec.origin + Vec2{a * i, a * static_cast<double>(j)});
        continue;
      }
      if (spec.kind == LatticeKind::loose_triangular) {
        const long u = i - j / 2; // lattice coordinate along the first basis vector
        if ((u % 2 + 2) % 2 == 1 && j % 2 == 1) continue;
      }
      const double shift = (j % 2) ? 0.5 * a : 0.0;
      pos.push_back(spec.origin + Vec2{a * i + shift, a * std::numbers::sqrt3 / 2.0 * static_cast<double>(j)});
    }
  }
  return Configuration(std::move(pos), spec.radius);
}

bool normals_jammed(std::span<const Vec2> normals) {
  if (normals.size() < 3) return false;
  std::vector<double> ang;
  ang.reserve(normals.size());
  for (const Vec2 &v : normals) ang.push_back(std::atan2(v.y, v.x));
  std::sort(ang.begin(), ang.end());
  double gap = ang.front() + 2.0 * std::numbers::pi - ang.back();
  for (std::size_t k = 1; k < ang.size(); ++k) gap = std::max(gap, ang[k] - ang[k - 1]);
  return gap < std::numbers::pi - 1e-12;
}

namespace {

void wall_normals(const Configuration &q, std::span<const Segment> walls, int i, double eps, std::vector<Vec2> &out) {
  const Vec2 p = q.positions[i];
  for (const Segment &w : walls) {
    const Vec2 c = closest_point(w, p);
    const double d = norm(c - p);
    if (d - q.radius <= eps && d > 0.0) out.push_back((c - p) / d);
  }
}

} // namespace

bool is_locally_jammed(const Configuration &q, std::span<const Segment> walls, int i, double eps) {
  if (!q.active(i)) return false;
  std::vector<Vec2> normals;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (static_cast<int>(j) == i || !q.active(j)) continue;
    const Vec2 v = q.positions[j] - q.positions[i];
    const double d = norm(v);
    if (d - 2.0 * q.radius <= eps && d > 0.0) normals.push_back(v / d);
  }
  wall_normals(q, walls, i, eps, normals);
  return normals_jammed(normals);
}

JammingReport jamming_report(const Configuration &q, std::span<const Segment> walls, double eps) {
  JammingReport rep;
  const int n = static_cast<int>(q.size());
  rep.jammed.assign(q.size(), 0);
  if (q.active_count() == 0) return rep;
  const double reach = 2.0 * q.radius + eps;
  const SpatialBins bins(q.positions, q.exited, reach);
#pragma omp parallel for schedule(dynamic, 64) if (n > 1024)
  for (int i = 0; i < n; ++i) {
    if (!q.active(i)) continue;
    std::vector<Vec2> normals;
    bins.for_each_candidate(q.positions[i], reach, [&](int j) {
      if (j == i) return;
      const Vec2 v = q.positions[j] - q.positions[i];
      const double d = norm(v);
      if (d - 2.0 * q.radius <= eps && d > 0.0) normals.push_back(v / d);
    });
    wall_normals(q, walls, i, eps, normals);
    rep.jammed[i] = normals_jammed(normals) ? 1 : 0;
  }
  long cnt = 0;
  for (std::uint8_t f : rep.jammed) cnt += f;
  rep.fraction = static_cast<double>(cnt) / static_cast<double>(q.active_count());
  return rep;
}

double macro_feasibility_check(const Grid &grid, const VelocityField &u, std::span<const double> rho, double tol) {
  if (rho.size() != grid.size()) throw InvalidArgument("macro_feasibility_check: density does not match grid");
  if (u.nx != grid.nx() || u.ny != grid.ny())
    throw InvalidArgument("macro_feasibility_check: velocity field does not match grid");
  auto usable = [&](int i, int j) { return grid.in_bounds(i, j) && grid.flag(i, j) != CellFlag::wall; };
  auto derivative = [&](int i, int j, int di, int dj, double h, auto comp) {
    const bool fwd = usable(i + di, j + dj), bwd = usable(i - di, j - dj);
    if (fwd && bwd) return (comp(u.at(i + di, j + dj)) - comp(u.at(i - di, j - dj))) / (2.0 * h);
    if (fwd) return (comp(u.at(i + di, j + dj)) - comp(u.at(i, j))) / h;
    if (bwd) return (comp(u.at(i, j)) - comp(u.at(i - di, j - dj))) / h;
    return 0.0;
  };
  double worst = 0.0;
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      if (grid.flag(i, j) != CellFlag::interior || rho[grid.index(i, j)] < 1.0 - tol) continue;
      const double div = derivative(i, j, 1, 0, grid.dx(), [](Vec2 v) { return v.x; }) +
                         derivative(i, j, 0, 1, grid.dy(), [](Vec2 v) { return v.y; });
      worst = std::max(worst, -div);
    }
  return worst;
}

double realized_feasibility_check(const Grid &grid, std::span<const double> before, std::span<const double> after,
                                  double tau, double tol) {
  if (before.size() != grid.size() || after.size() != grid.size())
    throw InvalidArgument("realized_feasibility_check: density does not match grid");
  if (!(tau > 0.0)) throw InvalidArgument("realized_feasibility_check: tau must be > 0");
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    if (grid.flag(k) != CellFlag::interior || before[k] < 1.0 - tol || after[k] < 1.0 - tol) continue;
    worst = std::max(worst, (after[k] - before[k]) / tau);
  }
  return worst;
}

bool jam_detected(std::span<const EvacuationSample> frames, const JamParams &params) {
  if (frames.empty()) return false;
  const EvacuationSample &last = frames.back();
  if (!(last.remaining > 0.0) || !(last.desired_speed > 0.0)) return false;
  const long from = last.step - params.window;
  if (frames.front().step > from) return false;
  double lo = last.remaining, hi = last.remaining;
  for (auto it = frames.rbegin(); it != frames.rend() && it->step >= from; ++it) {
    lo = std::min(lo, it->remaining);
    hi = std::max(hi, it->remaining);
  }
  return hi - lo <= params.rel_change * hi;
}

EvacuationCurve evacuation_metrics(std::span<const EvacuationSample> frames, const JamParams &params) {
  if (frames.empty()) throw InvalidArgument("evacuation_metrics: empty run");
  for (std::size_t k = 1; k < frames.size(); ++k)
    if (frames[k].step <= frames[k - 1].step || frames[k].time < frames[k - 1].time)
      throw InvalidArgument("evacuation_metrics: frames are not ordered in time (frame " + std::to_string(k) + ")");
  EvacuationCurve c;
  c.samples.assign(frames.begin(), frames.end());
  c.jammed = jam_detected(frames, params);
  return c;
}

} // namespace crowd
