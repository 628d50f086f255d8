#include "crowd/macro.hpp"

#include "crowd/error.hpp"
#include "crowd/seed.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

namespace crowd {

MacroState::MacroState(const Grid &grid, int populations)
    : density(static_cast<std::size_t>(populations), std::vector<double>(grid.size(), 0.0)),
      absorbed(static_cast<std::size_t>(populations), std::vector<double>(grid.size(), 0.0)) {
  if (populations < 1) throw InvalidArgument("MacroState: needs at least one population");
}

double interior_mass(const Grid &grid, const MacroState &state, int population) {
  double s = 0.0;
  for (double v : state.density[population]) s += v;
  return s * grid.cell_area();
}

double absorbed_mass(const MacroState &state, int population) {
  double s = 0.0;
  for (double v : state.absorbed[population]) s += v;
  return s;
}

double interior_mass(const Grid &grid, const MacroState &state) {
  double s = 0.0;
  for (int p = 0; p < state.populations(); ++p) s += interior_mass(grid, state, p);
  return s;
}

double absorbed_mass(const MacroState &state) {
  double s = 0.0;
  for (int p = 0; p < state.populations(); ++p) s += absorbed_mass(state, p);
  return s;
}

void check_cfl(const Grid &grid, const VelocityField &u, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("transport: tau must be > 0");
  if (u.nx != grid.nx() || u.ny != grid.ny()) throw InvalidArgument("transport: velocity field does not match grid");
  const double limit = std::min(grid.dx(), grid.dy());
  double worst = 0.0;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (grid.flag(k) != CellFlag::wall) worst = std::max(worst, tau * norm(u.value[k]));
  if (!(worst <= limit * (1.0 + 1e-12)))
    throw InvalidArgument("transport: CFL violated, tau * max|U| = " + std::to_string(worst) +
                          " exceeds the cell size " + std::to_string(limit));
}

namespace {

struct Stencil {
  int ox = 0;
  int oy = 0;
  double fx = 0.0; ///< share going one cell further in x
  double fy = 0.0;
};

Stencil stencil_of(const Grid &grid, const VelocityField &u, double tau, std::size_t k) {
  const Vec2 v = u.value[k];
  const double sx = std::clamp(tau * v.x / grid.dx(), -1.0, 1.0);
  const double sy = std::clamp(tau * v.y / grid.dy(), -1.0, 1.0);
  Stencil s;
  const double fx = std::floor(sx), fy = std::floor(sy);
  s.ox = static_cast<int>(fx);
  s.oy = static_cast<int>(fy);
  s.fx = sx - fx;
  s.fy = sy - fy;
  return s;
}

double piece_weight(const Stencil &s, int a, int b) {
  return (a ? s.fx : 1.0 - s.fx) * (b ? s.fy : 1.0 - s.fy);
}

// Where piece (a, b) of source (i, j) ends up: the target cell if it accepts
// mass, else the source itself.
std::size_t destination(const Grid &grid, const Stencil &s, int i, int j, int a, int b, bool periodic_x) {
  int ti = i + s.ox + a;
  const int tj = j + s.oy + b;
  if (periodic_x) ti = ((ti % grid.nx()) + grid.nx()) % grid.nx();
  if (!grid.in_bounds(ti, tj) || grid.flag(ti, tj) == CellFlag::wall) return grid.index(i, j);
  return grid.index(ti, tj);
}

void check_inputs(const Grid &grid, std::span<const double> rho, std::span<double> absorbed) {
  if (rho.size() != grid.size()) throw InvalidArgument("transport: density does not match grid");
  if (absorbed.size() != grid.size()) throw InvalidArgument("transport: absorbed tally does not match grid");
}

} // namespace

std::vector<double> transport_density(const Grid &grid, std::span<const double> rho, const VelocityField &u,
                                      double tau, std::span<double> absorbed, const TransportOptions &opts) {
  check_inputs(grid, rho, absorbed);
  check_cfl(grid, u, tau);
  if (opts.periodic_x && grid.nx() < 3) throw InvalidArgument("transport: periodic strips need at least 3 columns");
  const int nx = grid.nx();
  const int n = static_cast<int>(grid.size());
  std::vector<Stencil> st(grid.size());
#pragma omp parallel for schedule(static) if (n > 4096)
  for (int k = 0; k < n; ++k) st[k] = stencil_of(grid, u, tau, static_cast<std::size_t>(k));

  const double area = grid.cell_area();
  std::vector<double> out(grid.size(), 0.0);
#pragma omp parallel for schedule(static) if (n > 4096)
  for (int t = 0; t < n; ++t) {
    const int ti = t % nx, tj = t / nx;
    if (grid.flag(static_cast<std::size_t>(t)) == CellFlag::wall) {
      out[t] = rho[t];
      continue;
    }
    double acc = 0.0;
    for (int dj = 1; dj >= -1; --dj) {
      const int sj = tj - dj;
      for (int di = 1; di >= -1; --di) {
        int si = ti - di;
        if (opts.periodic_x) si = ((si % nx) + nx) % nx;
        if (!grid.in_bounds(si, sj)) continue;
        const std::size_t s = grid.index(si, sj);
        if (grid.flag(s) == CellFlag::wall || rho[s] == 0.0) continue;
        const Stencil &p = st[s];
        if (di == 0 && dj == 0) {
          // Blocked pieces fall back here too.
          for (int b = 0; b < 2; ++b)
            for (int a = 0; a < 2; ++a) {
              const double w = piece_weight(p, a, b);
              if (w != 0.0 && destination(grid, p, si, sj, a, b, opts.periodic_x) == static_cast<std::size_t>(t))
                acc += w * rho[s];
            }
          continue;
        }
        // The only piece that can land on t; t accepts mass, so it is not redirected.
        const int a = di - p.ox, b = dj - p.oy;
        if (a < 0 || a > 1 || b < 0 || b > 1) continue;
        const double w = piece_weight(p, a, b);
        if (w != 0.0) acc += w * rho[s];
      }
    }
    if (grid.flag(static_cast<std::size_t>(t)) == CellFlag::exit)
      absorbed[t] += acc * area;
    else
      out[t] = acc;
  }
  return out;
}

namespace reference {

std::vector<double> transport_density(const Grid &grid, std::span<const double> rho, const VelocityField &u,
                                      double tau, std::span<double> absorbed, const TransportOptions &opts) {
  check_inputs(grid, rho, absorbed);
  check_cfl(grid, u, tau);
  const double area = grid.cell_area();
  std::vector<double> out(grid.size(), 0.0);
  std::vector<double> to_absorb(grid.size(), 0.0);
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      const std::size_t s = grid.index(i, j);
      if (grid.flag(s) == CellFlag::wall) {
        out[s] += rho[s];
        continue;
      }
      if (rho[s] == 0.0) continue;
      const Stencil st = stencil_of(grid, u, tau, s);
      for (int b = 0; b < 2; ++b)
        for (int a = 0; a < 2; ++a) {
          const double w = piece_weight(st, a, b);
          if (w == 0.0) continue;
          const std::size_t t = destination(grid, st, i, j, a, b, opts.periodic_x);
          if (grid.flag(t) == CellFlag::exit)
            to_absorb[t] += w * rho[s];
          else
            out[t] += w * rho[s];
        }
    }
  for (std::size_t t = 0; t < grid.size(); ++t)
    if (to_absorb[t] != 0.0) absorbed[t] += to_absorb[t] * area;
  return out;
}

} // namespace reference

namespace {

struct Walk {
  const Grid &grid;
  std::vector<std::vector<double>> &rho;
  std::vector<std::vector<double>> &absorbed;
  const int K;
  std::vector<double> carried;

  double total(std::size_t c) const {
    double s = 0.0;
    for (int p = 0; p < K; ++p) s += rho[p][c];
    return s;
  }

  // Index of the only population with nonzero value in v, -1 if none, -2 if several.
  int sole(auto &&value) const {
    int who = -1;
    for (int p = 0; p < K; ++p)
      if (value(p) != 0.0) {
        if (who != -1) return -2;
        who = p;
      }
    return who;
  }

  double carried_total() const {
    double s = 0.0;
    for (double e : carried) s += e;
    return s;
  }

  // Rounding can leave the joint density a few ulps above one; move the
  // surplus back onto the walker.
  void trim(std::size_t c) {
    for (int guard = 0; guard < 8; ++guard) {
      const double t = total(c);
      if (t <= 1.0) return;
      int p = 0;
      for (int q = 1; q < K; ++q)
        if (rho[q][c] > rho[p][c]) p = q;
      const double reduced = std::max(0.0, std::min(rho[p][c] - (t - 1.0), std::nextafter(rho[p][c], 0.0)));
      carried[p] += rho[p][c] - reduced;
      rho[p][c] = reduced;
    }
  }

  // Takes the excess of source c onto the walker.
  void take(std::size_t c, double tot) {
    const int who = sole([&](int p) { return rho[p][c]; });
    if (who >= 0) {
      carried[who] = rho[who][c] - 1.0;
      rho[who][c] = 1.0;
      return;
    }
    const double share = (tot - 1.0) / tot;
    for (int p = 0; p < K; ++p) {
      const double e = rho[p][c] * share;
      rho[p][c] -= e;
      carried[p] = e;
    }
    trim(c);
  }

  // Fills c up to capacity from the walker.
  void deposit(std::size_t c) {
    const double t = total(c);
    if (!(t < 1.0)) return;
    const double cap = 1.0 - t;
    const int who = sole([&](int p) { return carried[p]; });
    if (who >= 0) {
      double &r = rho[who][c];
      double &e = carried[who];
      if (e >= cap) {
        const bool alone = sole([&](int p) { return p == who ? 0.0 : rho[p][c]; }) == -1;
        if (alone) {
          e -= cap;
          r = 1.0;
        } else {
          r += cap;
          e -= cap;
          trim(c);
        }
      } else {
        r += e;
        e = 0.0;
        if (r > 1.0) { // ulp overshoot
          e = r - 1.0;
          r = 1.0;
        }
        trim(c);
      }
      return;
    }
    const double E = carried_total();
    if (E <= cap) {
      for (int p = 0; p < K; ++p) {
        rho[p][c] += carried[p];
        carried[p] = 0.0;
      }
    } else {
      const double f = cap / E;
      for (int p = 0; p < K; ++p) {
        const double d = carried[p] * f;
        rho[p][c] += d;
        carried[p] -= d;
      }
    }
    trim(c);
  }

  void absorb(std::size_t c) {
    const double area = grid.cell_area();
    for (int p = 0; p < K; ++p) {
      absorbed[p][c] += carried[p] * area;
      carried[p] = 0.0;
    }
  }
};

} // namespace

Odometer stochastic_project(const Grid &grid, std::vector<std::vector<double>> &density,
                            std::vector<std::vector<double>> &absorbed, const ProjectionParams &params) {
  const int K = static_cast<int>(density.size());
  if (K < 1) throw InvalidArgument("stochastic_project: no population");
  if (absorbed.size() != density.size()) throw InvalidArgument("stochastic_project: absorbed tally mismatch");
  const std::size_t n = grid.size();
  for (int p = 0; p < K; ++p) {
    if (density[p].size() != n || absorbed[p].size() != n)
      throw InvalidArgument("stochastic_project: density does not match grid");
    for (std::size_t c = 0; c < n; ++c)
      if (!(density[p][c] >= 0.0) || !std::isfinite(density[p][c]))
        throw InvalidArgument("stochastic_project: density must be finite and >= 0 (population " +
                              std::to_string(p) + ", cell " + std::to_string(c) + ")");
  }

  Walk w{grid, density, absorbed, K, std::vector<double>(K, 0.0)};
  Odometer od(n, 0.0);

  // Mass sitting on exit cells is outside the constraint and leaves at once.
  bool has_exit = false;
  double mass = 0.0, room = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    const CellFlag f = grid.flag(c);
    if (f == CellFlag::exit) {
      has_exit = true;
      for (int p = 0; p < K; ++p) {
        absorbed[p][c] += density[p][c] * grid.cell_area();
        density[p][c] = 0.0;
      }
    } else if (f == CellFlag::interior) {
      mass += w.total(c);
      room += 1.0;
    }
  }
  if (!has_exit && mass > room * (1.0 + 1e-12))
    throw SolverError("stochastic_project: total mass " + std::to_string(mass) + " exceeds the capacity " +
                          std::to_string(room) + " of a room without exit",
                      0, mass - room);

  std::mt19937_64 rng(params.seed);
  long long steps = 0;
  const int nx = grid.nx();
  static constexpr std::array<int, 4> DI{1, -1, 0, 0};
  static constexpr std::array<int, 4> DJ{0, 0, 1, -1};
  for (std::size_t src = 0; src < n; ++src) {
    if (grid.flag(src) != CellFlag::interior) continue;
    const double tot = w.total(src);
    if (!(tot > 1.0)) continue;
    w.take(src, tot);
    // Walkers carry at most one cell's capacity each.
    std::vector<double> reservoir;
    reservoir.swap(w.carried);
    w.carried.assign(K, 0.0);
    for (;;) {
      double left = 0.0;
      for (double e : reservoir) left += e;
      if (!(left > 0.0)) break;
      if (left <= 1.0) {
        w.carried.swap(reservoir);
        reservoir.assign(K, 0.0);
      } else if (const int who = w.sole([&](int p) { return reservoir[p]; }); who >= 0) {
        w.carried[who] = 1.0;
        reservoir[who] -= 1.0;
      } else {
        for (int p = 0; p < K; ++p) {
          w.carried[p] = reservoir[p] / left;
          reservoir[p] -= w.carried[p];
        }
      }
      int ci = static_cast<int>(src % nx), cj = static_cast<int>(src / nx);
      std::size_t cur = src;
      while (w.carried_total() > 0.0) {
        if (++steps > params.max_walk_steps)
          throw SolverError("stochastic_project: walk step bound reached with excess left at cell " +
                                std::to_string(src),
                            steps, w.carried_total());
        const int d = static_cast<int>(rng() >> 62);
        int ni = ci + DI[d];
        const int nj = cj + DJ[d];
        if (params.periodic_x) ni = ((ni % nx) + nx) % nx;
        if (!grid.in_bounds(ni, nj) || grid.flag(ni, nj) == CellFlag::wall) continue;
        od[cur] += w.carried_total();
        ci = ni;
        cj = nj;
        cur = grid.index(ci, cj);
        if (grid.flag(cur) == CellFlag::exit) {
          w.absorb(cur);
          break;
        }
        w.deposit(cur);
      }
    }
  }
  return od;
}

Odometer stochastic_project(const Grid &grid, std::vector<double> &density, std::vector<double> &absorbed,
                            const ProjectionParams &params) {
  std::vector<std::vector<double>> d{std::move(density)};
  std::vector<std::vector<double>> a{std::move(absorbed)};
  Odometer od;
  try {
    od = stochastic_project(grid, d, a, params);
  } catch (...) {
    density = std::move(d[0]);
    absorbed = std::move(a[0]);
    throw;
  }
  density = std::move(d[0]);
  absorbed = std::move(a[0]);
  return od;
}

std::vector<double> pressure_from_odometer(std::span<const Odometer> window) {
  if (window.empty()) return {};
  std::vector<double> out(window.front().size(), 0.0);
  for (const Odometer &od : window) {
    if (od.size() != out.size()) throw InvalidArgument("pressure_from_odometer: odometers differ in size");
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += od[c];
  }
  return out;
}

VelocityField density_dependent_velocity(const Grid &grid, std::span<const double> rho, const VelocityField &u,
                                         const SpeedFactor &alpha) {
  if (rho.size() != grid.size()) throw InvalidArgument("density_dependent_velocity: density does not match grid");
  VelocityField out = u;
  for (int j = 0; j < grid.ny(); ++j)
    for (int i = 0; i < grid.nx(); ++i) {
      const Vec2 v = u.at(i, j);
      if (v == Vec2{} || grid.flag(i, j) == CellFlag::wall) continue;
      const double sector = std::round(std::atan2(v.y, v.x) / (std::numbers::pi / 4));
      const int s = ((static_cast<int>(sector) % 8) + 8) % 8;
      static constexpr std::array<int, 8> SI{1, 1, 0, -1, -1, -1, 0, 1};
      static constexpr std::array<int, 8> SJ{0, 1, 1, 1, 0, -1, -1, -1};
      int di = i + SI[s], dj = j + SJ[s];
      if (!grid.in_bounds(di, dj) || grid.flag(di, dj) == CellFlag::wall) {
        di = i;
        dj = j;
      }
      const double a = alpha(rho[grid.index(di, dj)]);
      if (!(a >= 0.0 && a <= 1.0))
        throw InvalidArgument("density_dependent_velocity: speed factor " + std::to_string(a) +
                              " outside [0, 1] at density " + std::to_string(rho[grid.index(di, dj)]));
      out.at(i, j) = a * v;
    }
  return out;
}

std::uint64_t projection_seed(std::uint64_t base, long step) {
  return derive_seed(base, static_cast<std::uint64_t>(step));
}

MacroState step_macro(const Grid &grid, const MacroState &state, double tau, std::span<const VelocityField> fields,
                      const ProjectionParams &params, MacroStepReport *report, const TransportOptions &opts) {
  const int K = state.populations();
  if (static_cast<int>(fields.size()) != K)
    throw InvalidArgument("step_macro: one velocity field per population is required");
  MacroState next;
  next.density.resize(K);
  next.absorbed = state.absorbed;
  std::vector<double> before(K);
  for (int p = 0; p < K; ++p) {
    before[p] = absorbed_mass(state, p);
    next.density[p] = transport_density(grid, state.density[p], fields[p], tau, next.absorbed[p], opts);
  }
  ProjectionParams pp = params;
  pp.seed = projection_seed(params.seed, state.step);
  pp.periodic_x = params.periodic_x || opts.periodic_x;
  Odometer od = stochastic_project(grid, next.density, next.absorbed, pp);
  next.time = state.time + tau;
  next.step = state.step + 1;
  if (report) {
    report->odometer = std::move(od);
    report->absorbed_this_step.resize(K);
    for (int p = 0; p < K; ++p) report->absorbed_this_step[p] = absorbed_mass(next, p) - before[p];
  }
  return next;
}

} // namespace crowd
