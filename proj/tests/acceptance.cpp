// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "crowd/compare.hpp"
#include "crowd/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "oracles.hpp"

using namespace crowd;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int failures = 0;

void report(int id, bool ok, const std::string &what) {
  std::printf("%s %2d  %s\n", ok ? "PASS" : "FAIL", id, what.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

// Runs a criterion, turning an exception into a failure.
void criterion(int id, const char *name, const std::function<std::pair<bool, std::string>()> &body) {
  try {
    const auto [ok, detail] = body();
    report(id, ok, std::string(name) + ": " + detail);
  } catch (const std::exception &e) {
    report(id, false, std::string(name) + ": threw " + e.what());
  }
}

std::string fmt(const char *f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Scenario scenario(const char *name) { return load_scenario(fs::path(CROWD_SCENARIOS) / name); }

fs::path scratch(const std::string &name) {
  const fs::path p = fs::temp_directory_path() / ("crowd_acceptance_" + name);
  fs::remove_all(p);
  return p;
}

// Interior density bounds of one state, populations summed.
void density_bounds(const Grid &g, const MacroState &s, double &lo, double &hi) {
  for (std::size_t c = 0; c < g.size(); ++c) {
    if (g.flag(c) != CellFlag::interior) continue;
    double t = 0.0;
    for (const auto &p : s.density) t += p[c];
    lo = std::min(lo, t);
    hi = std::max(hi, t);
  }
}

// Cell and all its non-wall 8-neighbors at saturation.
bool saturated_inside(const Grid &g, std::span<const double> rho, std::size_t c) {
  const int i = static_cast<int>(c % g.nx()), j = static_cast<int>(c / g.nx());
  for (int dj = -1; dj <= 1; ++dj)
    for (int di = -1; di <= 1; ++di) {
      if (!g.in_bounds(i + di, j + dj)) return false;
      const std::size_t n = g.index(i + di, j + dj);
      if (g.flag(n) == CellFlag::wall) continue;
      if (g.flag(n) == CellFlag::exit || rho[n] < 1.0 - 1e-9) return false;
    }
  return true;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Interior density bounds seen in all macro frames checked so far.
double feas_lo = std::numeric_limits<double>::infinity(), feas_hi = -1.0;
long feas_frames = 0;

void note_frames(const MacroRunSummary &m) {
  feas_lo = std::min(feas_lo, m.min_density);
  feas_hi = std::max(feas_hi, m.max_density);
  feas_frames += m.steps + 1;
}

} // namespace

int main() {
  const double R = 0.25;

  criterion(1, "two-disk projection", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const double tau = 0.01;
    MicroState st(Configuration({{0, 0}, {2 * R, 0}}, R));
    const std::vector<Vec2> desired{{1, 0}, {0, 0}};
    const MicroState next = step_micro(MicroWorld{}, st, tau, desired, MicroParams{});
    double err = 0.0;
    for (const Vec2 &v : next.velocity) err = std::max(err, norm(v - Vec2{0.5, 0}));
    const double dt = seconds_since(t0);
    return std::pair{err <= 1e-8 && dt < 1.0, fmt("max |v - (1/2, 0)| = %.3g, %.3f s", err, dt)};
  });

  criterion(2, "corridor non-overlap and KKT", [&] {
    const Scenario s = scenario("corridor.json");
    const MicroRunSummary m = run_micro(s, {}, false);
    const double r = s.micro.radius, tol = 1e-9 * r;
    const bool ok = m.initial == 100 && m.steps == 2000 && m.min_disk_gap >= -tol && m.min_wall_gap >= -tol &&
                    m.max_primal <= tol && m.max_complementarity <= tol && m.min_multiplier >= 0.0;
    return std::pair{ok, fmt("N=%ld, %ld steps, min gap %.3g r, wall gap %.3g r, primal %.3g r, compl %.3g r, "
                             "min lambda %.3g",
                             m.initial, m.steps, m.min_disk_gap / r, m.min_wall_gap / r, m.max_primal / r,
                             m.max_complementarity / r, m.min_multiplier)};
  });

  criterion(3, "prox-regularity bound", [&] {
    const double e2 = std::abs(prox_regularity_bound(2, R) - R * std::sqrt(2.0));
    double lo = 1e300, hi = 0.0;
    for (long n = 10; n <= 10000; ++n) {
      const double v = prox_regularity_bound(n, R) * std::pow(static_cast<double>(n), 1.5) / R;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    return std::pair{e2 <= 1e-12 && lo >= 1.0 && hi <= 10.0,
                     fmt("|eta(2) - r sqrt2| = %.3g, eta N^1.5 / r in [%.4f, %.4f]", e2, lo, hi)};
  });

  criterion(4, "lattice densities", [&] {
    bool ok = true;
    std::string detail;
    const std::pair<LatticeKind, double> want[] = {
        {LatticeKind::triangular, 0.9069}, {LatticeKind::cartesian, 0.7854}, {LatticeKind::loose_triangular, 0.6802}};
    for (const auto &[kind, target] : want) {
      const Configuration q = generate_lattice({.kind = kind, .count = 3000, .radius = R});
      const Vec2 p = lattice_period(kind, R);
      const Vec2 lo{4 * p.x, 2 * p.y}, hi{lo.x + 10 * p.x, lo.y + 8 * p.y};
      const double rho = window_density(q, lo, hi, R / 4);
      ok = ok && q.size() >= 2500 && std::abs(rho - target) <= 0.02;
      detail += fmt("%.4f (want %.4f) ", rho, target);
    }
    return std::pair{ok, detail};
  });

  // The door run feeds criteria 5, 8 and 9.
  const fs::path door_dir = scratch("door");
  std::optional<RunSummary> door;
  std::string door_error;
  try {
    door = run_scenario(scenario("door.json"), door_dir);
    note_frames(*door->macro);
  } catch (const std::exception &e) {
    door_error = e.what();
  }

  criterion(5, "upstream door density", [&] {
    if (!door) throw std::runtime_error(door_error);
    const MicroRunSummary &m = *door->micro;
    const double rho = m.upstream_mean_raw / m.rho_ref;
    return std::pair{m.upstream_mean_raw >= 0.0 && rho >= 0.80 && rho <= 0.91,
                     fmt("time-averaged normalized density %.4f (rho_ref %.3g)", rho, m.rho_ref)};
  });

  criterion(6, "1D stochastic projection", [&] {
    const auto t0 = std::chrono::steady_clock::now();
    const int cells = 400, source = 200, seeds = 100;
    const double alpha = 200.0;
    const Grid g(cells, 1, 1.0, 1.0, {0, 0}, std::vector<CellFlag>(cells, CellFlag::interior));
    std::vector<double> mean(cells, 0.0);
    for (int k = 0; k < seeds; ++k) {
      std::vector<double> rho(cells, 0.0), ab(cells, 0.0);
      rho[source] = alpha;
      stochastic_project(g, rho, ab, {.seed = static_cast<std::uint64_t>(1000 + k)});
      for (int c = 0; c < cells; ++c) mean[c] += rho[c] / seeds;
    }
    const auto exact = oracle::centered_interval(cells, source, alpha);
    double l1 = 0.0;
    for (int c = 0; c < cells; ++c) l1 += std::abs(mean[c] - exact[c]);
    const double dt = seconds_since(t0);
    return std::pair{l1 < 0.1 * alpha && dt < 10.0,
                     fmt("%d seeds, L1 = %.3f alpha, %.2f s", seeds, l1 / alpha, dt)};
  });

  criterion(7, "mass conservation", [&] {
    // Closed box, everything pushed into one corner.
    const Grid g(40, 20, 0.25, 0.25, {0, 0}, std::vector<CellFlag>(800, CellFlag::interior));
    MacroState st(g, 1);
    for (int j = 0; j < 20; ++j)
      for (int i = 0; i < 20; ++i) st.density[0][g.index(i, j)] = 0.7;
    const std::vector<VelocityField> u{uniform_velocity(g, {1.0, 0.3})};
    const double m0 = interior_mass(g, st);
    double closed = 0.0, lo = std::numeric_limits<double>::infinity(), hi = -1.0;
    for (long k = 0; k < 1000; ++k) {
      st = step_macro(g, st, 0.2, u, {.seed = 17});
      closed = std::max(closed, std::abs(interior_mass(g, st) + absorbed_mass(st) - m0) / m0);
      density_bounds(g, st, lo, hi);
    }
    feas_lo = std::min(feas_lo, lo);
    feas_hi = std::max(feas_hi, hi);
    feas_frames += 1000;

    // A room with a door.
    json d = json::parse(R"({
      "name": "balance", "model": "macro", "seed": 23, "tau": 0.05, "steps": 1000, "resolution": 0.25,
      "room": {"outer": [[0, 0], [20, 0], [20, 10], [0, 10]], "exits": [[[20, 4.5], [20, 5.5]]]},
      "types": [{"name": "a"}],
      "macro": {"populations": [{"type": "a", "blocks": [{"region": [[1, 1], [19, 9]], "density": 0.9}]}],
                "stop_mass": 0}
    })");
    const MacroRunSummary m = run_macro(parse_scenario(d), {}, false);
    note_frames(m);
    const bool ok = closed <= 1e-12 && m.steps == 1000 && m.max_balance_drift <= 1e-12 && m.final_interior > 0.0;
    return std::pair{ok, fmt("closed drift %.3g, interior + absorbed drift %.3g over %ld steps (%.1f%% absorbed)",
                             closed, m.max_balance_drift, m.steps,
                             100.0 * (1.0 - m.final_interior / m.initial_mass))};
  });

  // Jam and clog runs also contribute their frames to criterion 8.
  const fs::path jam_dir = scratch("jam");
  std::optional<RunSummary> jam;
  std::string jam_error;
  try {
    jam = run_scenario(scenario("jam.json"), jam_dir, {.write = false});
    note_frames(*jam->macro);
  } catch (const std::exception &e) {
    jam_error = e.what();
  }

  // Macro clog pass, checked under 11.
  struct Clog {
    Grid grid;
    std::vector<double> rho, last_od, total_od;
  };
  std::optional<Clog> clog;
  std::string clog_error;
  try {
    const Scenario s = scenario("clog.json");
    MacroSetup m = prepare_macro(s);
    const Grid &g = m.grid;
    Clog c{g, std::vector<double>(g.size(), 0.0), {}, std::vector<double>(g.size(), 0.0)};
    double lo = std::numeric_limits<double>::infinity(), hi = -1.0;
    for (long k = 0; k < s.steps; ++k) {
      MacroStepReport rep;
      m.state = step_macro(g, m.state, s.tau, macro_step_fields(m, m.state), m.projection, &rep);
      for (std::size_t i = 0; i < g.size(); ++i) c.total_od[i] += rep.odometer[i];
      c.last_od = rep.odometer;
      density_bounds(g, m.state, lo, hi);
    }
    feas_lo = std::min(feas_lo, lo);
    feas_hi = std::max(feas_hi, hi);
    feas_frames += s.steps;
    for (const auto &p : m.state.density)
      for (std::size_t i = 0; i < g.size(); ++i) c.rho[i] += p[i];
    clog = std::move(c);
  } catch (const std::exception &e) {
    clog_error = e.what();
  }

  criterion(8, "macro feasibility", [&] {
    if (!door) throw std::runtime_error(door_error);
    if (!jam) throw std::runtime_error(jam_error);
    if (!clog) throw std::runtime_error(clog_error);
    return std::pair{feas_lo >= 0.0 && feas_hi <= 1.0,
                     fmt("%ld post-correction frames, interior density in [%.17g, %.17g]", feas_frames, feas_lo,
                         feas_hi)};
  });

  criterion(9, "macro drains and leads micro", [&] {
    if (!door) throw std::runtime_error(door_error);
    const MacroRunSummary &m = *door->macro;
    const CompareReport c = compare_runs(door_dir / "micro", door_dir / "macro");
    long shared = 0;
    for (const CompareFrame &f : c.frames) shared += f.shared;
    const bool ok = m.strictly_decreasing && m.final_interior < 1e-6 && c.macro_never_behind && shared > 0;
    return std::pair{ok, fmt("interior mass %s decreasing, %.3g left after %ld steps; macro ahead at all %ld shared "
                             "frames: %s",
                             m.strictly_decreasing ? "strictly" : "NOT strictly", m.final_interior, m.steps, shared,
                             c.macro_never_behind ? "yes" : "no")};
  });

  criterion(10, "jam dichotomy", [&] {
    if (!jam) throw std::runtime_error(jam_error);
    const Scenario &s = jam->scenario;
    const Segment door_seg = s.room.exits.at(0);
    const double width = norm(door_seg.b - door_seg.a), diam = 2.0 * s.micro.radius;
    const MicroRunSummary &mi = *jam->micro;
    const MacroRunSummary &ma = *jam->macro;
    const bool ok = width < 3.0 * diam && mi.jammed && mi.jam_step >= 0 && mi.jam_step <= 5000 &&
                    ma.final_interior < 1e-6;
    return std::pair{ok, fmt("door %.2f diameters; micro %s at step %ld with %ld of %ld left; macro %.3g left after "
                             "%ld steps",
                             width / diam, mi.jammed ? "jammed" : "NOT jammed", mi.jam_step, mi.remaining, mi.initial,
                             ma.final_interior, ma.steps)};
  });

  criterion(11, "clog pressure", [&] {
    if (!clog) throw std::runtime_error(clog_error);
    const Grid &g = clog->grid;
    const std::size_t a = argmax(clog->last_od), b = argmax(clog->total_od);
    const bool in_a = saturated_inside(g, clog->rho, a), in_b = saturated_inside(g, clog->rho, b);
    const MicroRunSummary mi = run_micro(scenario("clog.json"), {}, false);
    const bool ok = clog->last_od[a] > 0.0 && in_a && in_b && mi.min_pressure >= 0.0;
    const Vec2 pa = g.center(static_cast<int>(a % g.nx()), static_cast<int>(a / g.nx()));
    return std::pair{ok, fmt("odometer argmax at (%.2f, %.2f) %s the saturated zone, run-total argmax %s, "
                             "min micro pressure %.3g",
                             pa.x, pa.y, in_a ? "inside" : "NOT inside", in_b ? "inside" : "NOT inside",
                             mi.min_pressure)};
  });

  criterion(12, "normalization example", [&] {
    const auto out = normalize_density(std::vector<double>(100, 0.53), 0.81);
    double mean = 0.0;
    for (double v : out) mean += v / 100.0;
    return std::pair{std::abs(mean - 0.65) <= 0.01, fmt("0.53 / 0.81 -> %.4f", mean)};
  });

  criterion(13, "property suites", [&] {
    const std::pair<const char *, const char *> suites[] = {
        {CROWD_TEST_MICRO, "analytic gradients match central finite differences"},
        {CROWD_TEST_MICRO, "projection agrees with the enumerated QP on small random instances"},
        {CROWD_TEST_BEHAVIOR, "neighbor set"},
        {CROWD_TEST_ANALYSIS, "local jamming"},
    };
    int green = 0;
    for (const auto &[exe, name] : suites) {
      const std::string cmd = std::string("\"") + exe + "\" --test-case=\"" + name + "\" --minimal >/dev/null 2>&1";
      if (std::system(cmd.c_str()) == 0) ++green;
    }
    return std::pair{green == 4, fmt("%d of 4 green (gradients, QP oracle, neighbor set, jamming)", green)};
  });

  fs::remove_all(door_dir);
  fs::remove_all(jam_dir);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
