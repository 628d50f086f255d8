#include "crowd/run.hpp"

#include "crowd/compare.hpp"
#include "crowd/error.hpp"
#include "crowd/output.hpp"
#include "crowd/seed.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>

namespace crowd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Records a failed step in failure.json and rethrows with its index.
[[noreturn]] void solver_failed(const fs::path &dir, bool write, const char *model, long step, const SolverError &e) {
  if (write)
    write_json(dir / "failure.json", {{"model", model},
                                      {"step", step},
                                      {"message", e.what()},
                                      {"iterations", e.iterations()},
                                      {"residual", e.residual()}});
  throw SolverError(std::string(model) + " step " + std::to_string(step) + ": " + e.what(), e.iterations(),
                    e.residual());
}

constexpr double inf = std::numeric_limits<double>::infinity();

struct Placed {
  Configuration config;
  std::vector<int> types;
  std::vector<int> group; ///< per disk
};

std::string group_path(std::size_t g) { return "micro.groups[" + std::to_string(g) + "]"; }

Placed place_disks(const Scenario &s) {
  const double r = s.micro.radius;
  const double tol = s.micro.params.tol_geom_rel * r;
  const std::vector<Segment> walls = s.room.wall_segments();
  Placed out;
  std::vector<Vec2> pos;
  auto clear_of_walls = [&](Vec2 p, double slack) {
    if (!s.room.contains(p)) return false;
    for (const Segment &w : walls)
      if (distance(w, p) - r < -slack) return false;
    for (const Segment &e : s.room.exits)
      if (distance(e, p) - r < -slack) return false;
    return true;
  };
  const SeedStreams seeds = split_seed(s.seed);
  for (std::size_t g = 0; g < s.micro.groups.size(); ++g) {
    const MicroGroup &grp = s.micro.groups[g];
    const int type = s.type_index(grp.type);
    std::vector<Vec2> add;
    switch (grp.kind) {
    case MicroGroup::Kind::positions: add = grp.positions; break;
    case MicroGroup::Kind::lattice: {
      LatticeSpec spec = grp.lattice;
      spec.radius = r;
      add = generate_lattice(spec).positions;
      break;
    }
    case MicroGroup::Kind::random: {
      std::mt19937_64 rng(derive_seed(seeds.placement, g));
      std::uniform_real_distribution<double> X(grp.lo.x, grp.hi.x), Y(grp.lo.y, grp.hi.y);
      const long budget = 2000 * grp.count + 10000;
      long placed = 0;
      // Random sequential addition against everything placed so far.
      for (long t = 0; t < budget && placed < grp.count; ++t) {
        const Vec2 p{X(rng), Y(rng)};
        if (!clear_of_walls(p, 0.0)) continue;
        bool ok = true;
        for (const Vec2 &o : pos)
          if (norm2(o - p) < 4.0 * r * r) {
            ok = false;
            break;
          }
        if (!ok) continue;
        pos.push_back(p);
        out.types.push_back(type);
        out.group.push_back(static_cast<int>(g));
        ++placed;
      }
      if (placed < grp.count)
        throw InvalidArgument(group_path(g) + ".random.count: only " + std::to_string(placed) + " of " +
                              std::to_string(grp.count) + " disks fit in the region");
      continue;
    }
    }
    for (const Vec2 &p : add) {
      const std::size_t k = pos.size();
      if (!clear_of_walls(p, tol))
        throw InvalidArgument(group_path(g) + ": disk at (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                              ") is outside the room or cuts a wall");
      for (std::size_t o = 0; o < k; ++o)
        if (norm(pos[o] - p) - 2.0 * r < -tol)
          throw InvalidArgument(group_path(g) + ": disk at (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                                ") overlaps a disk of " + group_path(out.group[o]));
      pos.push_back(p);
      out.types.push_back(type);
      out.group.push_back(static_cast<int>(g));
    }
  }
  out.config = Configuration(std::move(pos), r);
  return out;
}

double max_speed_of(std::span<const Vec2> v, const Configuration *q) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!q || q->active(i)) m = std::max(m, norm(v[i]));
  return m;
}

json pressure_json(const SaddleSolution &sol, const ActiveSet &set, double tau) {
  json a = json::array();
  for (const ContactPressure &p : pressures(sol, set, tau)) {
    if (p.value == 0.0) continue;
    a.push_back({{"kind", p.kind == ContactKind::disk ? "disk" : "wall"}, {"i", p.i}, {"j", p.j}, {"value", p.value}});
  }
  return a;
}

json frame_json(long step, double time, const Configuration &q, const json &press) {
  json pos = json::array();
  for (const Vec2 &p : q.positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw std::runtime_error("frame: non-finite position");
    pos.push_back({p.x, p.y});
  }
  return {{"step", step}, {"time", time}, {"positions", pos}, {"exited", q.exited}, {"pressures", press}};
}

std::string csv_num(double v) {
  if (!std::isfinite(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

} // namespace

std::vector<VelocityField> type_fields(const Scenario &s, const Grid &grid) {
  std::vector<VelocityField> out;
  for (const TypeSpec &t : s.types) {
    Room room = s.room;
    if (!t.exits.empty()) {
      room.exits.clear();
      for (int e : t.exits) room.exits.push_back(s.room.exits[e]);
    }
    const Grid g = build_grid(room, s.resolution);
    if (g.nx() != grid.nx() || g.ny() != grid.ny()) throw InvalidArgument("type_fields: grid mismatch");
    out.push_back(desired_velocity_from_distance(g, compute_distance_field(g), t.speed, t.normalize));
  }
  return out;
}

MicroSetup prepare_micro(const Scenario &s) {
  MicroSetup m;
  m.grid = build_grid(s.room, s.resolution);
  m.world = MicroWorld::from_room(s.room);
  m.fields = type_fields(s, m.grid);
  for (std::size_t t = 0; t < s.types.size(); ++t) {
    BehaviorParams bp;
    bp.proximity_range = s.types[t].proximity_range;
    bp.view_half_angle = s.types[t].view_half_angle_deg * std::numbers::pi / 180.0;
    bp.strategy = s.types[t].strategy;
    bp.field = static_cast<int>(t);
    m.behavior.push_back(bp);
  }
  Placed p = place_disks(s);
  m.types = std::move(p.types);
  m.state = MicroState(std::move(p.config));
  for (std::size_t i = 0; i < m.state.config.size(); ++i)
    m.state.velocity[i] = sample_velocity(m.grid, m.fields[m.types[i]], m.state.config.positions[i]);
  m.params = s.micro.params;
  return m;
}

MacroSetup prepare_macro(const Scenario &s) {
  MacroSetup m;
  m.grid = build_grid(s.room, s.resolution);
  const Grid &g = m.grid;
  const auto fields = type_fields(s, g);
  const int K = static_cast<int>(s.macro.populations.size());
  m.state = MacroState(g, K);

  bool any_micro = false;
  for (const MacroPopulation &p : s.macro.populations) any_micro = any_micro || p.from_micro;
  Placed placed;
  if (any_micro) {
    placed = place_disks(s);
    if (s.analysis.rho_ref > 0.0) {
      m.initial_rho_ref = s.analysis.rho_ref;
    } else {
      const auto all = rasterize_micro(placed.config, g, s.analysis.raster);
      const double mx = *std::max_element(all.begin(), all.end());
      m.initial_rho_ref = mx > 0.0 ? mx : 1.0;
    }
  }

  for (int p = 0; p < K; ++p) {
    const MacroPopulation &pop = s.macro.populations[p];
    const int t = s.type_index(pop.type);
    m.fields.push_back(fields[t]);
    if (s.types[t].speed_factor == "linear") {
      const double jd = s.types[t].jam_density;
      m.factors.push_back([jd](double r) { return std::clamp(1.0 - r / jd, 0.0, 1.0); });
    } else {
      m.factors.emplace_back();
    }
    std::vector<double> &rho = m.state.density[p];
    if (pop.from_micro) {
      Configuration mine = placed.config;
      for (std::size_t i = 0; i < mine.size(); ++i) mine.exited[i] = placed.types[i] == t ? 0 : 1;
      const auto raw = rasterize_micro(mine, g, s.analysis.raster);
      const auto norm_rho = normalize_density(raw, m.initial_rho_ref);
      for (std::size_t c = 0; c < g.size(); ++c)
        if (g.flag(c) != CellFlag::wall) rho[c] = norm_rho[c];
    } else {
      for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
          if (g.flag(i, j) == CellFlag::wall) continue;
          const Vec2 c = g.center(i, j);
          for (const DensityBlock &b : pop.blocks)
            if (c.x >= b.lo.x && c.x <= b.hi.x && c.y >= b.lo.y && c.y <= b.hi.y) rho[g.index(i, j)] += b.density;
        }
    }
  }
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      double tot = 0.0;
      for (int p = 0; p < K; ++p) tot += m.state.density[p][g.index(i, j)];
      if (tot > 1.0 + 1e-12)
        throw InvalidArgument("macro.populations: joint initial density " + std::to_string(tot) + " exceeds 1 in cell (" +
                              std::to_string(i) + ", " + std::to_string(j) + ")");
      if (tot > 1.0)
        for (int p = 0; p < K; ++p) m.state.density[p][g.index(i, j)] /= tot;
    }
  m.projection.seed = split_seed(s.seed).projection;
  m.projection.max_walk_steps = s.macro.max_walk_steps;
  return m;
}

std::vector<VelocityField> macro_step_fields(const MacroSetup &m, const MacroState &state) {
  bool any = false;
  for (const SpeedFactor &f : m.factors) any = any || static_cast<bool>(f);
  if (!any) return m.fields;
  std::vector<double> total(m.grid.size(), 0.0);
  for (const auto &d : state.density)
    for (std::size_t c = 0; c < total.size(); ++c) total[c] += d[c];
  std::vector<VelocityField> out = m.fields;
  for (std::size_t p = 0; p < out.size(); ++p)
    if (m.factors[p]) out[p] = density_dependent_velocity(m.grid, total, m.fields[p], m.factors[p]);
  return out;
}

MicroRunSummary run_micro(const Scenario &s, const fs::path &dir, bool write) {
  MicroSetup m = prepare_micro(s);
  MicroRunSummary sum;
  const Configuration &q = m.state.config;
  const long n = static_cast<long>(q.size());
  const double r = q.radius;
  const long stride = s.output.stride;
  sum.initial = n;
  sum.eta = n >= 2 ? prox_regularity_bound(n, r) : inf;
  for (const TypeSpec &t : s.types) sum.step_length = std::max(sum.step_length, s.tau * t.speed);
  sum.eta_warning = sum.step_length > 0.5 * sum.eta;

  std::ofstream frames, metrics;
  if (write) {
    fs::create_directories(dir);
    write_json(dir / "grid.json", grid_json(m.grid));
    frames.open(dir / "frames.jsonl");
    metrics.open(dir / "metrics.csv");
    if (!frames || !metrics) throw std::runtime_error(dir.string() + ": cannot write run files");
    metrics << "step,time,remaining,exited,desired_speed,min_disk_gap,min_wall_gap,primal,complementarity,"
               "min_multiplier,iterations,contacts,max_pressure\n";
  }

  const auto [g0, w0] = min_gaps(q, m.world.walls);
  sum.min_disk_gap = g0;
  sum.min_wall_gap = w0;
  sum.min_multiplier = inf;
  sum.min_pressure = inf;
  double window_sum = 0.0;
  long window_count = 0;
  auto sample_window = [&](long step) {
    const AnalysisSpec &a = s.analysis;
    if (!a.has_upstream_window || q.active_count() == 0) return;
    if (step < a.upstream_from || (a.upstream_to >= 0 && step > a.upstream_to)) return;
    window_sum += window_density(q, s.analysis.upstream_lo, s.analysis.upstream_hi, r / 4, s.analysis.raster);
    ++window_count;
  };
  auto record_frame = [&](long step, const json &press) {
    sum.frame_steps.push_back(step);
    sum.frames_raw.push_back(rasterize_micro(q, m.grid, s.analysis.raster));
    if (write) frames << frame_json(step, m.state.time, q, press).dump() << '\n';
  };

  sum.samples.push_back({0, 0.0, static_cast<double>(n), 0.0, max_speed_of(m.state.velocity, &q)});
  if (write) {
    metrics << 0 << ",0," << n << ",0," << csv_num(sum.samples.back().desired_speed) << ',' << csv_num(g0) << ','
            << csv_num(w0) << ",0,0,,0,0,0\n";
  }
  record_frame(0, json::array());
  sample_window(0);

  for (long step = 0; step < s.steps && q.active_count() > 0; ++step) {
    const std::vector<Vec2> desired = assign_desired(m.grid, m.state, m.types, m.fields, m.behavior);
    MicroStepReport rep;
    try {
      m.state = step_micro(m.world, m.state, s.tau, desired, m.params, &rep);
    } catch (const SolverError &e) {
      solver_failed(dir, write, "micro", step + 1, e);
    }
    const long k = step + 1;
    const KktResiduals &res = rep.solution.residuals;
    const auto [dg, wg] = min_gaps(q, m.world.walls);
    sum.min_disk_gap = std::min(sum.min_disk_gap, dg);
    sum.min_wall_gap = std::min(sum.min_wall_gap, wg);
    sum.max_primal = std::max(sum.max_primal, res.primal_violation);
    sum.max_complementarity = std::max(sum.max_complementarity, res.complementarity);
    double max_p = 0.0;
    const auto press = pressures(rep.solution, rep.constraints, s.tau);
    for (const ContactPressure &p : press) {
      sum.min_pressure = std::min(sum.min_pressure, p.value);
      max_p = std::max(max_p, p.value);
    }
    if (!rep.constraints.empty()) sum.min_multiplier = std::min(sum.min_multiplier, res.min_multiplier);

    const long remaining = static_cast<long>(q.active_count());
    sum.samples.push_back({k, m.state.time, static_cast<double>(remaining), static_cast<double>(n - remaining),
                           max_speed_of(desired, &q)});
    sample_window(k);
    if (write) {
      metrics << k << ',' << csv_num(m.state.time) << ',' << remaining << ',' << (n - remaining) << ','
              << csv_num(sum.samples.back().desired_speed) << ',' << csv_num(dg) << ',' << csv_num(wg) << ','
              << csv_num(res.primal_violation) << ',' << csv_num(res.complementarity) << ','
              << (rep.constraints.empty() ? "" : csv_num(res.min_multiplier)) << ',' << res.iterations << ','
              << rep.constraints.size() << ',' << csv_num(max_p) << '\n';
    }
    sum.steps = k;
    const bool jam = s.analysis.stop_on_jam && jam_detected(sum.samples, s.analysis.jam);
    const bool last = k == s.steps || remaining == 0 || jam;
    if (k % stride == 0 || last) record_frame(k, write ? pressure_json(rep.solution, rep.constraints, s.tau) : json());
    if (jam) {
      sum.jammed = true;
      sum.jam_step = k;
      break;
    }
  }
  if (!s.analysis.stop_on_jam) sum.jammed = evacuation_metrics(sum.samples, s.analysis.jam).jammed;
  sum.remaining = static_cast<long>(q.active_count());
  if (sum.min_pressure == inf) sum.min_pressure = 0.0;
  if (sum.min_multiplier == inf) sum.min_multiplier = 0.0;
  if (window_count > 0) sum.upstream_mean_raw = window_sum / static_cast<double>(window_count);

  double mx = 0.0;
  for (const auto &f : sum.frames_raw)
    for (double v : f) mx = std::max(mx, v);
  sum.rho_ref = s.analysis.rho_ref > 0.0 ? s.analysis.rho_ref : (mx > 0.0 ? mx : 1.0);

  if (write) {
    const Grid &g = m.grid;
    for (std::size_t f = 0; f < sum.frames_raw.size(); ++f) {
      const auto rho = normalize_density(sum.frames_raw[f], sum.rho_ref);
      write_grid_csv(dir / "density" / frame_name(sum.frame_steps[f], "csv"), g.nx(), g.ny(), rho);
      if (s.output.pgm) write_pgm(dir / "density" / frame_name(sum.frame_steps[f], "pgm"), g.nx(), g.ny(), rho, 1.0);
    }
    const JammingReport jr = jamming_report(q, m.world.walls, s.analysis.jam_contact_eps_rel * r);
    std::vector<int> stuck;
    for (std::size_t i = 0; i < jr.jammed.size(); ++i)
      if (jr.jammed[i]) stuck.push_back(static_cast<int>(i));
    write_json(dir / "jamming.json", {{"jam_verdict", sum.jammed},
                                      {"jam_step", sum.jam_step},
                                      {"steps", sum.steps},
                                      {"remaining", sum.remaining},
                                      {"locally_jammed_fraction", jr.fraction},
                                      {"locally_jammed", stuck},
                                      {"contact_eps", s.analysis.jam_contact_eps_rel * r}});
    json summary{{"steps", sum.steps},
                 {"initial", sum.initial},
                 {"remaining", sum.remaining},
                 {"jammed", sum.jammed},
                 {"min_disk_gap", std::isfinite(sum.min_disk_gap) ? json(sum.min_disk_gap) : json()},
                 {"min_wall_gap", std::isfinite(sum.min_wall_gap) ? json(sum.min_wall_gap) : json()},
                 {"max_primal", sum.max_primal},
                 {"max_complementarity", sum.max_complementarity},
                 {"min_pressure", sum.min_pressure},
                 {"rho_ref", sum.rho_ref},
                 {"prox_regularity", std::isfinite(sum.eta) ? json(sum.eta) : json()},
                 {"step_length", sum.step_length},
                 {"step_near_prox_regularity", sum.eta_warning}};
    if (sum.upstream_mean_raw >= 0.0) summary["upstream_mean_raw"] = sum.upstream_mean_raw;
    write_json(dir / "summary.json", summary);
  }
  return sum;
}

MacroRunSummary run_macro(const Scenario &s, const fs::path &dir, bool write) {
  MacroSetup m = prepare_macro(s);
  const Grid &g = m.grid;
  MacroRunSummary sum;
  const int K = m.state.populations();
  const double area = g.cell_area();
  sum.initial_mass = interior_mass(g, m.state) + absorbed_mass(m.state);
  sum.pressure.assign(g.size(), 0.0);
  sum.min_density = inf;
  sum.max_density = 0.0;

  std::ofstream metrics;
  if (write) {
    fs::create_directories(dir);
    write_json(dir / "grid.json", grid_json(g));
    metrics.open(dir / "metrics.csv");
    if (!metrics) throw std::runtime_error(dir.string() + ": cannot write run files");
    metrics << "step,time,remaining,exited,desired_speed,max_density,odometer_total,balance_drift\n";
  }
  auto total_density = [&] {
    std::vector<double> t(g.size(), 0.0);
    for (int p = 0; p < K; ++p)
      for (std::size_t c = 0; c < g.size(); ++c) t[c] += m.state.density[p][c];
    return t;
  };
  auto desired_speed = [&](const std::vector<VelocityField> &f) {
    double v = 0.0;
    for (int p = 0; p < K; ++p)
      for (std::size_t c = 0; c < g.size(); ++c)
        if (m.state.density[p][c] > 0.0) v = std::max(v, norm(f[p].value[c]));
    return v;
  };
  auto record_frame = [&](long step, const Odometer &od) {
    const auto t = total_density();
    sum.frame_steps.push_back(step);
    sum.frames.push_back(t);
    if (!write) return;
    write_grid_csv(dir / "density" / frame_name(step, "csv"), g.nx(), g.ny(), t);
    if (s.output.pgm) write_pgm(dir / "density" / frame_name(step, "pgm"), g.nx(), g.ny(), t, 1.0);
    if (K > 1)
      for (int p = 0; p < K; ++p)
        write_grid_csv(dir / ("density_" + s.macro.populations[p].type) / frame_name(step, "csv"), g.nx(), g.ny(),
                       m.state.density[p]);
    std::vector<double> o = od.empty() ? std::vector<double>(g.size(), 0.0) : od;
    write_grid_csv(dir / "pressure" / frame_name(step, "csv"), g.nx(), g.ny(), o);
    if (s.output.pgm) {
      const double mx = *std::max_element(o.begin(), o.end());
      write_pgm(dir / "pressure" / frame_name(step, "pgm"), g.nx(), g.ny(), o, mx);
    }
  };
  auto check_density = [&] {
    const auto t = total_density();
    for (std::size_t c = 0; c < g.size(); ++c) {
      if (g.flag(c) != CellFlag::interior) continue;
      sum.min_density = std::min(sum.min_density, t[c]);
      sum.max_density = std::max(sum.max_density, t[c]);
    }
  };

  std::vector<VelocityField> fields = macro_step_fields(m, m.state);
  double prev = interior_mass(g, m.state);
  sum.samples.push_back({0, 0.0, prev, absorbed_mass(m.state), desired_speed(fields)});
  if (write)
    metrics << "0,0," << csv_num(prev) << ',' << csv_num(absorbed_mass(m.state)) << ','
            << csv_num(sum.samples.back().desired_speed) << ",,0,0\n";
  record_frame(0, {});
  check_density();

  for (long step = 0; step < s.steps && prev > s.macro.stop_mass; ++step) {
    MacroStepReport rep;
    try {
      m.state = step_macro(g, m.state, s.tau, fields, m.projection, &rep);
    } catch (const SolverError &e) {
      solver_failed(dir, write, "macro", step + 1, e);
    }
    const long k = step + 1;
    const double in = interior_mass(g, m.state), out = absorbed_mass(m.state);
    const double drift = sum.initial_mass > 0.0 ? std::abs(in + out - sum.initial_mass) / sum.initial_mass : 0.0;
    sum.max_balance_drift = std::max(sum.max_balance_drift, drift);
    if (!(in < prev)) sum.strictly_decreasing = false;
    prev = in;
    double od_total = 0.0;
    for (std::size_t c = 0; c < g.size(); ++c) {
      sum.pressure[c] += rep.odometer[c];
      od_total += rep.odometer[c] * area;
    }
    check_density();
    fields = macro_step_fields(m, m.state);
    sum.samples.push_back({k, m.state.time, in, out, desired_speed(fields)});
    if (write) {
      const auto t = total_density();
      metrics << k << ',' << csv_num(m.state.time) << ',' << csv_num(in) << ',' << csv_num(out) << ','
              << csv_num(sum.samples.back().desired_speed) << ','
              << csv_num(*std::max_element(t.begin(), t.end())) << ',' << csv_num(od_total) << ',' << csv_num(drift)
              << '\n';
    }
    sum.steps = k;
    const bool jam = s.analysis.stop_on_jam && jam_detected(sum.samples, s.analysis.jam);
    const bool last = k == s.steps || in <= s.macro.stop_mass || jam;
    if (k % s.output.stride == 0 || last) record_frame(k, rep.odometer);
    if (jam) {
      sum.jammed = true;
      break;
    }
  }
  if (!s.analysis.stop_on_jam) sum.jammed = evacuation_metrics(sum.samples, s.analysis.jam).jammed;
  sum.final_interior = prev;
  if (sum.min_density == inf) sum.min_density = 0.0;
  if (write) {
    write_grid_csv(dir / "pressure_total.csv", g.nx(), g.ny(), sum.pressure);
    write_json(dir / "summary.json", {{"steps", sum.steps},
                                      {"initial_mass", sum.initial_mass},
                                      {"final_interior", sum.final_interior},
                                      {"max_balance_drift", sum.max_balance_drift},
                                      {"min_density", sum.min_density},
                                      {"max_density", sum.max_density},
                                      {"strictly_decreasing", sum.strictly_decreasing},
                                      {"jammed", sum.jammed},
                                      {"initial_rho_ref", m.initial_rho_ref}});
  }
  return sum;
}

RunSummary run_scenario(const Scenario &input, const fs::path &out, const RunOptions &opts) {
  RunSummary rs;
  rs.scenario = input;
  Scenario &s = rs.scenario;
  if (opts.seed) s.seed = *opts.seed;
  if (opts.stride) {
    if (*opts.stride < 1) throw InvalidArgument("stride: must be >= 1");
    s.output.stride = *opts.stride;
  }
  validate(s);
  if (opts.write) {
    fs::create_directories(out);
    json manifest = to_json(s);
    const SeedStreams seeds = split_seed(s.seed);
    json files = json::array();
    if (s.has_micro()) files.push_back("micro/");
    if (s.has_macro()) files.push_back("macro/");
    if (s.model == Model::both) files.push_back("compare/");
    manifest["run"] = {{"seeds", {{"placement", seeds.placement}, {"projection", seeds.projection}}},
                       {"seed_rule", "placement = derive_seed(seed, 1), projection = derive_seed(seed, 2), "
                                     "step correction seed = derive_seed(projection, step)"},
                       {"outputs", files}};
    write_json(out / "manifest.json", manifest);
  }
  if (s.has_micro()) rs.micro = run_micro(s, out / "micro", opts.write);
  if (s.has_macro()) rs.macro = run_macro(s, out / "macro", opts.write);
  if (opts.write && s.model == Model::both) {
    const CompareReport rep = compare_runs(out / "micro", out / "macro");
    write_compare(out / "compare", rep);
  }
  return rs;
}

} // namespace crowd
