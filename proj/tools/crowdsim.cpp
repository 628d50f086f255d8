// crowdsim: run scenarios and post-process run directories.

#include "crowd/compare.hpp"
#include "crowd/error.hpp"
#include "crowd/output.hpp"
#include "crowd/run.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace crowd;
using nlohmann::json;

namespace {

void print_run(const RunSummary &r, const fs::path &out) {
  std::printf("%s: %s, seed %llu -> %s\n", r.scenario.name.c_str(), to_string(r.scenario.model).c_str(),
              static_cast<unsigned long long>(r.scenario.seed), out.string().c_str());
  if (r.micro)
    std::printf("  micro: %ld steps, %ld of %ld remaining%s, min gap %.3g m, min pressure %.3g\n", r.micro->steps,
                r.micro->remaining, r.micro->initial, r.micro->jammed ? ", JAMMED" : "", r.micro->min_disk_gap,
                r.micro->min_pressure);
  if (r.micro && r.micro->eta_warning)
    std::fprintf(stderr, "  note: tau * max speed = %.3g m is not small against the prox-regularity bound %.3g m\n",
                 r.micro->step_length, r.micro->eta);
  if (r.macro)
    std::printf("  macro: %ld steps, interior mass %.6g of %.6g%s, balance drift %.3g\n", r.macro->steps,
                r.macro->final_interior, r.macro->initial_mass, r.macro->jammed ? ", JAMMED" : "",
                r.macro->max_balance_drift);
}

// Micro frames written by `run`: one JSON object per line.
std::vector<std::pair<long, Configuration>> read_frames(const fs::path &path, double radius) {
  std::ifstream is(path);
  if (!is) throw InvalidArgument(path.string() + ": cannot open");
  std::vector<std::pair<long, Configuration>> out;
  std::string line;
  long ln = 0;
  while (std::getline(is, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      std::vector<Vec2> pos;
      for (const auto &p : j.at("positions")) pos.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
      Configuration q(std::move(pos), radius);
      const auto ex = j.at("exited").get<std::vector<int>>();
      if (ex.size() != q.size()) throw InvalidArgument("exited and positions differ in length");
      for (std::size_t i = 0; i < ex.size(); ++i) q.exited[i] = static_cast<std::uint8_t>(ex[i] != 0);
      out.emplace_back(j.at("step").get<long>(), std::move(q));
    } catch (const json::exception &e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(ln) + ": " + e.what());
    } catch (const InvalidArgument &e) {
      throw InvalidArgument(path.string() + ":" + std::to_string(ln) + ": " + e.what());
    }
  }
  return out;
}

json curve_json(const fs::path &metrics, const JamParams &jam) {
  const auto samples = read_evacuation_csv(metrics);
  const EvacuationCurve c = evacuation_metrics(samples, jam);
  const EvacuationSample &first = c.samples.front(), &last = c.samples.back();
  const double total = first.remaining + first.exited;
  json j{{"samples", c.samples.size()},
         {"final_step", last.step},
         {"final_time", last.time},
         {"initial", total},
         {"remaining", last.remaining},
         {"exited", last.exited},
         {"jammed", c.jammed}};
  for (double q : {0.5, 0.9, 1.0}) {
    json t = nullptr;
    for (const auto &s : c.samples)
      if (total > 0.0 && s.exited >= q * total * (1.0 - 1e-12)) {
        t = s.time;
        break;
      }
    char key[32];
    std::snprintf(key, sizeof key, "time_to_%g_percent", q * 100.0);
    j[key] = t;
  }
  return j;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Two-level crowd simulator: disk model and density model"};
  app.require_subcommand(1);

  fs::path scenario_path, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<long> stride;

  auto *run = app.add_subcommand("run", "Run a scenario and write its run directory");
  run->add_option("-s,--scenario", scenario_path, "Scenario or manifest JSON")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", out_dir, "Output directory")->required();
  run->add_option("--seed", seed, "Override the scenario seed");
  run->add_option("--stride", stride, "Write a frame every N steps")->check(CLI::PositiveNumber);

  fs::path first, second;
  auto *cmp = app.add_subcommand("compare", "Compare a micro run and a macro run frame by frame");
  cmp->add_option("micro", first, "Micro run (run root or its micro/ directory)")->required();
  cmp->add_option("macro", second, "Macro run (run root or its macro/ directory)")->required();
  cmp->add_option("-o,--out", out_dir, "Directory for comparison.csv and summary.json");

  fs::path frames_path;
  double rho_ref = 0.0;
  auto *ras = app.add_subcommand("rasterize", "Rasterize micro frames onto the scenario grid");
  ras->add_option("-s,--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  ras->add_option("-f,--frames", frames_path, "frames.jsonl; the initial configuration when omitted")
      ->check(CLI::ExistingFile);
  ras->add_option("-o,--out", out_dir, "Output directory")->required();
  ras->add_option("--rho-ref", rho_ref, "Normalization; the largest value when omitted")
      ->check(CLI::PositiveNumber);
  ras->add_option("--stride", stride, "Keep every N-th frame")->check(CLI::PositiveNumber);
  ras->add_option("--seed", seed, "Override the scenario seed");

  fs::path run_dir;
  JamParams jam;
  auto *met = app.add_subcommand("metrics", "Evacuation curve and jam verdict of a run directory");
  met->add_option("run", run_dir, "Run root or model directory")->required()->check(CLI::ExistingDirectory);
  met->add_option("--window", jam.window, "Jam window in steps")->check(CLI::PositiveNumber);
  met->add_option("--rel-change", jam.rel_change, "Jam threshold, relative change over the window");
  met->add_option("-o,--out", out_dir, "Directory for metrics.json");

  auto *dist = app.add_subcommand("distance-field", "Write distance and desired velocity fields per type");
  dist->add_option("-s,--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  dist->add_option("-o,--out", out_dir, "Output directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunOptions opts;
      opts.seed = seed;
      opts.stride = stride;
      const RunSummary r = run_scenario(load_scenario(scenario_path), out_dir, opts);
      print_run(r, out_dir);
    } else if (*cmp) {
      const CompareReport r = compare_runs(first, second);
      if (!out_dir.empty()) write_compare(out_dir, r);
      std::printf("%zu frames, max L1 %.6g, initial mass %.6g, divergence time %s, macro never behind: %s\n",
                  r.frames.size(), r.max_l1, r.initial_mass,
                  r.divergence_time < 0 ? "none" : std::to_string(r.divergence_time).c_str(),
                  r.macro_never_behind ? "yes" : "no");
    } else if (*ras) {
      Scenario s = load_scenario(scenario_path);
      if (seed) s.seed = *seed;
      validate(s);
      const Grid grid = build_grid(s.room, s.resolution);
      std::vector<std::pair<long, Configuration>> frames;
      if (frames_path.empty())
        frames.emplace_back(0, prepare_micro(s).state.config);
      else
        frames = read_frames(frames_path, s.micro.radius);
      std::vector<std::pair<long, std::vector<double>>> raw;
      double mx = 0.0;
      for (std::size_t f = 0; f < frames.size(); ++f) {
        if (stride && f % *stride != 0 && f + 1 != frames.size()) continue;
        raw.emplace_back(frames[f].first, rasterize_micro(frames[f].second, grid, s.analysis.raster));
        for (double v : raw.back().second) mx = std::max(mx, v);
      }
      const double ref = rho_ref > 0.0 ? rho_ref : (mx > 0.0 ? mx : 1.0);
      for (const auto &[step, r] : raw) {
        const auto rho = normalize_density(r, ref);
        write_grid_csv(out_dir / frame_name(step, "csv"), grid.nx(), grid.ny(), rho);
        write_pgm(out_dir / frame_name(step, "pgm"), grid.nx(), grid.ny(), rho, 1.0);
      }
      write_json(out_dir / "grid.json", grid_json(grid));
      std::printf("%zu frames, rho_ref %.6g -> %s\n", raw.size(), ref, out_dir.string().c_str());
    } else if (*met) {
      json j;
      bool any = false;
      for (const char *model : {"micro", "macro"})
        if (fs::exists(run_dir / model / "metrics.csv")) {
          j[model] = curve_json(run_dir / model / "metrics.csv", jam);
          any = true;
        }
      if (!any) j["run"] = curve_json(run_dir / "metrics.csv", jam);
      if (!out_dir.empty()) write_json(out_dir / "metrics.json", j);
      std::printf("%s\n", j.dump(2).c_str());
    } else if (*dist) {
      const Scenario s = load_scenario(scenario_path);
      validate(s);
      const Grid grid = build_grid(s.room, s.resolution);
      const auto fields = type_fields(s, grid);
      std::vector<double> flags(grid.size());
      for (std::size_t c = 0; c < grid.size(); ++c) flags[c] = static_cast<double>(grid.flag(c));
      write_grid_csv(out_dir / "flags.csv", grid.nx(), grid.ny(), flags);
      write_json(out_dir / "grid.json", grid_json(grid));
      for (std::size_t t = 0; t < s.types.size(); ++t) {
        Room room = s.room;
        if (!s.types[t].exits.empty()) {
          room.exits.clear();
          for (int e : s.types[t].exits) room.exits.push_back(s.room.exits[e]);
        }
        const DistanceField d = compute_distance_field(build_grid(room, s.resolution));
        std::vector<double> dv = d.value;
        for (double &v : dv)
          if (!std::isfinite(v)) v = -1.0; // unreachable
        std::vector<double> u(grid.size()), v(grid.size());
        for (std::size_t c = 0; c < grid.size(); ++c) {
          u[c] = fields[t].value[c].x;
          v[c] = fields[t].value[c].y;
        }
        const std::string n = s.types[t].name;
        write_grid_csv(out_dir / ("distance_" + n + ".csv"), grid.nx(), grid.ny(), dv);
        write_grid_csv(out_dir / ("velocity_" + n + "_x.csv"), grid.nx(), grid.ny(), u);
        write_grid_csv(out_dir / ("velocity_" + n + "_y.csv"), grid.nx(), grid.ny(), v);
        std::printf("%s: %zu unreachable cells\n", n.c_str(), d.unreachable_count(grid));
      }
    }
  } catch (const InvalidArgument &e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception &e) {
    std::fprintf(stderr, "failed: %s\n", e.what());
    return 1;
  }
  return 0;
}
