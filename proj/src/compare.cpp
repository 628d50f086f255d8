#include "crowd/compare.hpp"

#include "crowd/error.hpp"
#include "crowd/output.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

namespace crowd {

namespace fs = std::filesystem;

namespace {

fs::path side(const fs::path &p, const char *preferred) {
  if (fs::exists(p / "metrics.csv")) return p;
  if (fs::exists(p / preferred / "metrics.csv")) return p / preferred;
  throw InvalidArgument(p.string() + ": not a run directory (no metrics.csv)");
}

struct Side {
  nlohmann::json grid;
  std::map<long, fs::path> frames;
  std::vector<EvacuationSample> samples;
};

Side load(const fs::path &dir) {
  Side s;
  s.grid = read_json(dir / "grid.json");
  s.samples = read_evacuation_csv(dir / "metrics.csv");
  if (s.samples.empty()) throw InvalidArgument((dir / "metrics.csv").string() + ": no samples");
  if (fs::is_directory(dir / "density"))
    for (const auto &e : fs::directory_iterator(dir / "density"))
      if (e.path().extension() == ".csv") s.frames[std::stol(e.path().stem().string())] = e.path();
  if (s.frames.empty()) throw InvalidArgument(dir.string() + ": no density frames");
  return s;
}

template <class Map> auto latest(const Map &m, long step) {
  auto it = m.upper_bound(step);
  if (it == m.begin()) throw InvalidArgument("compare: no frame at or before step " + std::to_string(step));
  return std::prev(it);
}

const EvacuationSample &sample_at(const std::vector<EvacuationSample> &v, long step) {
  auto it = std::upper_bound(v.begin(), v.end(), step, [](long s, const EvacuationSample &e) { return s < e.step; });
  if (it == v.begin()) throw InvalidArgument("compare: no sample at or before step " + std::to_string(step));
  return *std::prev(it);
}

double exited_fraction(const std::vector<EvacuationSample> &v, long step) {
  const double total = v.front().remaining + v.front().exited;
  return total > 0.0 ? sample_at(v, step).exited / total : 0.0;
}

} // namespace

CompareReport compare_runs(const fs::path &first, const fs::path &second) {
  const Side a = load(side(first, "micro"));
  const Side b = load(side(second, "macro"));
  if (a.grid != b.grid) throw InvalidArgument("compare: the runs do not share the same grid");
  const double area = a.grid.at("dx").get<double>() * a.grid.at("dy").get<double>();

  std::vector<long> steps;
  for (const auto &[k, p] : a.frames) steps.push_back(k);
  for (const auto &[k, p] : b.frames) steps.push_back(k);
  std::sort(steps.begin(), steps.end());
  steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
  const long start = std::max(a.frames.begin()->first, b.frames.begin()->first);

  CompareReport rep;
  {
    int nx, ny;
    for (double v : read_grid_csv(b.frames.begin()->second, nx, ny)) rep.initial_mass += v * area;
  }
  std::map<fs::path, std::vector<double>> cache;
  auto frame = [&](const fs::path &p) -> const std::vector<double> & {
    auto it = cache.find(p);
    if (it != cache.end()) return it->second;
    int nx, ny;
    return cache.emplace(p, read_grid_csv(p, nx, ny)).first->second;
  };
  for (long k : steps) {
    if (k < start) continue;
    const auto &ra = frame(latest(a.frames, k)->second);
    const auto &rb = frame(latest(b.frames, k)->second);
    if (ra.size() != rb.size()) throw InvalidArgument("compare: frame sizes differ at step " + std::to_string(k));
    CompareFrame f;
    f.step = k;
    f.time = sample_at(b.samples, k).time;
    for (std::size_t c = 0; c < ra.size(); ++c) f.l1 += std::abs(ra[c] - rb[c]) * area;
    f.micro_exited = exited_fraction(a.samples, k);
    f.macro_exited = exited_fraction(b.samples, k);
    rep.max_l1 = std::max(rep.max_l1, f.l1);
    f.shared = a.frames.count(k) && b.frames.count(k);
    if (f.shared && f.macro_exited < f.micro_exited) rep.macro_never_behind = false;
    if (rep.divergence_time < 0.0 && rep.initial_mass > 0.0 && f.l1 > 0.1 * rep.initial_mass)
      rep.divergence_time = f.time;
    rep.frames.push_back(f);
    // Frames are visited in step order, so a small cache is enough.
    if (cache.size() > 4) cache.clear();
  }
  return rep;
}

void write_compare(const fs::path &dir, const CompareReport &r) {
  fs::create_directories(dir);
  std::ofstream os(dir / "comparison.csv");
  if (!os) throw std::runtime_error((dir / "comparison.csv").string() + ": cannot open for writing");
  os << "step,time,l1,micro_exited,macro_exited,shared\n";
  os.precision(17);
  for (const CompareFrame &f : r.frames)
    os << f.step << ',' << f.time << ',' << f.l1 << ',' << f.micro_exited << ',' << f.macro_exited << ','
       << int(f.shared) << '\n';
  write_json(dir / "summary.json", {{"frames", r.frames.size()},
                                    {"initial_mass", r.initial_mass},
                                    {"max_l1", r.max_l1},
                                    {"divergence_time", r.divergence_time},
                                    {"macro_never_behind", r.macro_never_behind}});
}

} // namespace crowd
