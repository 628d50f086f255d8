// OpenMP kernels against their serial reference:: versions.
//   ./build/bench/kernels --benchmark_counters_tabular=true

#include "crowd/analysis.hpp"
#include "crowd/macro.hpp"
#include "crowd/micro.hpp"

#include <benchmark/benchmark.h>

#include <cmath>
#include <random>

using namespace crowd;

namespace {

constexpr double R = 0.25;

// A dense crowd on a square patch, n disks, gaps of a few percent of r.
Configuration crowd_of(int n) {
  const Configuration lat = generate_lattice({.kind = LatticeKind::triangular, .count = n, .radius = R * 1.02});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-0.005 * R, 0.005 * R);
  std::vector<Vec2> p = lat.positions;
  for (Vec2 &v : p) v += Vec2{U(rng), U(rng)};
  return Configuration(std::move(p), R);
}

Grid box(int n, double h) {
  return Grid(n, n, h, h, {0, 0}, std::vector<CellFlag>(static_cast<std::size_t>(n) * n, CellFlag::interior));
}

VelocityField swirl(const Grid &g) {
  VelocityField u{g.nx(), g.ny(), std::vector<Vec2>(g.size())};
  const Vec2 c{g.nx() * g.dx() / 2, g.ny() * g.dy() / 2};
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      const Vec2 r = g.center(i, j) - c;
      u.at(i, j) = perp(r) / std::max(norm(r), 1.0);
    }
  return u;
}

template <bool Parallel> void BM_active_constraints(benchmark::State &st) {
  const Configuration q = crowd_of(static_cast<int>(st.range(0)));
  const std::vector<Segment> walls{{{-1, -1}, {200, -1}}};
  for (auto _ : st) {
    ActiveSet a = Parallel ? active_constraints(q, walls, 0.05) : reference::active_constraints(q, walls, 0.05);
    benchmark::DoNotOptimize(a.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel> void BM_rasterize(benchmark::State &st) {
  const Configuration q = crowd_of(static_cast<int>(st.range(0)));
  double xmax = 0.0, ymax = 0.0;
  for (const Vec2 &v : q.positions) {
    xmax = std::max(xmax, v.x);
    ymax = std::max(ymax, v.y);
  }
  const double h = R / 2;
  const int n = static_cast<int>(std::ceil((std::max(xmax, ymax) + R) / h)) + 1;
  const Grid g = box(n, h);
  for (auto _ : st) {
    auto rho = Parallel ? rasterize_micro(q, g) : reference::rasterize_micro(q, g);
    benchmark::DoNotOptimize(rho.data());
  }
  st.SetItemsProcessed(st.iterations() * st.range(0));
}

template <bool Parallel> void BM_transport(benchmark::State &st) {
  const Grid g = box(static_cast<int>(st.range(0)), 0.1);
  const VelocityField u = swirl(g);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> rho(g.size());
  for (double &v : rho) v = U(rng);
  std::vector<double> ab(g.size(), 0.0);
  for (auto _ : st) {
    auto out = Parallel ? transport_density(g, rho, u, 0.09, ab) : reference::transport_density(g, rho, u, 0.09, ab);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * static_cast<long>(g.size()));
}

} // namespace

BENCHMARK(BM_active_constraints<false>)->Name("active_constraints/reference")->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_active_constraints<true>)->Name("active_constraints/openmp")->Arg(1000)->Arg(4000)->Arg(20000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_rasterize<false>)->Name("rasterize/reference")->Arg(2500)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_rasterize<true>)->Name("rasterize/openmp")->Arg(2500)->Arg(10000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_transport<false>)->Name("transport/reference")->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_transport<true>)->Name("transport/openmp")->Arg(200)->Arg(800)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
