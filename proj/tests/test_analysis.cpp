#include <doctest.h>

#include "crowd/analysis.hpp"
#include "crowd/error.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace crowd;

namespace {

constexpr double R = 0.2;

Grid box_grid(int nx, int ny, double h) {
  return Grid(nx, ny, h, h, {0, 0}, std::vector<CellFlag>(static_cast<std::size_t>(nx) * ny, CellFlag::interior));
}

double total(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

Configuration random_disks(int n, double w, double h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> X(R, w - R), Y(R, h - R);
  std::vector<Vec2> pos;
  while (static_cast<int>(pos.size()) < n) {
    const Vec2 p{X(rng), Y(rng)};
    bool ok = true;
    for (const Vec2 &o : pos) ok = ok && norm(o - p) >= 2 * R;
    if (ok) pos.push_back(p);
  }
  return Configuration(pos, R);
}

} // namespace

TEST_CASE("rasterization") {
  SUBCASE("one disk inside one large cell") {
    const Grid g = box_grid(3, 3, 1.0);
    const Configuration q({{1.5, 1.5}}, R);
    const auto exact = rasterize_micro(q, g, {.method = RasterMethod::exact});
    CHECK(exact[4] == doctest::Approx(std::numbers::pi * R * R).epsilon(1e-12));
    CHECK(total(exact) == doctest::Approx(std::numbers::pi * R * R).epsilon(1e-12));
    const auto fine = rasterize_micro(q, g, {.samples = 64});
    CHECK(fine[4] == doctest::Approx(std::numbers::pi * R * R).epsilon(1e-2));
  }
  SUBCASE("no disks") {
    const Grid g = box_grid(4, 4, 0.5);
    CHECK(total(rasterize_micro(Configuration({}, R), g)) == 0.0);
  }
  SUBCASE("100 random disks keep their total area") {
    const Grid g = box_grid(80, 60, 0.1);
    const Configuration q = random_disks(100, 8.0, 6.0, 3);
    const double area = 100 * std::numbers::pi * R * R;
    const double mass = total(rasterize_micro(q, g)) * g.cell_area();
    CHECK(std::abs(mass - area) <= 0.01 * area);
    const double exact = total(rasterize_micro(q, g, {.method = RasterMethod::exact})) * g.cell_area();
    CHECK(exact == doctest::Approx(area).epsilon(1e-12));
  }
  SUBCASE("binned gather equals the per-disk scatter") {
    const Grid g(37, 29, 0.13, 0.11, {-0.2, 0.1}, std::vector<CellFlag>(37 * 29, CellFlag::interior));
    const Configuration q = random_disks(60, 4.5, 3.3, 4);
    for (RasterMethod m : {RasterMethod::supersample, RasterMethod::exact}) {
      const auto a = rasterize_micro(q, g, {.method = m});
      const auto b = reference::rasterize_micro(q, g, {.method = m});
      CHECK(a == b);
    }
  }
  SUBCASE("exact disk-rectangle area") {
    const double a = std::numbers::pi;
    CHECK(disk_rectangle_area({0, 0}, 1, 0, 0, 5, 5) == doctest::Approx(a / 4).epsilon(1e-14));
    CHECK(disk_rectangle_area({0, 0}, 1, -1, -1, 1, 1) == doctest::Approx(a).epsilon(1e-14));
    CHECK(disk_rectangle_area({0, 0}, 1, 0, -3, 3, 3) == doctest::Approx(a / 2).epsilon(1e-14));
    CHECK(disk_rectangle_area({0, 0}, 1, 2, 2, 3, 3) == 0.0);
    // Circular segment beyond x = 0.5.
    const double seg = std::acos(0.5) - 0.5 * std::sqrt(0.75);
    CHECK(disk_rectangle_area({0, 0}, 1, 0.5, -2, 2, 2) == doctest::Approx(seg).epsilon(1e-13));
    // Random rectangles against a Monte-Carlo-free midpoint quadrature.
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-1.5, 1.5);
    for (int t = 0; t < 50; ++t) {
      double x0 = U(rng), x1 = U(rng), y0 = U(rng), y1 = U(rng);
      if (x0 > x1) std::swap(x0, x1);
      if (y0 > y1) std::swap(y0, y1);
      const int n = 2000;
      double q = 0.0;
      for (int k = 0; k < n; ++k) {
        const double x = x0 + (k + 0.5) * (x1 - x0) / n;
        const double h = x * x < 1 ? std::sqrt(1 - x * x) : 0.0;
        q += std::max(0.0, std::min(y1, h) - std::max(y0, -h)) * (x1 - x0) / n;
      }
      CHECK(disk_rectangle_area({0, 0}, 1, x0, y0, x1, y1) == doctest::Approx(q).epsilon(1e-4));
    }
  }
}

TEST_CASE("normalization") {
  const std::vector<double> raw(100, 0.53);
  const auto out = normalize_density(raw, 0.81);
  CHECK(total(out) / 100 == doctest::Approx(0.65).epsilon(0.01 / 0.65));
  CHECK(total(normalize_density(std::vector<double>(10, 0.0), 0.81)) == 0.0);
  for (double v : normalize_density(std::vector<double>(10, 0.7), 0.7)) CHECK(v == 1.0);
  for (double v : normalize_density(std::vector<double>{0.2, 0.9, 1.4}, 0.5)) CHECK(v <= 1.0);
  const std::vector<double> below{0.0, 0.3, 0.99};
  CHECK(normalize_density(below, 1.0) == below);
  CHECK_THROWS_AS(normalize_density(raw, 0.0), InvalidArgument);
  CHECK_THROWS_AS(normalize_density(raw, -1.0), InvalidArgument);
}

TEST_CASE("lattices") {
  for (LatticeKind kind : {LatticeKind::triangular, LatticeKind::cartesian, LatticeKind::loose_triangular}) {
    CAPTURE(static_cast<int>(kind));
    const Configuration q = generate_lattice({.kind = kind, .count = 3000, .radius = R});
    CHECK(q.size() == 3000);
    const auto [dd, dw] = min_gaps(q, {});
    CHECK(dd >= 0.0);
    const Vec2 p = lattice_period(kind, R);
    // A block of whole periods well inside the patch.
    const Vec2 lo{4 * p.x, 2 * p.y};
    const Vec2 hi{lo.x + 10 * p.x, lo.y + 8 * p.y};
    double xmax = 0, ymax = 0;
    for (const Vec2 &v : q.positions) {
      xmax = std::max(xmax, v.x);
      ymax = std::max(ymax, v.y);
    }
    REQUIRE(hi.x + 2 * R < xmax);
    REQUIRE(hi.y + 2 * R < ymax);
    const double rho = window_density(q, lo, hi, R / 4);
    CHECK(std::abs(rho - lattice_packing_fraction(kind)) <= 0.02);
  }
  CHECK(lattice_packing_fraction(LatticeKind::triangular) == doctest::Approx(0.9069).epsilon(1e-4));
  CHECK(lattice_packing_fraction(LatticeKind::cartesian) == doctest::Approx(0.7854).epsilon(1e-4));
  CHECK(lattice_packing_fraction(LatticeKind::loose_triangular) == doctest::Approx(0.6802).epsilon(1e-4));
  CHECK_THROWS_AS(generate_lattice({.count = 0}), InvalidArgument);
}

TEST_CASE("local jamming") {
  SUBCASE("simple cases") {
    CHECK_FALSE(is_locally_jammed(Configuration({{0, 0}}, R), {}, 0, 1e-9));
    CHECK_FALSE(is_locally_jammed(Configuration({{0, 0}, {2 * R, 0}}, R), {}, 0, 1e-9));
    const Configuration tri = generate_lattice({.kind = LatticeKind::triangular, .count = 49, .radius = R, .columns = 7});
    CHECK(is_locally_jammed(tri, {}, 3 * 7 + 3, 1e-9));
    CHECK_FALSE(is_locally_jammed(tri, {}, 0, 1e-9));
    // A disk in a corner with one neighbor along the diagonal is held.
    const std::vector<Segment> walls{{{0, 0}, {2, 0}}, {{0, 0}, {0, 2}}};
    const Configuration corner({{R, R}, {R + 2 * R / std::sqrt(2.0), R + 2 * R / std::sqrt(2.0)}}, R);
    CHECK(is_locally_jammed(corner, walls, 0, 1e-9));
  }
  SUBCASE("agrees with the 1-degree direction search") {
    std::mt19937_64 rng(21);
    std::uniform_int_distribution<int> deg(0, 359), cnt(1, 6);
    int jammed = 0, free = 0;
    for (int t = 0; t < 2000; ++t) {
      // Normals on whole degrees, so the direction grid resolves every cone.
      std::vector<Vec2> normals;
      const int k = cnt(rng);
      for (int c = 0; c < k; ++c) {
        const double a = deg(rng) * std::numbers::pi / 180.0;
        normals.push_back({std::cos(a), std::sin(a)});
      }
      const bool expect = oracle::jammed_by_direction_search(normals);
      CHECK(normals_jammed(normals) == expect);
      (expect ? jammed : free) += 1;
      // The same contacts realized by disks.
      std::vector<Vec2> pos{{0, 0}};
      for (const Vec2 &n : normals) {
        bool dup = false;
        for (const Vec2 &p : pos) dup = dup || norm(p - 2 * R * n) < 1e-9;
        if (!dup) pos.push_back(2 * R * n);
      }
      const Configuration q(pos, R);
      CHECK(is_locally_jammed(q, {}, 0, 1e-9) == expect);
      CHECK(static_cast<bool>(jamming_report(q, {}, 1e-9).jammed[0]) == expect);
    }
    CHECK(jammed > 100);
    CHECK(free > 100);
  }
  SUBCASE("report fraction") {
    const Configuration tri = generate_lattice({.kind = LatticeKind::triangular, .count = 100, .radius = R, .columns = 10});
    const JammingReport rep = jamming_report(tri, {}, 1e-9);
    long interior = 0;
    for (int i = 0; i < 100; ++i) {
      CHECK(static_cast<bool>(rep.jammed[i]) == is_locally_jammed(tri, {}, i, 1e-9));
      interior += rep.jammed[i];
    }
    CHECK(rep.fraction == doctest::Approx(interior / 100.0));
    CHECK(interior >= 64);
  }
}

TEST_CASE("macro feasibility") {
  const Grid g = box_grid(20, 20, 0.05);
  const std::vector<double> sat(g.size(), 1.0);
  auto field = [&](auto f) {
    VelocityField u{g.nx(), g.ny(), std::vector<Vec2>(g.size())};
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) u.at(i, j) = f(g.center(i, j));
    return u;
  };
  CHECK(macro_feasibility_check(g, field([](Vec2 p) { return Vec2{std::sqrt(3.0) * p.x, -p.y}; }), sat) == 0.0);
  CHECK(macro_feasibility_check(g, uniform_velocity(g, {0.3, -0.2}), sat) == 0.0);
  CHECK(macro_feasibility_check(g, field([](Vec2 p) { return Vec2{-p.x, -p.x}; }), sat) ==
        doctest::Approx(1.0).epsilon(1e-12));
  // Unsaturated cells are not constrained.
  CHECK(macro_feasibility_check(g, field([](Vec2 p) { return Vec2{-p.x, -p.y}; }), std::vector<double>(g.size(), 0.9)) ==
        0.0);

  std::vector<double> before(g.size(), 1.0), after(g.size(), 1.0);
  CHECK(realized_feasibility_check(g, before, after, 0.1) == 0.0);
  after[5] = 0.7;
  CHECK(realized_feasibility_check(g, before, after, 0.1) == 0.0);
}

TEST_CASE("evacuation metrics") {
  auto run = [](int steps, auto remaining, double speed) {
    std::vector<EvacuationSample> f;
    for (int s = 0; s <= steps; ++s) f.push_back({s, 0.01 * s, remaining(s), 10.0 - remaining(s), speed});
    return f;
  };
  SUBCASE("draining run") {
    const auto f = run(500, [](int s) { return std::max(0.0, 10.0 - 0.05 * s); }, 1.0);
    const EvacuationCurve c = evacuation_metrics(f);
    CHECK_FALSE(c.jammed);
    CHECK(c.samples.size() == f.size());
  }
  SUBCASE("stuck run") {
    const auto f = run(600, [](int s) { return s < 300 ? 10.0 - 0.01 * s : 7.0; }, 1.0);
    CHECK(evacuation_metrics(f).jammed);
    CHECK_FALSE(evacuation_metrics(std::span(f).first(400)).jammed);
    // Nobody wants to move: not a jam.
    CHECK_FALSE(evacuation_metrics(run(600, [](int s) { return s < 300 ? 10.0 - 0.01 * s : 7.0; }, 0.0)).jammed);
  }
  SUBCASE("empty from the start") {
    const auto f = run(300, [](int) { return 0.0; }, 1.0);
    const EvacuationCurve c = evacuation_metrics(f);
    CHECK_FALSE(c.jammed);
    for (const auto &s : c.samples) CHECK(s.remaining == 0.0);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(evacuation_metrics({}), InvalidArgument);
    std::vector<EvacuationSample> f{{1, 0.1, 1, 0, 1}, {0, 0.0, 1, 0, 1}};
    CHECK_THROWS_AS(evacuation_metrics(f), InvalidArgument);
  }
}
