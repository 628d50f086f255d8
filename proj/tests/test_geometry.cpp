#include <doctest.h>

#include "crowd/error.hpp"
#include "crowd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

using namespace crowd;

namespace {

Room unit_room_with_right_exit() {
  Room room = rectangle_room(0, 0, 1, 1);
  room.exits.push_back({{1, 0}, {1, 1}});
  return room;
}

} // namespace

TEST_CASE("build_grid flags cells") {
  SUBCASE("empty unit square") {
    const Grid g = build_grid(rectangle_room(0, 0, 1, 1), 0.1);
    CHECK(g.nx() == 10);
    CHECK(g.ny() == 10);
    CHECK(g.count(CellFlag::interior) == 100);
    CHECK(g.count(CellFlag::wall) == 0);
  }
  SUBCASE("obstacle over the center cell") {
    Room room = rectangle_room(0, 0, 1.1, 1.1);
    room.obstacles.push_back({{0.52, 0.52}, {0.58, 0.52}, {0.58, 0.58}, {0.52, 0.58}});
    const Grid g = build_grid(room, 0.1);
    CHECK(g.flag(5, 5) == CellFlag::wall);
    CHECK(g.count(CellFlag::wall) == 1);
  }
  SUBCASE("exit along the right side") {
    const Grid g = build_grid(unit_room_with_right_exit(), 0.1);
    CHECK(g.count(CellFlag::exit) == 10);
    for (int j = 0; j < 10; ++j) CHECK(g.flag(9, j) == CellFlag::exit);
  }
  SUBCASE("bad input") {
    CHECK_THROWS_AS(build_grid(rectangle_room(0, 0, 1, 1), 0.0), InvalidArgument);
    Room bowtie;
    bowtie.outer = {{0, 0}, {1, 1}, {1, 0}, {0, 1}};
    CHECK_THROWS_AS(build_grid(bowtie, 0.1), InvalidArgument);
    Room off = rectangle_room(0, 0, 1, 1);
    off.exits.push_back({{0.5, 0.5}, {0.6, 0.5}});
    CHECK_THROWS_AS(off.validate(), InvalidArgument);
  }
}

TEST_CASE("wall segments leave a gap at the exit") {
  Room room = rectangle_room(0, 0, 4, 2);
  room.exits.push_back({{4, 0.5}, {4, 1.5}});
  const auto walls = room.wall_segments();
  CHECK(walls.size() == 5);
  for (const Segment &w : walls) CHECK(distance(w, {4, 1.0}) >= 0.5 - 1e-12);
}

TEST_CASE("distance field on an empty square") {
  const Grid g = build_grid(unit_room_with_right_exit(), 0.05);
  const DistanceField d = compute_distance_field(g);
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) {
      if (g.flag(i, j) == CellFlag::exit) CHECK(d.at(i, j) == 0.0);
      CHECK(d.at(i, j) >= 0.0);
      CHECK(std::abs(d.at(i, j) - (1.0 - g.center(i, j).x)) <= g.dx());
    }
  CHECK_THROWS_AS(compute_distance_field(build_grid(rectangle_room(0, 0, 1, 1), 0.1)), InvalidArgument);
}

TEST_CASE("distance field routes around a wall") {
  // Thin wall x in [0.95, 1.05], y in [0, 1.5] between the agents (left) and the exit (right side).
  Room room = rectangle_room(0, 0, 2, 2);
  room.outer = {{0, 0}, {0.95, 0}, {0.95, 1.5}, {1.05, 1.5}, {1.05, 0}, {2, 0}, {2, 2}, {0, 2}};
  room.exits.push_back({{2, 0}, {2, 2}});
  const Grid g = build_grid(room, 0.05);
  const DistanceField d = compute_distance_field(g);
  int i, j;
  g.locate({0.5, 0.25}, i, j);
  const Vec2 p = g.center(i, j);
  // Unfolded geodesic: to the near top corner, across the wall top, then straight to the exit line.
  const Vec2 c1{0.95, 1.5}, c2{1.05, 1.5};
  const double exact = norm(c1 - p) + 0.1 + (2.0 - c2.x);
  CHECK(d.at(i, j) > 2.0 - p.x);
  CHECK(std::abs(d.at(i, j) - exact) <= 3.0 * g.dx());
}

TEST_CASE("distance field matches Euclidean distance in random convex rooms") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int trial = 0; trial < 12; ++trial) {
    // Random convex polygon: sorted angles on an ellipse.
    const int m = 5 + trial % 4;
    std::vector<double> ang(m);
    for (double &a : ang) a = 2.0 * M_PI * U(rng);
    std::sort(ang.begin(), ang.end());
    Room room;
    const double ax = 1.5 + U(rng), ay = 1.0 + U(rng);
    for (double a : ang) room.outer.push_back({ax * std::cos(a), ay * std::sin(a)});
    if (std::abs(signed_area(room.outer)) < 0.5) continue;
    room.exits.push_back({room.outer[0], room.outer[1]});
    Grid g;
    try {
      g = build_grid(room, 0.04);
    } catch (const InvalidArgument &) {
      continue;
    }
    if (g.count(CellFlag::exit) == 0) continue;
    const DistanceField d = compute_distance_field(g);
    std::vector<Vec2> exit_centers;
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i)
        if (g.flag(i, j) == CellFlag::exit) exit_centers.push_back(g.center(i, j));
    for (int j = 0; j < g.ny(); ++j)
      for (int i = 0; i < g.nx(); ++i) {
        if (g.flag(i, j) != CellFlag::interior) continue;
        double euclid = std::numeric_limits<double>::infinity();
        for (const Vec2 &e : exit_centers) euclid = std::min(euclid, norm(e - g.center(i, j)));
        CHECK(std::abs(d.at(i, j) - euclid) <= g.dx());
      }
  }
}

TEST_CASE("desired velocity from a distance field") {
  const Grid g = build_grid(unit_room_with_right_exit(), 0.05);
  const DistanceField d = compute_distance_field(g);
  const VelocityField u = desired_velocity_from_distance(g, d, 1.0);
  for (int j = 1; j < g.ny() - 1; ++j)
    for (int i = 1; i < g.nx() - 2; ++i) {
      CHECK(u.at(i, j).x == doctest::Approx(1.0).epsilon(1e-9));
      CHECK(std::abs(u.at(i, j).y) < 1e-9);
    }
  CHECK(u.max_speed() <= 1.0 + 1e-12);

  SUBCASE("corner exit: unit speed and descent direction") {
    Room room = rectangle_room(0, 0, 2, 2);
    room.exits.push_back({{2, 1.6}, {2, 2}});
    const Grid gc = build_grid(room, 0.05);
    const DistanceField dc = compute_distance_field(gc);
    const VelocityField uc = desired_velocity_from_distance(gc, dc, 1.3);
    for (int j = 1; j < gc.ny() - 1; ++j)
      for (int i = 1; i < gc.nx() - 1; ++i) {
        if (gc.flag(i, j) != CellFlag::interior) continue;
        CHECK(norm(uc.at(i, j)) == doctest::Approx(1.3).epsilon(1e-12));
        const Vec2 grad{(dc.at(i + 1, j) - dc.at(i - 1, j)) / (2 * gc.dx()),
                        (dc.at(i, j + 1) - dc.at(i, j - 1)) / (2 * gc.dy())};
        CHECK(dot(uc.at(i, j), grad) < 0.0);
      }
  }
  SUBCASE("constant distance gives zero velocity") {
    DistanceField flat{g.nx(), g.ny(), std::vector<double>(g.size(), 2.0)};
    const VelocityField z = desired_velocity_from_distance(g, flat, 1.0);
    CHECK(z.max_speed() == 0.0);
  }
}

TEST_CASE("bilinear sampling") {
  const Grid g = build_grid(rectangle_room(0, 0, 1, 1), 0.1);
  VelocityField ramp{g.nx(), g.ny(), std::vector<Vec2>(g.size())};
  auto f = [](Vec2 p) { return Vec2{0.3 + 2.0 * p.x - 0.7 * p.y, -1.1 * p.x + 0.25 * p.y}; };
  for (int j = 0; j < g.ny(); ++j)
    for (int i = 0; i < g.nx(); ++i) ramp.at(i, j) = f(g.center(i, j));
  CHECK(sample_velocity(g, ramp, g.center(3, 4)) == ramp.at(3, 4));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.05, 0.95);
  for (int k = 0; k < 200; ++k) {
    const Vec2 p{U(rng), U(rng)};
    const Vec2 s = sample_velocity(g, ramp, p), e = f(p);
    CHECK(std::abs(s.x - e.x) < 1e-12);
    CHECK(std::abs(s.y - e.y) < 1e-12);
  }
  VelocityField step{g.nx(), g.ny(), std::vector<Vec2>(g.size())};
  step.at(2, 2) = {1, 0};
  const Vec2 mid = 0.5 * (g.center(2, 2) + g.center(3, 2));
  CHECK(sample_velocity(g, step, mid).x == doctest::Approx(0.5));
  // Outside the box the boundary values are used.
  CHECK(sample_velocity(g, ramp, {-3.0, 0.05}) == ramp.at(0, 0));
}
