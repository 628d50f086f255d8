#include <doctest.h>

#include "crowd/behavior.hpp"
#include "crowd/error.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace crowd;

namespace {

constexpr double R = 0.2;

// Predicate of the neighbor set, written out directly.
bool visible_and_near(const Configuration &q, int i, int j, Vec2 d, const BehaviorParams &p) {
  if (i == j) return false;
  const Vec2 v = q.positions[j] - q.positions[i];
  const double dist = std::sqrt(v.x * v.x + v.y * v.y);
  return dist < 2 * q.radius + p.proximity_range && (d.x * v.x + d.y * v.y) / dist >= std::cos(p.view_half_angle);
}

Configuration scattered(int n, double box, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, box);
  std::vector<Vec2> pos;
  while (static_cast<int>(pos.size()) < n) {
    const Vec2 p{U(rng), U(rng)};
    bool ok = true;
    for (const Vec2 &o : pos) ok = ok && norm(o - p) >= 2 * R;
    if (ok) pos.push_back(p);
  }
  return Configuration(pos, R);
}

} // namespace

TEST_CASE("neighbor set") {
  BehaviorParams p;
  p.proximity_range = 0.5;
  SUBCASE("lone disk") { CHECK(neighbor_set(Configuration({{0, 0}}, R), 0, {1, 0}, p).empty()); }
  SUBCASE("ahead and behind") {
    Configuration q({{0, 0}, {2 * R + 0.25, 0}, {-2 * R - 0.1, 0}}, R);
    const auto nb = neighbor_set(q, 0, {1, 0}, p);
    REQUIRE(nb.size() == 1);
    CHECK(nb[0] == 1);
    CHECK(neighbor_set(q, 0, {0, 0}, p).empty());
  }
  SUBCASE("range and view boundaries") {
    Configuration q({{0, 0}, {2 * R + 0.5, 0}, {std::cos(1.2) * 0.5, std::sin(1.2) * 0.5}}, R);
    CHECK(neighbor_set(q, 0, {1, 0}, p).empty());
  }
  SUBCASE("equals the brute-force predicate, binned or not") {
    for (int trial = 0; trial < 20; ++trial) {
      const Configuration q = scattered(120, 6.0, 100 + trial);
      std::mt19937_64 rng(trial);
      std::uniform_real_distribution<double> A(0, 2 * std::numbers::pi), L(0.0, 1.0), H(0.2, 2.8);
      p.proximity_range = L(rng);
      p.view_half_angle = H(rng);
      const SpatialBins bins(q.positions, q.exited, 2 * R + p.proximity_range);
      for (int i = 0; i < static_cast<int>(q.size()); ++i) {
        const double a = A(rng);
        const Vec2 d{std::cos(a), std::sin(a)};
        std::vector<int> expect;
        for (int j = 0; j < static_cast<int>(q.size()); ++j)
          if (visible_and_near(q, i, j, d, p)) expect.push_back(j);
        CHECK(neighbor_set(q, i, d, p) == expect);
        CHECK(neighbor_set(q, bins, i, d, p) == expect);
      }
    }
  }
}

TEST_CASE("deceleration") {
  BehaviorParams p;
  p.proximity_range = 0.5;
  Configuration q({{0, 0}, {2 * R, 0}, {2 * R + 0.25, 0.1}}, R);
  const std::vector<double> speeds{1.0, 0.0, 1.0};
  SUBCASE("empty neighbor set keeps the speed") { CHECK(decelerate(q, 0, {}, {1, 0}, speeds, 1.0, p) == 1.0); }
  SUBCASE("stationary neighbor dead ahead at contact stops the agent") {
    const std::vector<int> nb{1};
    CHECK(deceleration_weight(q, 0, 1, {1, 0}, p) == doctest::Approx(1.0));
    CHECK(decelerate(q, 0, nb, {1, 0}, speeds, 1.0, p) == 0.0);
  }
  SUBCASE("neighbors at the agent's own speed change nothing") {
    const std::vector<int> nb{2};
    CHECK(decelerate(q, 0, nb, {1, 0}, speeds, 1.0, p) == 1.0);
  }
  SUBCASE("weight vanishes on the region boundary") {
    Configuration e({{0, 0}, {2 * R + 0.5, 0}, {std::cos(std::numbers::pi / 3), std::sin(std::numbers::pi / 3)}}, R);
    CHECK(deceleration_weight(e, 0, 1, {1, 0}, p) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(deceleration_weight(e, 0, 2, {1, 0}, p) == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("output stays within [0, desired]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> S(0.0, 3.0);
    for (int trial = 0; trial < 50; ++trial) {
      const Configuration c = scattered(40, 4.0, 300 + trial);
      std::vector<double> prev(c.size());
      for (double &s : prev) s = S(rng);
      for (int i = 0; i < static_cast<int>(c.size()); ++i) {
        const auto nb = neighbor_set(c, i, {0, 1}, p);
        const double s = decelerate(c, i, nb, {0, 1}, prev, 1.3, p);
        CHECK(s >= 0.0);
        CHECK(s <= 1.3);
      }
    }
  }
}

TEST_CASE("bypass") {
  BehaviorParams p;
  p.proximity_range = 0.6;
  SUBCASE("no neighbors keeps the heading") {
    Configuration q({{0, 0}}, R);
    CHECK(bypass(q, 0, {}, {0, 1}, p) == Vec2{0, 1});
  }
  SUBCASE("single neighbor ahead: left tangent") {
    const double dist = 2 * R + 0.3;
    Configuration q({{0, 0}, {dist, 0}}, R);
    const std::vector<int> nb{1};
    const Vec2 out = bypass(q, 0, nb, {1, 0}, p);
    CHECK(std::atan2(out.y, out.x) == doctest::Approx(std::asin(2 * R / dist)).epsilon(1e-12));
    CHECK(norm(out) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("symmetric pair with a wide central gap keeps the heading") {
    Configuration q({{0, 0}, {0.7, 0.55}, {0.7, -0.55}}, R);
    const std::vector<int> nb{1, 2};
    CHECK(bypass(q, 0, nb, {1, 0}, p) == Vec2{1, 0});
  }
  SUBCASE("overlapping neighbor is an error") {
    Configuration q({{0, 0}, {R, 0}}, R);
    const std::vector<int> nb{1};
    CHECK_THROWS_AS(bypass(q, 0, nb, {1, 0}, p), InvalidArgument);
  }
  SUBCASE("the new heading never aims into a neighbor") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> A(0, 2 * std::numbers::pi);
    int steered = 0;
    for (int trial = 0; trial < 40; ++trial) {
      const Configuration q = scattered(40, 3.5, 500 + trial);
      for (int i = 0; i < static_cast<int>(q.size()); ++i) {
        const double a = A(rng);
        const Vec2 d{std::cos(a), std::sin(a)};
        const auto nb = neighbor_set(q, i, d, p);
        const Vec2 out = bypass(q, i, nb, d, p);
        CHECK(norm(out) == doctest::Approx(1.0).epsilon(1e-12));
        if (!(out == d)) ++steered;
        for (int j : nb) {
          // Distance from center j to the forward ray of i.
          const Vec2 v = q.positions[j] - q.positions[i];
          const double along = dot(v, out);
          const double miss = along > 0 ? std::abs(cross(out, v)) : norm(v);
          CHECK(miss >= 2 * R - 1e-9);
        }
      }
    }
    CHECK(steered > 50);
  }
}

TEST_CASE("assign_desired") {
  Room room = rectangle_room(0, 0, 4, 2);
  room.exits.push_back({{4, 0}, {4, 2}});
  const Grid g = build_grid(room, 0.1);
  const DistanceField d = compute_distance_field(g);
  const VelocityField right = desired_velocity_from_distance(g, d, 1.0);
  VelocityField left = right;
  for (Vec2 &v : left.value) v = -v;
  const std::vector<VelocityField> fields{right, left};

  SUBCASE("strategy none samples the field") {
    MicroState s(scattered(12, 1.8, 1));
    for (Vec2 &p : s.config.positions) p += Vec2{0.1, 0.1};
    const std::vector<int> types(12, 0);
    const std::vector<BehaviorParams> per{BehaviorParams{}};
    const auto out = assign_desired(g, s, types, fields, per);
    for (int i = 0; i < 12; ++i) CHECK(out[i] == sample_velocity(g, right, s.config.positions[i]));
  }
  SUBCASE("opposite types face each other") {
    MicroState s(Configuration({{1.0, 1.0}, {1.6, 1.0}}, R));
    const std::vector<int> types{0, 1};
    std::vector<BehaviorParams> per(2);
    per[1].field = 1;
    const auto out = assign_desired(g, s, types, fields, per);
    CHECK(dot(out[0], out[1]) < 0.0);
  }
  SUBCASE("deceleration behind stopped disks lowers the mean speed") {
    std::vector<Vec2> pos;
    for (int c = 0; c < 8; ++c)
      for (int r = 0; r < 4; ++r) pos.push_back({0.3 + 0.42 * c, 0.3 + 0.42 * r});
    MicroState s(Configuration(pos, R));
    s.velocity.assign(pos.size(), Vec2{});
    const std::vector<int> types(pos.size(), 0);
    std::vector<BehaviorParams> per(1);
    per[0].strategy = Strategy::decelerate;
    const auto out = assign_desired(g, s, types, fields, per);
    double mean = 0.0;
    for (const Vec2 &v : out) mean += norm(v) / out.size();
    CHECK(mean < 0.9);
  }
  SUBCASE("bad type ids") {
    MicroState s(Configuration({{1.0, 1.0}}, R));
    std::vector<BehaviorParams> per(1);
    CHECK_THROWS_AS(assign_desired(g, s, std::vector<int>{3}, fields, per), InvalidArgument);
    per[0].field = 7;
    CHECK_THROWS_AS(assign_desired(g, s, std::vector<int>{0}, fields, per), InvalidArgument);
  }
}
