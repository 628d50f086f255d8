#include "crowd/micro.hpp"

#include "crowd/error.hpp"

#include <algorithm>
#include <cmath>

namespace crowd {

MicroState::MicroState(Configuration c) : config(std::move(c)), velocity(config.size()) {}

namespace {

std::vector<double> warm_start_for(const ActiveSet &set, const std::vector<std::pair<std::uint64_t, double>> &prev) {
  std::vector<double> out(set.size(), 0.0);
  if (prev.empty()) return out;
  // Both lists are sorted by key.
  std::size_t p = 0;
  for (std::size_t k = 0; k < set.size(); ++k) {
    const std::uint64_t key = set[k].key();
    while (p < prev.size() && prev[p].first < key) ++p;
    if (p < prev.size() && prev[p].first == key) out[k] = prev[p].second;
  }
  return out;
}

bool contains_key(const ActiveSet &set, std::uint64_t key) {
  auto it = std::lower_bound(set.begin(), set.end(), key,
                             [](const ContactConstraint &c, std::uint64_t k) { return c.key() < k; });
  return it != set.end() && it->key() == key;
}

} // namespace

MicroState step_micro(const MicroWorld &world, const MicroState &state, double tau, std::span<const Vec2> desired,
                      const MicroParams &params, MicroStepReport *report) {
  const Configuration &q = state.config;
  const std::size_t n = q.size();
  if (!(tau > 0.0)) throw InvalidArgument("step_micro: tau must be > 0");
  if (desired.size() != n) throw InvalidArgument("step_micro: one desired velocity per disk is required");

  const double r = q.radius;
  const double tol_geom = params.tol_geom_rel * r;
  double umax = 0.0;
  std::vector<Vec2> predicted(q.positions);
  for (std::size_t i = 0; i < n; ++i) {
    if (!q.active(i)) continue;
    umax = std::max(umax, norm(desired[i]));
    predicted[i] = q.positions[i] + tau * desired[i];
  }
  const double eps = params.eps_act >= 0.0 ? params.eps_act : 2.0 * tau * umax + tol_geom;

  UzawaParams up;
  up.tol_kkt = params.tol_kkt_rel * r;
  up.max_iter = params.max_iter;

  ActiveSet set = active_constraints(q, world.walls, eps);
  SaddleSolution sol;
  int enlargements = 0;
  for (;;) {
    const std::vector<double> warm = warm_start_for(set, state.multipliers);
    sol = project_step_uzawa(q, predicted, set, up, warm);
    // The projection must coincide with the one onto the set built from all
    // pairs: any constraint that the corrected motion could have reached is
    // checked and, if violated, added before solving again.
    double dmax = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (q.active(i)) dmax = std::max(dmax, norm(sol.positions[i] - q.positions[i]));
    if (2.0 * dmax + tol_geom <= eps) break;
    const ActiveSet wider = active_constraints(q, world.walls, 2.0 * dmax + tol_geom);
    std::vector<ContactConstraint> added;
    for (const ContactConstraint &c : wider) {
      if (contains_key(set, c.key())) continue;
      double g = c.gap + dot(c.grad_i, sol.positions[c.i] - q.positions[c.i]);
      if (c.kind == ContactKind::disk) g += dot(c.grad_j, sol.positions[c.j] - q.positions[c.j]);
      if (g < -0.1 * up.tol_kkt) added.push_back(c);
    }
    if (added.empty()) break;
    set.insert(set.end(), added.begin(), added.end());
    std::sort(set.begin(), set.end(),
              [](const ContactConstraint &a, const ContactConstraint &b) { return a.key() < b.key(); });
    ++enlargements;
  }

  MicroState next;
  next.config = q;
  next.velocity.assign(n, Vec2{});
  next.time = state.time + tau;
  next.step = state.step + 1;
  std::vector<int> newly_exited;
  for (std::size_t i = 0; i < n; ++i) {
    if (!q.active(i)) continue;
    next.config.positions[i] = sol.positions[i];
    next.velocity[i] = (sol.positions[i] - q.positions[i]) / tau;
    const Segment path{q.positions[i], sol.positions[i]};
    for (const Segment &e : world.exits) {
      if (segments_intersect(path, e)) {
        next.config.exited[i] = 1;
        newly_exited.push_back(static_cast<int>(i));
        break;
      }
    }
  }
  next.multipliers.reserve(set.size());
  for (std::size_t k = 0; k < set.size(); ++k) {
    const ContactConstraint &c = set[k];
    if (sol.multipliers[k] <= 0.0 || !next.config.active(c.i)) continue;
    if (c.kind == ContactKind::disk && !next.config.active(c.j)) continue;
    next.multipliers.emplace_back(c.key(), sol.multipliers[k]);
  }

  if (report) {
    report->constraints = std::move(set);
    report->solution = std::move(sol);
    report->newly_exited = std::move(newly_exited);
    report->enlargements = enlargements;
  }
  return next;
}

} // namespace crowd
