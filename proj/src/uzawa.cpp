#include "crowd/micro.hpp"

#include "crowd/error.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace crowd {

namespace {

struct Slot {
  int constraint;
  Vec2 grad;
};

// Sparse B stored twice: rows (constraints) and columns grouped per disk.
struct ConstraintMatrix {
  const ActiveSet &rows;
  std::vector<int> disk_start;
  std::vector<Slot> disk_slots;

  ConstraintMatrix(const ActiveSet &set, std::size_t n_disks) : rows(set), disk_start(n_disks + 1, 0) {
    for (const ContactConstraint &c : set) {
      ++disk_start[c.i + 1];
      if (c.kind == ContactKind::disk) ++disk_start[c.j + 1];
    }
    for (std::size_t d = 0; d < n_disks; ++d) disk_start[d + 1] += disk_start[d];
    disk_slots.resize(disk_start.back());
    std::vector<int> fill(disk_start.begin(), disk_start.end() - 1);
    for (std::size_t k = 0; k < set.size(); ++k) {
      const ContactConstraint &c = set[k];
      disk_slots[fill[c.i]++] = {static_cast<int>(k), c.grad_i};
      if (c.kind == ContactKind::disk) disk_slots[fill[c.j]++] = {static_cast<int>(k), c.grad_j};
    }
  }

  std::size_t size() const { return rows.size(); }
  std::size_t disks() const { return disk_start.size() - 1; }

  // G_k . v
  double row_dot(std::size_t k, std::span<const Vec2> v) const {
    const ContactConstraint &c = rows[k];
    double s = dot(c.grad_i, v[c.i]);
    if (c.kind == ContactKind::disk) s += dot(c.grad_j, v[c.j]);
    return s;
  }

  // out = base + B^T lambda, gathered per disk.
  void apply_transpose(std::span<const Vec2> base, std::span<const double> lambda, std::span<Vec2> out) const {
    const int n = static_cast<int>(disks());
#pragma omp parallel for schedule(static) if (n > 4096)
    for (int d = 0; d < n; ++d) {
      Vec2 acc = base[d];
      for (int s = disk_start[d]; s < disk_start[d + 1]; ++s) acc += lambda[disk_slots[s].constraint] * disk_slots[s].grad;
      out[d] = acc;
    }
  }

  // g_k = gap_k + G_k . disp
  void linearized_gaps(std::span<const Vec2> disp, std::span<double> g) const {
    const int m = static_cast<int>(size());
#pragma omp parallel for schedule(static) if (m > 4096)
    for (int k = 0; k < m; ++k) g[k] = rows[k].gap + row_dot(k, disp);
  }

  // Gershgorin bound on the largest eigenvalue of C = B B^T.
  double max_row_sum() const {
    double best = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      const ContactConstraint &c = rows[k];
      double s = 0.0;
      auto add_disk = [&](int d, Vec2 gk) {
        for (int t = disk_start[d]; t < disk_start[d + 1]; ++t) s += std::abs(dot(gk, disk_slots[t].grad));
      };
      add_disk(c.i, c.grad_i);
      if (c.kind == ContactKind::disk) add_disk(c.j, c.grad_j);
      best = std::max(best, s);
    }
    return best;
  }
};

struct Residual {
  double primal = 0.0;
  double comp = 0.0;
};

Residual residual_of(std::span<const double> lambda, std::span<const double> g) {
  Residual r;
  for (std::size_t k = 0; k < g.size(); ++k) {
    r.primal = std::max(r.primal, -g[k]);
    r.comp = std::max(r.comp, std::min(lambda[k], std::abs(g[k])));
  }
  return r;
}

// Solves (C_AA + eps I) x = rhs on the support `active`, C = B B^T. The
// active gradients may be linearly dependent, so C_AA alone can be singular;
// the shift makes the restricted dual strictly convex and picks the
// multipliers of smallest norm as eps -> 0. It relaxes each active gap to
// -eps * lambda_k, far below the KKT tolerance, which is checked on the exact
// system afterwards.
bool solve_on_support(const ConstraintMatrix &B, const std::vector<int> &active, std::span<const double> rhs,
                      std::vector<double> &x) {
  constexpr double eps = 1e-12;
  const int na = static_cast<int>(active.size());
  std::vector<int> pos(B.size(), -1);
  for (int a = 0; a < na; ++a) pos[active[a]] = a;
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(na) * 8);
  for (int a = 0; a < na; ++a) {
    const ContactConstraint &c = B.rows[active[a]];
    auto add_disk = [&](int d, Vec2 gk) {
      for (int t = B.disk_start[d]; t < B.disk_start[d + 1]; ++t) {
        const int b = pos[B.disk_slots[t].constraint];
        if (b >= 0) trip.emplace_back(a, b, dot(gk, B.disk_slots[t].grad));
      }
    };
    add_disk(c.i, c.grad_i);
    if (c.kind == ContactKind::disk) add_disk(c.j, c.grad_j);
    trip.emplace_back(a, a, eps);
  }
  Eigen::SparseMatrix<double> C(na, na);
  C.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(C);
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::Map<const Eigen::VectorXd> b(rhs.data(), na);
  Eigen::VectorXd sol = ldlt.solve(b);
  // Two rounds of refinement against the shifted matrix itself.
  for (int it = 0; it < 2; ++it) sol += ldlt.solve(b - C * sol);
  if (!sol.allFinite()) return false;
  x.assign(sol.data(), sol.data() + na);
  return true;
}

} // namespace

KktResiduals kkt_residuals(const Configuration &qn, std::span<const Vec2> predicted, std::span<const Vec2> solution,
                           const ActiveSet &constraints, std::span<const double> multipliers) {
  const std::size_t n = qn.size();
  KktResiduals out;
  std::vector<Vec2> disp(n), reaction(n);
  for (std::size_t d = 0; d < n; ++d) {
    disp[d] = solution[d] - qn.positions[d];
    reaction[d] = solution[d] - predicted[d];
  }
  out.min_multiplier = constraints.empty() ? 0.0 : std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < constraints.size(); ++k) {
    const ContactConstraint &c = constraints[k];
    double g = c.gap + dot(c.grad_i, disp[c.i]);
    reaction[c.i] -= multipliers[k] * c.grad_i;
    if (c.kind == ContactKind::disk) {
      g += dot(c.grad_j, disp[c.j]);
      reaction[c.j] -= multipliers[k] * c.grad_j;
    }
    out.primal_violation = std::max(out.primal_violation, -g);
    out.complementarity = std::max(out.complementarity, std::min(std::max(multipliers[k], 0.0), std::abs(g)));
    out.min_multiplier = std::min(out.min_multiplier, multipliers[k]);
  }
  for (std::size_t d = 0; d < n; ++d) out.stationarity = std::max(out.stationarity, norm(reaction[d]));
  return out;
}

SaddleSolution project_step_uzawa(const Configuration &qn, std::span<const Vec2> predicted,
                                  const ActiveSet &constraints, const UzawaParams &params,
                                  std::span<const double> warm_start) {
  const std::size_t n = qn.size();
  if (predicted.size() != n) throw InvalidArgument("project_step_uzawa: predicted size mismatch");
  const std::size_t m = constraints.size();
  SaddleSolution out;
  if (m == 0) {
    out.positions.assign(predicted.begin(), predicted.end());
    return out;
  }
  if (!warm_start.empty() && warm_start.size() != m)
    throw InvalidArgument("project_step_uzawa: warm start size mismatch");

  const ConstraintMatrix B(constraints, n);
  const double tol = params.tol_kkt;
  const long max_iter = params.max_iter >= 0 ? params.max_iter : 200 * static_cast<long>(m) + 20000;

  std::vector<Vec2> base(n), disp(n);
  for (std::size_t d = 0; d < n; ++d) base[d] = predicted[d] - qn.positions[d];
  std::vector<double> c0(m); // linearized gaps of the prediction
  B.linearized_gaps(base, c0);

  std::vector<double> lambda(m, 0.0), g(m);
  if (!warm_start.empty())
    for (std::size_t k = 0; k < m; ++k) lambda[k] = std::max(0.0, warm_start[k]);
  const double sigma = 1.0 / B.max_row_sum();

  auto finish = [&](bool polished, long it) {
    // q = q~ + B^T lambda, so disks without active reactions keep q~ exactly.
    out.positions.resize(n);
    B.apply_transpose(predicted, lambda, out.positions);
    out.multipliers = lambda;
    out.polished = polished;
    out.residuals = kkt_residuals(qn, predicted, out.positions, constraints, lambda);
    out.residuals.iterations = it;
    return out;
  };

  // Active-set refinement of the (slightly regularized) dual problem
  //   min 1/2 l.(C + eps I) l + c0.l  subject to  l >= 0
  // started from the current iterate, in the manner of Lawson and Hanson:
  // the free set F = {l > 0} is solved exactly, a component that would turn
  // negative stops the step at the boundary and leaves F, and once F is
  // optimal the most violated constraint outside it enters. The result is
  // accepted only when it passes the KKT certificate.
  auto polish = [&]() -> bool {
    const long max_enter = params.polish_rounds >= 0 ? params.polish_rounds : 3 * static_cast<long>(m) + 50;
    std::vector<double> lam(lambda), tg(m), rhs, z;
    std::vector<Vec2> tdisp(n);
    std::vector<int> freeset;
    std::vector<char> entering(m, 0), tabu(m, 0);
    for (long round = 0; round <= max_enter; ++round) {
      for (std::size_t inner = 0; inner <= m; ++inner) {
        freeset.clear();
        for (std::size_t k = 0; k < m; ++k)
          if (lam[k] > 0.0 || entering[k]) freeset.push_back(static_cast<int>(k));
        if (freeset.empty()) break;
        rhs.resize(freeset.size());
        for (std::size_t a = 0; a < freeset.size(); ++a) rhs[a] = -c0[freeset[a]];
        if (!solve_on_support(B, freeset, rhs, z)) return false;
        double step = 1.0;
        std::size_t blocking = freeset.size();
        for (std::size_t a = 0; a < freeset.size(); ++a) {
          const double l = lam[freeset[a]];
          if (z[a] <= 0.0 && l + step * (z[a] - l) <= 0.0) {
            step = l / (l - z[a]);
            blocking = a;
          }
        }
        if (blocking < freeset.size() && entering[freeset[blocking]] && step <= 0.0) {
          // Entered with the wrong sign: try the others first.
          entering[freeset[blocking]] = 0;
          tabu[freeset[blocking]] = 1;
          continue;
        }
        if (step > 0.0) std::fill(tabu.begin(), tabu.end(), 0);
        for (std::size_t a = 0; a < freeset.size(); ++a) {
          double &l = lam[freeset[a]];
          l += step * (z[a] - l);
          if (l < 0.0 || a == blocking) l = 0.0;
        }
        std::fill(entering.begin(), entering.end(), 0);
        if (blocking == freeset.size()) break;
      }
      B.apply_transpose(base, lam, tdisp);
      B.linearized_gaps(tdisp, tg);
      // Aim at a tenth of the tolerance; settle for the tolerance itself only
      // when nothing is left to enter.
      const Residual r = residual_of(lam, tg);
      const bool ok = r.primal <= tol && r.comp <= tol;
      if (r.primal <= 0.1 * tol && r.comp <= 0.1 * tol) {
        lambda = lam;
        return true;
      }
      int most = -1;
      for (std::size_t k = 0; k < m; ++k) {
        if (lam[k] != 0.0 || tabu[k] || !(tg[k] < -0.1 * tol)) continue;
        if (most < 0 || tg[k] < tg[most]) most = static_cast<int>(k);
      }
      if (most < 0) {
        if (ok) lambda = lam;
        return ok;
      }
      entering[most] = 1;
    }
    return false;
  };

  // Projected gradient on the dual, optionally with Nesterov momentum and
  // gradient-based restart. The residual is always measured at lambda.
  std::vector<double> y(lambda), prev(m), gy(m);
  std::vector<Vec2> ydisp(n);
  double t = 1.0;
  Residual r;
  // A failed refinement doubles the wait before the next one.
  long next_polish = warm_start.empty() ? params.polish_every : 0;
  long polish_gap = params.polish_every;
  for (long it = 0; it <= max_iter; ++it) {
    B.apply_transpose(base, lambda, disp);
    B.linearized_gaps(disp, g);
    r = residual_of(lambda, g);
    if (r.primal <= tol && r.comp <= tol) return finish(false, it);
    if (params.polish && it == next_polish) {
      if (polish()) return finish(true, it);
      polish_gap *= 2;
      next_polish = it + polish_gap;
    }
    prev = lambda;
    if (params.accelerate) {
      B.apply_transpose(base, y, ydisp);
      B.linearized_gaps(ydisp, gy);
      for (std::size_t k = 0; k < m; ++k) lambda[k] = std::max(0.0, y[k] - sigma * gy[k]);
      double restart = 0.0;
      for (std::size_t k = 0; k < m; ++k) restart += (y[k] - lambda[k]) * (lambda[k] - prev[k]);
      if (restart > 0.0) {
        t = 1.0;
        y = lambda;
      } else {
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / tn;
        for (std::size_t k = 0; k < m; ++k) y[k] = lambda[k] + beta * (lambda[k] - prev[k]);
        t = tn;
      }
    } else {
      for (std::size_t k = 0; k < m; ++k) lambda[k] = std::max(0.0, lambda[k] - sigma * g[k]);
    }
  }
  throw SolverError("project_step_uzawa: no convergence after " + std::to_string(max_iter) +
                        " iterations (primal violation " + std::to_string(r.primal) + ", complementarity " +
                        std::to_string(r.comp) + ")",
                    max_iter, std::max(r.primal, r.comp));
}

} // namespace crowd
