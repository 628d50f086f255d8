#pragma once

#include "crowd/geometry.hpp"
#include "crowd/vec2.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace crowd {

/// Positions of N identical disks. Exited disks keep their last position but
/// take no further part in the dynamics.
struct Configuration {
  std::vector<Vec2> positions;
  double radius = 0.0;
  std::vector<std::uint8_t> exited;

  Configuration() = default;
  Configuration(std::vector<Vec2> q, double r);

  std::size_t size() const { return positions.size(); }
  bool active(std::size_t i) const { return exited[i] == 0; }
  std::size_t active_count() const;
};

enum class ContactKind : std::uint8_t { disk = 0, wall = 1 };

/// One row of the constraint matrix. The gradient is a sparse 2N-vector with
/// block `grad_i` at disk i and, for disk pairs, `grad_j` at disk j.
struct ContactConstraint {
  ContactKind kind = ContactKind::disk;
  int i = 0;
  int j = 0; ///< other disk, or wall segment index
  double gap = 0.0;
  Vec2 grad_i;
  Vec2 grad_j;

  /// Ordering key: (i, kind, j).
  std::uint64_t key() const {
    return (static_cast<std::uint64_t>(i) << 33) | (static_cast<std::uint64_t>(kind) << 32) |
           static_cast<std::uint32_t>(j);
  }
};

/// Constraints sorted by key; disk pairs appear once with i < j.
using ActiveSet = std::vector<ContactConstraint>;

/// D_ij = |q_j - q_i| - 2r with gradient -e_ij at i and +e_ij at j.
/// Throws InvalidArgument for coincident centers.
ContactConstraint gap_and_gradient(const Configuration &q, int i, int j);

/// Distance from disk i's center to the segment minus r; gradient is the unit
/// vector from the closest segment point to the center.
ContactConstraint wall_gap_and_gradient(const Configuration &q, int i, const Segment &wall, int wall_index);

/// Every disk-disk and disk-wall constraint of active disks with gap <= eps.
/// Uses spatial bins and an OpenMP loop over disks; the result is sorted.
ActiveSet active_constraints(const Configuration &q, std::span<const Segment> walls, double eps);

namespace reference {
/// O(N^2) all-pairs scan; serial reference for active_constraints.
ActiveSet active_constraints(const Configuration &q, std::span<const Segment> walls, double eps);
} // namespace reference

/// KKT residuals of a projection, all in meters.
struct KktResiduals {
  double primal_violation = 0.0; ///< max(0, -min linearized gap)
  double complementarity = 0.0;  ///< max_k min(lambda_k, |g_k|)
  double stationarity = 0.0;     ///< max_i |q_i - q~_i - sum lambda G|
  double min_multiplier = 0.0;
  long iterations = 0;
};

struct SaddleSolution {
  std::vector<Vec2> positions;
  std::vector<double> multipliers; ///< aligned with the ActiveSet, meters
  KktResiduals residuals;
  bool polished = false; ///< finished by the active-set refinement
};

struct UzawaParams {
  double tol_kkt = 1e-9; ///< absolute, meters
  long max_iter = -1;    ///< -1: 200 * |constraints| + 20000
  bool accelerate = true; ///< momentum with adaptive restart on the dual ascent
  bool polish = true;
  int polish_every = 16;
  long polish_rounds = -1; ///< constraints entering the refinement; -1: 3 * |constraints| + 50
};

/// Projects the predicted positions onto the local convex set
///   { q : D_k(q^n) + G_k(q^n).(q - q^n) >= 0 for all k in `constraints` }
/// by dual ascent on the saddle-point system
///   q = q~ + sum_k lambda_k G_k,  lambda >= 0,  lambda_k g_k(q) = 0,
/// i.e. lambda <- max(0, lambda - sigma g(q(lambda))) with sigma the inverse
/// of a Gershgorin bound on B B^T.
/// The Uzawa iterate is periodically handed to an active-set refinement that
/// solves the equality system on the guessed support exactly; it is accepted
/// only when it passes the KKT certificate. Throws SolverError when neither
/// reaches `tol_kkt` within `max_iter` sweeps.
SaddleSolution project_step_uzawa(const Configuration &qn, std::span<const Vec2> predicted,
                                  const ActiveSet &constraints, const UzawaParams &params,
                                  std::span<const double> warm_start = {});

KktResiduals kkt_residuals(const Configuration &qn, std::span<const Vec2> predicted, std::span<const Vec2> solution,
                           const ActiveSet &constraints, std::span<const double> multipliers);

/// Upper bound r * sqrt(12 / (N (N - 1) (N + 1))) on the uniform
/// prox-regularity constant of the feasible set of N disks.
double prox_regularity_bound(long n, double r);

struct ContactPressure {
  ContactKind kind;
  int i;
  int j;
  double value; ///< lambda / tau, gradients unnormalized (|G| = sqrt 2 for pairs)
};

std::vector<ContactPressure> pressures(const SaddleSolution &solution, const ActiveSet &constraints, double tau);

/// Static geometry seen by the disks.
struct MicroWorld {
  std::vector<Segment> walls;
  std::vector<Segment> exits;

  static MicroWorld from_room(const Room &room);
};

struct MicroParams {
  double tol_geom_rel = 1e-9; ///< in units of r
  double tol_kkt_rel = 1e-9;  ///< in units of r
  double eps_act = -1.0;      ///< -1: 2 tau |U|_inf + tol_geom
  long max_iter = -1;
};

struct MicroState {
  Configuration config;
  std::vector<Vec2> velocity; ///< actual velocity over the previous step
  double time = 0.0;
  long step = 0;
  /// Multipliers of the previous step keyed by ContactConstraint::key(),
  /// sorted; used to warm-start the next projection.
  std::vector<std::pair<std::uint64_t, double>> multipliers;

  MicroState() = default;
  explicit MicroState(Configuration c);
};

struct MicroStepReport {
  ActiveSet constraints;
  SaddleSolution solution;
  std::vector<int> newly_exited;
  int enlargements = 0; ///< re-solves after constraints outside eps_act were reached
};

/// One prediction-correction step: q~ = q^n + tau U, then projection onto the
/// local convex set built at q^n. Disks whose centers cross an exit segment
/// are marked exited.
MicroState step_micro(const MicroWorld &world, const MicroState &state, double tau, std::span<const Vec2> desired,
                      const MicroParams &params, MicroStepReport *report = nullptr);

/// Smallest disk-disk gap and smallest disk-wall gap over active disks.
std::pair<double, double> min_gaps(const Configuration &q, std::span<const Segment> walls);

} // namespace crowd
