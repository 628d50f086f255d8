#pragma once

#include "crowd/geometry.hpp"
#include "crowd/micro.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace crowd {

enum class RasterMethod { supersample, exact };

struct RasterOptions {
  RasterMethod method = RasterMethod::supersample;
  int samples = 4; ///< per axis and cell, supersampling only
};

/// Covered area fraction of each cell by the union of the (disjoint) disks of
/// active agents. Wall cells are rasterized like any other cell. OpenMP over
/// bands of rows; equal bit for bit to the serial version.
std::vector<double> rasterize_micro(const Configuration &q, const Grid &grid, const RasterOptions &opts = {});

namespace reference {
/// Serial per-disk scatter version of rasterize_micro.
std::vector<double> rasterize_micro(const Configuration &q, const Grid &grid, const RasterOptions &opts = {});
} // namespace reference

/// Area of the disk of radius r centered at c intersected with the rectangle
/// [x0, x1] x [y0, y1].
double disk_rectangle_area(Vec2 c, double r, double x0, double y0, double x1, double y1);

/// min(rho / ref, 1) per cell. Throws InvalidArgument unless ref > 0.
std::vector<double> normalize_density(std::span<const double> raw, double ref);

/// Mean density over the cells whose centers lie in [lo, hi].
double window_mean(const Grid &grid, std::span<const double> rho, Vec2 lo, Vec2 hi);

/// Mean covered fraction of the rectangle [lo, hi], rasterized on a grid of
/// cells no larger than `resolution` that tiles the rectangle exactly.
double window_density(const Configuration &q, Vec2 lo, Vec2 hi, double resolution, const RasterOptions &opts = {});

enum class LatticeKind { triangular, cartesian, loose_triangular };

struct LatticeSpec {
  LatticeKind kind = LatticeKind::triangular;
  long count = 1;
  double radius = 0.2;
  Vec2 origin;
  int columns = 0; ///< sites per row; 0 picks a roughly square patch
};

/// Disks in contact along the lattice bonds, filled row by row from `origin`
/// (the first disk center) until `count` disks are placed.
Configuration generate_lattice(const LatticeSpec &spec);

/// Closed-form packing fraction of an infinite lattice.
double lattice_packing_fraction(LatticeKind kind);

/// Rectangular period of the lattice (x, y extents).
Vec2 lattice_period(LatticeKind kind, double radius);

/// True when the unit contact normals positively span the plane, i.e. no
/// direction v != 0 has n . v <= 0 for every normal n.
bool normals_jammed(std::span<const Vec2> normals);

/// Local jamming of disk i: contacts are the disks and walls within eps.
bool is_locally_jammed(const Configuration &q, std::span<const Segment> walls, int i, double eps);

struct JammingReport {
  std::vector<std::uint8_t> jammed; ///< per disk; exited disks are 0
  double fraction = 0.0;            ///< over active disks
};

JammingReport jamming_report(const Configuration &q, std::span<const Segment> walls, double eps);

/// Max over saturated cells (rho >= 1 - tol, interior) of -div u, central
/// differences with one-sided stencils at walls and grid edges; 0 if none.
double macro_feasibility_check(const Grid &grid, const VelocityField &u, std::span<const double> rho,
                               double tol = 1e-9);

/// The same check on a realized step: on cells saturated before and after,
/// the effective divergence is (rho^n - rho^{n+1}) / tau and must be >= 0.
double realized_feasibility_check(const Grid &grid, std::span<const double> before, std::span<const double> after,
                                  double tau, double tol = 1e-9);

struct EvacuationSample {
  long step = 0;
  double time = 0.0;
  double remaining = 0.0;     ///< mass or agent count in the room
  double exited = 0.0;        ///< cumulative
  double desired_speed = 0.0; ///< max desired speed over what remains
};

struct JamParams {
  long window = 200;       ///< steps
  double rel_change = 1e-6;
};

struct EvacuationCurve {
  std::vector<EvacuationSample> samples;
  bool jammed = false;
};

/// Jam verdict: something remains, the remaining amount moved by less than
/// rel_change (relative) over the trailing window, and the desired speed is
/// still positive. Throws InvalidArgument on an empty run or unordered frames.
EvacuationCurve evacuation_metrics(std::span<const EvacuationSample> frames, const JamParams &params = {});

/// Same verdict on the trailing window of a run in progress.
bool jam_detected(std::span<const EvacuationSample> frames, const JamParams &params = {});

} // namespace crowd
