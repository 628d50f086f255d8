#pragma once

#include <filesystem>
#include <vector>

namespace crowd {

struct CompareFrame {
  long step = 0;
  double time = 0.0;
  double l1 = 0.0;           ///< sum |rho_a - rho_b| * cell area
  double micro_exited = 0.0; ///< fraction of the initial population
  double macro_exited = 0.0;
  bool shared = false; ///< both runs wrote a frame at this step
};

struct CompareReport {
  std::vector<CompareFrame> frames;
  double initial_mass = 0.0;       ///< of the second run, first frame
  double divergence_time = -1.0;   ///< first time l1 exceeds 10% of initial_mass, -1 if never
  bool macro_never_behind = true;  ///< macro_exited >= micro_exited at every shared frame
  double max_l1 = 0.0;
};

/// Compares two run directories frame by frame. Each argument is either a
/// model directory (holding metrics.csv, grid.json and density/) or a run root,
/// in which case micro/ is used for the first and macro/ for the second.
/// Frames are matched by step; a run without a frame at some step contributes
/// its latest earlier one. Throws when the grids differ.
CompareReport compare_runs(const std::filesystem::path &first, const std::filesystem::path &second);

/// comparison.csv (one line per frame) and summary.json.
void write_compare(const std::filesystem::path &dir, const CompareReport &report);

} // namespace crowd
