#pragma once

#include "crowd/vec2.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace crowd {

/// Uniform binning of points over their bounding box. Queries return every
/// point whose bin overlaps the query square, so callers filter by distance.
class SpatialBins {
public:
  SpatialBins() = default;
  /// Points with skip[i] != 0 are left out; `skip` may be empty.
  SpatialBins(std::span<const Vec2> points, std::span<const std::uint8_t> skip, double cell);

  template <class F> void for_each_candidate(Vec2 p, double radius, F &&f) const {
    if (items_.empty()) return;
    const int bx0 = std::max(0, bin(p.x - radius - lo_.x));
    const int by0 = std::max(0, bin(p.y - radius - lo_.y));
    const int bx1 = std::min(nx_ - 1, bin(p.x + radius - lo_.x));
    const int by1 = std::min(ny_ - 1, bin(p.y + radius - lo_.y));
    for (int by = by0; by <= by1; ++by)
      for (int bx = bx0; bx <= bx1; ++bx) {
        const std::size_t b = static_cast<std::size_t>(by) * nx_ + bx;
        for (int k = start_[b]; k < start_[b + 1]; ++k) f(items_[k]);
      }
  }

  double cell() const { return cell_; }

private:
  int bin(double offset) const {
    const double v = std::floor(offset / cell_);
    if (v < -1.0) return -1;
    if (v > 1e9) return 1000000000;
    return static_cast<int>(v);
  }

  Vec2 lo_;
  double cell_ = 1.0;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<int> start_;
  std::vector<int> items_;
};

} // namespace crowd
