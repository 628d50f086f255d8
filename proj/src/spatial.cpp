#include "crowd/spatial.hpp"

#include "crowd/error.hpp"

namespace crowd {

SpatialBins::SpatialBins(std::span<const Vec2> points, std::span<const std::uint8_t> skip, double cell)
    : cell_(cell) {
  if (!(cell > 0.0)) throw InvalidArgument("SpatialBins: cell size must be positive");
  auto used = [&](std::size_t i) { return skip.empty() || skip[i] == 0; };
  bool any = false;
  Vec2 hi;
  std::size_t n = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!used(i)) continue;
    ++n;
    if (!any) {
      lo_ = hi = points[i];
      any = true;
    }
    lo_.x = std::min(lo_.x, points[i].x);
    lo_.y = std::min(lo_.y, points[i].y);
    hi.x = std::max(hi.x, points[i].x);
    hi.y = std::max(hi.y, points[i].y);
  }
  if (!any) return;
  // Keep the bin count proportional to the point count for sparse clouds.
  for (;;) {
    nx_ = static_cast<int>(std::floor((hi.x - lo_.x) / cell_)) + 1;
    ny_ = static_cast<int>(std::floor((hi.y - lo_.y) / cell_)) + 1;
    if (static_cast<double>(nx_) * ny_ <= 4.0 * static_cast<double>(n) + 1024.0) break;
    cell_ *= 2.0;
  }
  const std::size_t nbins = static_cast<std::size_t>(nx_) * ny_;
  start_.assign(nbins + 1, 0);
  std::vector<std::size_t> bin_of(points.size(), 0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!used(i)) continue;
    const int bx = std::min(nx_ - 1, bin(points[i].x - lo_.x));
    const int by = std::min(ny_ - 1, bin(points[i].y - lo_.y));
    bin_of[i] = static_cast<std::size_t>(by) * nx_ + bx;
    ++start_[bin_of[i] + 1];
  }
  for (std::size_t b = 0; b < nbins; ++b) start_[b + 1] += start_[b];
  items_.assign(n, 0);
  std::vector<int> fill(start_.begin(), start_.end() - 1);
  for (std::size_t i = 0; i < points.size(); ++i)
    if (used(i)) items_[fill[bin_of[i]]++] = static_cast<int>(i);
}

} // namespace crowd
