#include "placerec/descriptors.hpp"

#include <numeric>

#include "placerec/error.hpp"

namespace placerec {

std::uint64_t DelightHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

int delight_region(const Eigen::Vector3d& p, const DelightParams& params) {
  const double range = p.norm();
  if (range > params.outer_radius) return -1;
  const int shell = range < params.inner_radius ? 0 : 1;

  // Half-open quadrants [0, 90), [90, 180), ... of atan2(y, x) mapped to [0, 360).
  const double x = p.x();
  const double y = p.y();
  int quadrant = 0;
  if (x > 0.0 && y >= 0.0) {
    quadrant = 0;
  } else if (x <= 0.0 && y > 0.0) {
    quadrant = 1;
  } else if (x < 0.0 && y <= 0.0) {
    quadrant = 2;
  } else if (x >= 0.0 && y < 0.0) {
    quadrant = 3;
  }
  const int hemisphere = p.z() >= 0.0 ? 0 : 1;
  return shell * 8 + quadrant * 2 + hemisphere;
}

DelightHistogram delight_histogram(const PointCloud& aligned, const DelightParams& params) {
  if (!(params.inner_radius > 0.0) || !(params.inner_radius < params.outer_radius)) {
    throw ConfigError("DELIGHT radii must satisfy 0 < inner < outer");
  }
  DelightHistogram h;
  for (const auto& p : aligned) {
    const int region = delight_region(p.position, params);
    if (region < 0) continue;
    const std::size_t slot = static_cast<std::size_t>(region) * kIntensityLevels + p.intensity;
    ++h.counts[slot];
    h.occupancy |= std::uint64_t{1} << (slot / kDelightChunk);
  }
  return h;
}

DelightSignature describe_delight(const AlignedCloudSet& aligned, const DelightParams& params) {
  DelightSignature sig;
  for (std::size_t k = 0; k < kPcaVariants; ++k) sig.variants[k] = delight_histogram(aligned.variants[k], params);
  return sig;
}

}  // namespace placerec
