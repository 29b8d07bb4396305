#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "placerec/descriptors.hpp"
#include "placerec/error.hpp"

namespace placerec {

ScanContextSignature describe_scan_context(const PointCloud& aligned_variant0, const ScanContextParams& params) {
  if (params.rings <= 0 || params.sectors <= 0 || !(params.max_radius > 0.0)) {
    throw ConfigError("Scan Context needs positive rings, sectors and radius");
  }
  const auto rings = static_cast<std::size_t>(params.rings);
  const auto sectors = static_cast<std::size_t>(params.sectors);
  const std::size_t cells = rings * sectors;
  const double ring_width = params.max_radius / params.rings;
  const double sector_width = 2.0 * std::numbers::pi / params.sectors;

  std::vector<double> lowest(cells, std::numeric_limits<double>::infinity());
  std::vector<double> highest(cells, -std::numeric_limits<double>::infinity());
  std::vector<std::uint64_t> intensity_sum(cells, 0);
  std::vector<std::uint64_t> count(cells, 0);
  std::uint64_t global_sum = 0;

  for (const auto& p : aligned_variant0) {
    global_sum += p.intensity;
    const double rho = std::hypot(p.position.x(), p.position.y());
    if (rho > params.max_radius) continue;
    double azimuth = std::atan2(p.position.y(), p.position.x());
    if (azimuth < 0.0) azimuth += 2.0 * std::numbers::pi;
    const auto ring = std::min(static_cast<std::size_t>(rho / ring_width), rings - 1);
    const auto sector = std::min(static_cast<std::size_t>(azimuth / sector_width), sectors - 1);
    const std::size_t cell = ring * sectors + sector;
    lowest[cell] = std::min(lowest[cell], p.position.z());
    highest[cell] = std::max(highest[cell], p.position.z());
    intensity_sum[cell] += p.intensity;
    count[cell] += 1;
  }

  ScanContextSignature sig;
  sig.rings = params.rings;
  sig.sectors = params.sectors;
  sig.structure.assign(cells, 0.0);
  sig.intensity.assign(cells, 0.0);
  const std::uint64_t n = aligned_variant0.size();
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0) continue;
    sig.structure[c] = highest[c] - lowest[c];
    if (intensity_sum[c] * n > global_sum * count[c]) sig.intensity[c] = 1.0;
  }
  return sig;
}

ScanContextSignature describe_scan_context(const AlignedCloudSet& aligned, const ScanContextParams& params) {
  if (params.center == ScanContextCenter::kCentroid) return describe_scan_context(aligned.variants[0], params);
  PointCloud cloud = aligned.variants[0];
  const Eigen::Vector3d origin_offset = aligned.frames[0] * aligned.centroid;
  for (auto& p : cloud) p.position += origin_offset;
  return describe_scan_context(cloud, params);
}

std::vector<double> circular_shift_columns(const std::vector<double>& matrix, int rows, int cols, int shift) {
  if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) != matrix.size()) {
    throw DataError("circular_shift_columns: dimension mismatch");
  }
  std::vector<double> out(matrix.size());
  const int k = ((shift % cols) + cols) % cols;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      out[static_cast<std::size_t>(r * cols + (c + k) % cols)] = matrix[static_cast<std::size_t>(r * cols + c)];
    }
  }
  return out;
}

}  // namespace placerec
