#pragma once

// Global place signatures computed from a PCA-aligned filtered scan.

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "placerec/alignment.hpp"
#include "placerec/geometry.hpp"

namespace placerec {

// ---------------------------------------------------------------------------
// DELIGHT: grayscale histograms over a 16-region spherical partition.

struct DelightParams {
  double inner_radius = 10.0;
  double outer_radius = 45.0;
};

inline constexpr std::size_t kDelightRegions = 16;
inline constexpr std::size_t kIntensityLevels = 256;
inline constexpr std::size_t kDelightLength = kDelightRegions * kIntensityLevels;
/// Occupancy bitmap granularity: one bit per 64 consecutive histogram entries.
inline constexpr std::size_t kDelightChunk = 64;

struct DelightHistogram {
  /// Region-major: counts[region * 256 + intensity].
  std::vector<std::uint32_t> counts = std::vector<std::uint32_t>(kDelightLength, 0);
  /// Bit c set iff counts[64c, 64c + 64) has a nonzero entry.
  std::uint64_t occupancy = 0;

  std::uint64_t total() const;
  bool operator==(const DelightHistogram&) const = default;
};

struct DelightSignature {
  std::array<DelightHistogram, kPcaVariants> variants;
  bool operator==(const DelightSignature&) const = default;
};

/// Region of an aligned point: 2 radial shells ([0, inner), [inner, outer]) x
/// 4 azimuth quadrants (counter-clockwise from +x) x 2 hemispheres (z >= 0 is
/// upper). Index = shell * 8 + quadrant * 2 + (upper ? 0 : 1); -1 beyond outer.
int delight_region(const Eigen::Vector3d& p, const DelightParams& params);

/// Histogram of one aligned cloud. An empty cloud gives all zeros.
DelightHistogram delight_histogram(const PointCloud& aligned, const DelightParams& params);

DelightSignature describe_delight(const AlignedCloudSet& aligned, const DelightParams& params);

// ---------------------------------------------------------------------------
// M2DP: multi-plane projection counts compressed by SVD, plus a binarized
// intensity grid.

struct M2dpParams {
  int rings = 8;             // l
  int sectors = 16;          // t
  int azimuth_planes = 4;    // p
  int elevation_planes = 16; // q

  int plane_count() const { return azimuth_planes * elevation_planes; }
  int bin_count() const { return rings * sectors; }
  int structure_length() const { return plane_count() + bin_count(); }
};

struct M2dpVariant {
  /// First left singular vector (p*q) followed by first right singular vector (l*t).
  std::vector<double> structure;
  /// Binarized mean intensity on the horizontal ring x sector grid (l*t, values 0/1).
  std::vector<double> intensity;
  bool operator==(const M2dpVariant&) const = default;
};

struct M2dpSignature {
  std::array<M2dpVariant, kPcaVariants> variants;
  bool operator==(const M2dpSignature&) const = default;
};

/// Unit normals of the projection planes; row index = azimuth_index * q + elevation_index.
/// Azimuths are -pi/2 + i*pi/p, elevations j*(pi/2)/q.
std::vector<Eigen::Vector3d> m2dp_plane_normals(const M2dpParams& params);

/// In-plane x axis of a projection plane; the in-plane y axis is normal x that.
Eigen::Vector3d m2dp_plane_x_axis(const Eigen::Vector3d& normal);

/// Largest distance of an aligned point from the origin.
double m2dp_max_radius(const PointCloud& aligned);

/// Radial bin for a planar radius: circles at k^2 * max_radius / l^2.
int m2dp_ring(double rho, double max_radius, int rings);
/// Angular bin for an angle in [-pi, pi].
int m2dp_sector(double theta, int sectors);
/// Same as m2dp_sector(atan2(y, x), sectors), using a polynomial arctangent
/// away from sector boundaries and std::atan2 near them.
int m2dp_sector_of(double y, double x, int sectors);
/// Polynomial arctangent, |error| below 1e-9 rad.
double approx_atan2(double y, double x);

/// Point-count matrix A: one row per projection plane, one column per
/// (ring * sectors + sector) bin.
Eigen::MatrixXd m2dp_projection_matrix(const PointCloud& aligned, const M2dpParams& params, double max_radius);

/// Throws DegenerateError for an empty cloud (all-zero A).
M2dpVariant describe_m2dp_variant(const PointCloud& aligned, const M2dpParams& params);
M2dpSignature describe_m2dp(const AlignedCloudSet& aligned, const M2dpParams& params);

/// Flips `v` so its largest-magnitude entry (first one on ties) is positive.
void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v);

// ---------------------------------------------------------------------------
// Scan Context: ring x sector grid of height ranges, plus binarized intensity.

/// Origin of the Scan Context polar grid. Both use the PCA axes of variant 0.
enum class ScanContextCenter {
  /// The scan's own origin (the keyframe position), as in egocentric Scan Context.
  kSensor,
  /// The cloud centroid, like DELIGHT and M2DP.
  kCentroid,
};

struct ScanContextParams {
  int rings = 20;
  int sectors = 60;
  double max_radius = 45.0;
  ScanContextCenter center = ScanContextCenter::kSensor;
};

struct ScanContextSignature {
  int rings = 0;
  int sectors = 0;
  /// Row-major rings x sectors; max height - min height per bin, 0 when empty.
  std::vector<double> structure;
  /// Row-major rings x sectors; 1 iff the bin's mean intensity exceeds the cloud mean.
  std::vector<double> intensity;
  bool operator==(const ScanContextSignature&) const = default;
};

/// Describes the cloud in its own x-y plane, height along z. Empty clouds give
/// all-zero matrices.
ScanContextSignature describe_scan_context(const PointCloud& aligned_variant0, const ScanContextParams& params);

/// Variant 0 of `aligned`, moved to `params.center`, then described.
ScanContextSignature describe_scan_context(const AlignedCloudSet& aligned, const ScanContextParams& params);

/// Column k of the result is column (k - shift) mod sectors of `matrix`.
std::vector<double> circular_shift_columns(const std::vector<double>& matrix, int rows, int cols, int shift);

}  // namespace placerec
