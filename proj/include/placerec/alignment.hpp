#pragma once

#include <array>

#include "placerec/geometry.hpp"

namespace placerec {

inline constexpr std::size_t kPcaVariants = 4;

/// A cloud expressed in the four sign resolutions of its PCA frame.
///
/// The principal axes are first given a canonical sign: the third central
/// moment along e3 and along e1 is made non-negative and e2 = e3 x e1. Variant k
/// then uses axes (s1 e1, s2 e2, s1 s2 e3) with (s1, s2) = (+,+), (+,-), (-,+),
/// (-,-). Variant 0 is therefore covariant under rigid motion whenever those
/// moments are not vanishing, which is what Scan Context relies on.
struct AlignedCloudSet {
  std::array<PointCloud, kPcaVariants> variants;
  /// Rows are the variant's axes; aligned = frame * (p - centroid).
  std::array<Eigen::Matrix3d, kPcaVariants> frames;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  /// Descending, non-negative.
  Eigen::Vector3d eigenvalues = Eigen::Vector3d::Zero();
};

/// Eigenvalue ratio lambda2 / lambda1 below which a cloud counts as rank < 2.
inline constexpr double kDegenerateEigenRatio = 1e-9;

/// PCA with uniform weights. Throws DegenerateError for fewer than 3 points
/// or collinear / coincident clouds.
AlignedCloudSet pca_align(const PointCloud& points);

/// (s1, s2) sign pair of variant k.
std::array<int, 2> variant_signs(std::size_t k);

}  // namespace placerec
