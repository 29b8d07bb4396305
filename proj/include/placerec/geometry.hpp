#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace placerec {

/// Proper rigid motion x -> R x + t. Keyframe poses are camera-to-world.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_quaternion(const Eigen::Quaterniond& q,
                                        const Eigen::Vector3d& t);

  /// True when R is orthonormal with det(R) = +1 within `tolerance`.
  bool is_valid(double tolerance = 1e-6) const;
};

Eigen::Vector3d transform_point(const RigidTransform& t, const Eigen::Vector3d& p);

/// a ∘ b, i.e. applies b first.
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

RigidTransform inverse(const RigidTransform& t);

/// 3D point with an 8-bit grayscale intensity.
struct IntensityPoint {
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  std::uint8_t intensity = 0;

  bool operator==(const IntensityPoint&) const = default;
};

using PointCloud = std::vector<IntensityPoint>;

/// Applies `t` to every position, keeping intensities.
PointCloud transform_cloud(const RigidTransform& t, const PointCloud& cloud);

}  // namespace placerec
