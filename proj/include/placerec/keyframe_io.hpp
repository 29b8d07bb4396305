#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "placerec/geometry.hpp"

namespace placerec {

/// A visual-odometry keyframe: camera-to-world pose plus the 3D points it
/// triangulated, expressed in the camera frame.
struct Keyframe {
  std::int64_t id = 0;
  /// Camera-to-world rotation as written in the keyframe file.
  Eigen::Quaterniond orientation = Eigen::Quaterniond::Identity();
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  PointCloud points;
  /// Global ground-truth position; only evaluation reads it.
  std::optional<Eigen::Vector3d> gt_position;

  RigidTransform pose() const { return RigidTransform::from_quaternion(orientation, position); }
};

/// Quaternion norms must be within this distance of 1.
inline constexpr double kQuaternionNormTolerance = 1e-6;

/// Parses the keyframe text format:
///   KF <id> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <n_points> [<gt_x> <gt_y> <gt_z>]
///   <x> <y> <z> <intensity>      (n_points lines)
/// Throws DataError naming `source` and the offending line.
std::vector<Keyframe> read_sequence(std::istream& in, const std::string& source = "<stream>");
std::vector<Keyframe> load_sequence(const std::filesystem::path& path);

/// Canonical serialization; read_sequence accepts exactly this output.
void write_sequence(std::ostream& out, const std::vector<Keyframe>& keyframes);
void save_sequence(const std::filesystem::path& path, const std::vector<Keyframe>& keyframes);

/// "<x> <y> <z> <intensity>" line used by keyframe and scan files.
void write_point_line(std::ostream& out, const IntensityPoint& p);
/// Parses a point line; calls reader-style failure through the returned error text.
std::optional<IntensityPoint> parse_point_line(const std::string& line, std::string& error);

}  // namespace placerec
