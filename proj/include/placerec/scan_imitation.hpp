#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "placerec/geometry.hpp"
#include "placerec/keyframe_io.hpp"

namespace placerec {

enum class FilterKind { kPolar, kVoxel };

std::string_view to_string(FilterKind kind);
std::optional<FilterKind> parse_filter_kind(std::string_view name);

/// Downsampled imitated LiDAR scan, in the frame of the keyframe it belongs to.
struct FilteredScan {
  std::int64_t keyframe_id = 0;
  PointCloud points;
  FilterKind filter_kind = FilterKind::kPolar;
  std::optional<Eigen::Vector3d> gt_position;
};

/// World-frame rolling buffer of points from recent keyframes.
///
/// After every update, all cached points lie within `eviction_radius` of the
/// latest keyframe origin.
class LocalPointCache {
 public:
  struct Entry {
    std::int64_t keyframe_id;
    IntensityPoint point;  // world frame
  };

  explicit LocalPointCache(double eviction_radius);

  /// Appends kf's points in world coordinates, then evicts everything farther
  /// than the eviction radius from kf's origin. Throws DataError when kf.id does
  /// not exceed every id seen so far.
  void update(const Keyframe& kf);

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  double eviction_radius() const { return eviction_radius_; }
  const std::optional<RigidTransform>& last_pose() const { return last_pose_; }
  const std::optional<std::int64_t>& last_id() const { return last_id_; }

 private:
  double eviction_radius_;
  std::vector<Entry> entries_;
  std::optional<RigidTransform> last_pose_;
  std::optional<std::int64_t> last_id_;
};

/// Cached points within `range` (inclusive) of `current_pose`'s origin,
/// expressed in that keyframe's frame. The cache must already contain the
/// current keyframe.
PointCloud imitate_scan(const LocalPointCache& cache, const RigidTransform& current_pose, double range);

/// Keeps the closest point of every (azimuth, elevation) cell of size
/// `angular_res_deg`. Azimuth is measured in the camera's horizontal x-z plane,
/// elevation against the vertical y axis. Survivors keep their input order;
/// equal ranges resolve to the earliest point.
PointCloud filter_polar(const PointCloud& points, double angular_res_deg);

/// One centroid per occupied voxel with the rounded mean intensity. Output is
/// ordered by each voxel's first occurrence.
PointCloud filter_voxel(const PointCloud& points, const Eigen::Vector3d& cell);

struct ScanParams {
  double range = 45.0;
  double polar_resolution_deg = 1.0;
  Eigen::Vector3d voxel_cell{1.5, 0.75, 1.5};
};

/// Runs the cache over the sequence and produces one filtered scan per
/// keyframe, in keyframe order.
std::vector<FilteredScan> imitate_sequence(const std::vector<Keyframe>& keyframes, FilterKind kind,
                                           const ScanParams& params);

FilteredScan apply_filter(std::int64_t keyframe_id, const PointCloud& raw, FilterKind kind,
                          const ScanParams& params);

}  // namespace placerec
