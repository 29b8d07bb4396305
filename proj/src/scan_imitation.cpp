#include "placerec/scan_imitation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

#include "placerec/error.hpp"

namespace placerec {

namespace {

struct CellKey {
  std::int64_t a, b, c;
  bool operator==(const CellKey&) const = default;
};

struct CellKeyHash {
  std::size_t operator()(const CellKey& k) const noexcept {
    std::uint64_t h = static_cast<std::uint64_t>(k.a) * 0x9E3779B97F4A7C15ULL;
    h ^= static_cast<std::uint64_t>(k.b) + 0x632BE59BD9B4E019ULL + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.c) + 0x94D049BB133111EBULL + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

}  // namespace

std::string_view to_string(FilterKind kind) {
  return kind == FilterKind::kPolar ? "polar" : "voxel";
}

std::optional<FilterKind> parse_filter_kind(std::string_view name) {
  if (name == "polar") return FilterKind::kPolar;
  if (name == "voxel") return FilterKind::kVoxel;
  return std::nullopt;
}

LocalPointCache::LocalPointCache(double eviction_radius) : eviction_radius_(eviction_radius) {
  if (!(eviction_radius > 0.0)) throw ConfigError("cache eviction radius must be positive");
}

void LocalPointCache::update(const Keyframe& kf) {
  if (last_id_ && kf.id <= *last_id_) {
    throw DataError("keyframe " + std::to_string(kf.id) + " arrives after keyframe " +
                    std::to_string(*last_id_));
  }
  const RigidTransform pose = kf.pose();
  entries_.reserve(entries_.size() + kf.points.size());
  for (const auto& p : kf.points) {
    entries_.push_back({kf.id, {transform_point(pose, p.position), p.intensity}});
  }
  const Eigen::Vector3d origin = pose.translation;
  const double r2 = eviction_radius_ * eviction_radius_;
  std::erase_if(entries_, [&](const Entry& e) { return (e.point.position - origin).squaredNorm() > r2; });
  last_pose_ = pose;
  last_id_ = kf.id;
}

PointCloud imitate_scan(const LocalPointCache& cache, const RigidTransform& current_pose, double range) {
  const RigidTransform world_to_current = inverse(current_pose);
  const Eigen::Vector3d origin = current_pose.translation;
  const double r2 = range * range;
  PointCloud scan;
  for (const auto& e : cache.entries()) {
    if ((e.point.position - origin).squaredNorm() <= r2) {
      scan.push_back({transform_point(world_to_current, e.point.position), e.point.intensity});
    }
  }
  return scan;
}

PointCloud filter_polar(const PointCloud& points, double angular_res_deg) {
  if (!(angular_res_deg > 0.0)) throw ConfigError("polar resolution must be positive");
  const double cols = 360.0 / angular_res_deg;
  if (std::abs(cols - std::round(cols)) > 1e-9) throw ConfigError("polar resolution must divide 360 degrees");
  const auto azimuth_cols = static_cast<std::int64_t>(std::round(cols));
  const auto elevation_rows = static_cast<std::int64_t>(std::ceil(180.0 / angular_res_deg - 1e-9));
  constexpr double kRadToDeg = 180.0 / std::numbers::pi;

  // cell -> index of the closest point seen so far
  constexpr std::uint32_t kEmpty = 0xffffffffu;
  std::vector<std::uint32_t> best(static_cast<std::size_t>(azimuth_cols * elevation_rows), kEmpty);
  std::vector<double> range(points.size());
  std::vector<std::uint32_t> touched;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const Eigen::Vector3d& p = points[i].position;
    range[i] = p.norm();
    double azimuth = std::atan2(p.x(), p.z()) * kRadToDeg;
    if (azimuth < 0.0) azimuth += 360.0;
    const double elevation = std::atan2(-p.y(), std::hypot(p.x(), p.z())) * kRadToDeg;
    const auto col = std::clamp<std::int64_t>(static_cast<std::int64_t>(azimuth / angular_res_deg), 0,
                                              azimuth_cols - 1);
    const auto row = std::clamp<std::int64_t>(
        static_cast<std::int64_t>((elevation + 90.0) / angular_res_deg), 0, elevation_rows - 1);
    std::uint32_t& slot = best[static_cast<std::size_t>(row * azimuth_cols + col)];
    if (slot == kEmpty) {
      slot = static_cast<std::uint32_t>(i);
      touched.push_back(static_cast<std::uint32_t>(row * azimuth_cols + col));
    } else if (range[i] < range[slot]) {
      slot = static_cast<std::uint32_t>(i);
    }
  }

  std::vector<std::size_t> keep;
  keep.reserve(touched.size());
  for (const std::uint32_t cell : touched) keep.push_back(best[cell]);
  std::sort(keep.begin(), keep.end());

  PointCloud out;
  out.reserve(keep.size());
  for (const std::size_t i : keep) out.push_back(points[i]);
  return out;
}

PointCloud filter_voxel(const PointCloud& points, const Eigen::Vector3d& cell) {
  if (!(cell.minCoeff() > 0.0)) throw ConfigError("voxel cell dimensions must be positive");
  struct Accumulator {
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    std::uint64_t intensity_sum = 0;
    std::uint64_t count = 0;
  };
  std::unordered_map<CellKey, std::size_t, CellKeyHash> slot;
  slot.reserve(points.size());
  std::vector<Accumulator> voxels;
  for (const auto& p : points) {
    const CellKey key{static_cast<std::int64_t>(std::floor(p.position.x() / cell.x())),
                      static_cast<std::int64_t>(std::floor(p.position.y() / cell.y())),
                      static_cast<std::int64_t>(std::floor(p.position.z() / cell.z()))};
    auto [it, inserted] = slot.try_emplace(key, voxels.size());
    if (inserted) voxels.emplace_back();
    Accumulator& acc = voxels[it->second];
    acc.sum += p.position;
    acc.intensity_sum += p.intensity;
    acc.count += 1;
  }
  PointCloud out;
  out.reserve(voxels.size());
  for (const auto& acc : voxels) {
    const double n = static_cast<double>(acc.count);
    // round half up on the integer mean
    const auto intensity = static_cast<std::uint8_t>((2 * acc.intensity_sum + acc.count) / (2 * acc.count));
    out.push_back({acc.sum / n, intensity});
  }
  return out;
}

FilteredScan apply_filter(std::int64_t keyframe_id, const PointCloud& raw, FilterKind kind,
                          const ScanParams& params) {
  FilteredScan scan;
  scan.keyframe_id = keyframe_id;
  scan.filter_kind = kind;
  scan.points = kind == FilterKind::kPolar ? filter_polar(raw, params.polar_resolution_deg)
                                           : filter_voxel(raw, params.voxel_cell);
  return scan;
}

std::vector<FilteredScan> imitate_sequence(const std::vector<Keyframe>& keyframes, FilterKind kind,
                                           const ScanParams& params) {
  LocalPointCache cache(params.range);
  std::vector<FilteredScan> scans;
  scans.reserve(keyframes.size());
  for (const auto& kf : keyframes) {
    cache.update(kf);
    const PointCloud raw = imitate_scan(cache, kf.pose(), params.range);
    FilteredScan scan = apply_filter(kf.id, raw, kind, params);
    scan.gt_position = kf.gt_position;
    scans.push_back(std::move(scan));
  }
  return scans;
}

}  // namespace placerec
