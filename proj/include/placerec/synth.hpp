#pragma once

// Synthetic street worlds and camera trajectories for tests and experiments.
//
// The street runs along the world x axis with a ground plane at z = 0. Boxes
// (buildings) line both sides, ellipsoid canopies (trees) stand between the
// street and the buildings. A camera drives along a waypoint polyline and
// casts random rays inside its forward frustum; every hit becomes a keyframe
// point with an intensity derived from the element it hit.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "placerec/config.hpp"
#include "placerec/keyframe_io.hpp"

namespace placerec {

enum class ElementClass : std::uint8_t { kGround, kBuilding, kVegetation };

struct WorldElement {
  ElementClass cls = ElementClass::kGround;
  /// Box corners for buildings; center and radii for canopies. Unused for ground.
  Eigen::Vector3d min = Eigen::Vector3d::Zero();
  Eigen::Vector3d max = Eigen::Vector3d::Zero();
  double base_intensity = 0.0;
};

struct LayoutSpec {
  double margin = 60.0;  // street extends this far beyond the trajectory
  double setback_min = 7.0;
  double setback_max = 12.0;
  double building_length_min = 6.0;
  double building_length_max = 20.0;
  double building_gap_min = 0.0;
  double building_gap_max = 8.0;
  double building_depth_min = 8.0;
  double building_depth_max = 15.0;
  double building_height_min = 4.0;
  double building_height_max = 25.0;
  double building_intensity_min = 40.0;
  double building_intensity_max = 220.0;
  double tree_spacing_min = 8.0;
  double tree_spacing_max = 20.0;
  double tree_offset_min = 3.5;
  double tree_offset_max = 5.5;
  double canopy_radius_min = 1.5;
  double canopy_radius_max = 3.5;
  double canopy_height_min = 3.0;
  double canopy_height_max = 7.0;
  double tree_intensity_min = 20.0;
  double tree_intensity_max = 120.0;
  double ground_intensity = 90.0;
  /// Static intensity texture: per-cell offsets in [-amplitude, amplitude].
  double texture_amplitude = 40.0;
  double texture_cell = 2.0;
};

struct TrajectorySpec {
  std::vector<Eigen::Vector2d> waypoints{{-90.0, 0.0}, {200.0, 0.0}, {0.0, 0.0}};
  double speed = 1.0;  // meters per keyframe
  /// Sideways offset (to the camera's right) per leg; missing legs use 0.
  std::vector<double> leg_offsets;
  double camera_height = 1.7;
  /// Gaussian noise on the estimated pose position (ground truth stays exact).
  double pose_jitter = 0.0;
};

struct SensorSpec {
  int rays_per_keyframe = 500;
  double horizontal_fov_deg = 90.0;
  double vertical_fov_deg = 40.0;
  double max_range = 45.0;
  double intensity_noise = 3.0;
};

struct PerturbationSpec {
  /// Legs whose keyframes are perturbed; empty means none.
  std::vector<int> legs;
  /// Fraction of vegetation points moved to a random spot in an enlarged canopy.
  double vegetation_resample = 0.0;
  double canopy_scale = 1.3;
  /// i' = gain * i + offset + element_jitter_e + point noise, rounded and clamped.
  double intensity_gain = 1.0;
  double intensity_offset = 0.0;
  double element_jitter = 0.0;  // std of the per-element offset
  double point_noise = 0.0;     // std of the per-point offset

  bool is_identity() const;
};

struct WorldSpec {
  std::uint64_t seed = 1;
  LayoutSpec layout;
  TrajectorySpec trajectory;
  SensorSpec sensor;
  PerturbationSpec perturbation;
};

/// Reads a spec from "key = value" lines; unknown keys are rejected.
WorldSpec parse_world_spec(const KeyValues& kv);
WorldSpec load_world_spec(const std::filesystem::path& path);

struct PointLabel {
  std::uint32_t element = 0;
  ElementClass cls = ElementClass::kGround;
  bool operator==(const PointLabel&) const = default;
};

struct SynthSequence {
  std::vector<WorldElement> elements;
  std::vector<Keyframe> keyframes;
  /// labels[k][i] describes keyframes[k].points[i].
  std::vector<std::vector<PointLabel>> labels;
  /// Trajectory leg (polyline segment) of every keyframe.
  std::vector<int> legs;
};

/// Deterministic for a given spec. Throws ConfigError for an invalid spec and
/// DataError when the layout ends up empty.
SynthSequence generate(const WorldSpec& spec);

/// Applies `perturbation` to the keyframes of its legs. Non-vegetation points
/// keep their positions bit-exactly; `seed` drives all random draws.
SynthSequence perturb(const SynthSequence& sequence, const PerturbationSpec& perturbation, std::uint64_t seed);

/// First and last keyframe id of every leg, in leg order.
std::vector<std::pair<std::int64_t, std::int64_t>> leg_id_ranges(const SynthSequence& sequence);

}  // namespace placerec
