#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "placerec/alignment.hpp"
#include "placerec/error.hpp"
#include "placerec/evaluation.hpp"
#include "placerec/scan_imitation.hpp"
#include "placerec/synth.hpp"

namespace placerec {
namespace {

WorldSpec small_world(std::vector<Eigen::Vector2d> waypoints, int rays = 150) {
  WorldSpec spec;
  spec.seed = 5;
  spec.layout.margin = 50.0;
  spec.trajectory.waypoints = std::move(waypoints);
  spec.sensor.rays_per_keyframe = rays;
  return spec;
}

WorldSpec out_and_back() { return small_world({{0.0, 0.0}, {60.0, 0.0}, {0.0, 0.0}}); }

std::string serialize(const std::vector<Keyframe>& keyframes) {
  std::ostringstream out;
  write_sequence(out, keyframes);
  return out.str();
}

KeyValues parse_kv(const std::string& text) {
  std::istringstream in(text);
  return KeyValues::parse(in, "spec");
}

GroundTruthRelation self_ground_truth(const SynthSequence& seq, std::int64_t window) {
  std::vector<std::int64_t> ids;
  std::vector<std::optional<Eigen::Vector3d>> positions;
  for (const auto& kf : seq.keyframes) {
    ids.push_back(kf.id);
    positions.push_back(kf.gt_position);
  }
  return build_ground_truth(ids, positions, ids, positions, 10.0, CandidateMask::exclusion_window(ids, ids, window));
}

TEST(Synth, SameSeedIsByteIdentical) {
  const WorldSpec spec = out_and_back();
  EXPECT_EQ(serialize(generate(spec).keyframes), serialize(generate(spec).keyframes));
  WorldSpec other = spec;
  other.seed = 6;
  EXPECT_NE(serialize(generate(spec).keyframes), serialize(generate(other).keyframes));
}

TEST(Synth, LabelsCoverEveryPoint) {
  const SynthSequence seq = generate(out_and_back());
  ASSERT_EQ(seq.labels.size(), seq.keyframes.size());
  ASSERT_EQ(seq.legs.size(), seq.keyframes.size());
  EXPECT_EQ(seq.elements.front().cls, ElementClass::kGround);
  for (std::size_t k = 0; k < seq.keyframes.size(); ++k) {
    ASSERT_EQ(seq.labels[k].size(), seq.keyframes[k].points.size());
    for (const auto& label : seq.labels[k]) {
      ASSERT_LT(label.element, seq.elements.size());
      EXPECT_EQ(label.cls, seq.elements[label.element].cls);
    }
  }
}

TEST(Synth, PointsLieInsideTheFrustum) {
  const WorldSpec spec = out_and_back();
  const SynthSequence seq = generate(spec);
  const double half_h = spec.sensor.horizontal_fov_deg * std::numbers::pi / 360.0;
  for (const auto& kf : seq.keyframes) {
    for (const auto& p : kf.points) {
      EXPECT_LE(p.position.norm(), spec.sensor.max_range + 1e-9);
      EXPECT_GT(p.position.z(), 0.0);
      EXPECT_LE(std::abs(std::atan2(p.position.x(), p.position.z())), half_h + 1e-9);
    }
  }
}

TEST(Synth, PosesFollowTheWaypoints) {
  const SynthSequence seq = generate(out_and_back());
  const auto legs = leg_id_ranges(seq);
  ASSERT_EQ(legs.size(), 2u);
  EXPECT_EQ(legs[0].first, 0);
  EXPECT_EQ(legs[1].second, static_cast<std::int64_t>(seq.keyframes.size()) - 1);
  EXPECT_EQ(legs[1].first, legs[0].second + 1);
  for (const auto& kf : seq.keyframes) {
    ASSERT_TRUE(kf.gt_position.has_value());
    EXPECT_NEAR(kf.gt_position->z(), 1.7, 1e-12);
    // Camera z (forward) is horizontal and camera y points down.
    const Eigen::Matrix3d r = kf.orientation.toRotationMatrix();
    EXPECT_NEAR(r.col(2).z(), 0.0, 1e-9);
    EXPECT_NEAR(r.col(1).z(), -1.0, 1e-9);
  }
  // Outbound keyframes face +x, the return leg faces -x.
  EXPECT_GT(seq.keyframes[legs[0].first].orientation.toRotationMatrix().col(2).x(), 0.99);
  EXPECT_LT(seq.keyframes[legs[1].first].orientation.toRotationMatrix().col(2).x(), -0.99);
}

TEST(Synth, OutAndBackRevisitsPairUp) {
  const SynthSequence seq = generate(out_and_back());
  const auto legs = leg_id_ranges(seq);
  const GroundTruthRelation gt = self_ground_truth(seq, 20);
  // Every return keyframe far enough from the turn has an outbound partner.
  std::size_t checked = 0;
  for (std::int64_t id = legs[1].first + 10; id <= legs[1].second; ++id) {
    const auto q = static_cast<std::size_t>(id);
    EXPECT_TRUE(gt.matchable(q)) << "keyframe " << id;
    for (std::size_t r = 0; r < gt.reference_ids.size(); ++r) {
      if (!gt.at(q, r)) continue;
      EXPECT_LT((*seq.keyframes[q].gt_position - *seq.keyframes[r].gt_position).norm(), 10.0);
      EXPECT_GE(std::abs(static_cast<std::int64_t>(q) - static_cast<std::int64_t>(r)), 20);
    }
    ++checked;
  }
  EXPECT_GT(checked, 40u);
}

TEST(Synth, StraightStreetHasNoRevisits) {
  const SynthSequence seq = generate(small_world({{0.0, 0.0}, {80.0, 0.0}}));
  EXPECT_EQ(self_ground_truth(seq, 20).matchable_queries(), 0u);
}

TEST(Synth, LegOffsetsShiftTheReturnLaneRight) {
  WorldSpec spec = out_and_back();
  spec.trajectory.leg_offsets = {0.0, 2.0};
  const SynthSequence seq = generate(spec);
  const auto legs = leg_id_ranges(seq);
  // Facing -x, the camera's right is +y.
  for (std::int64_t id = legs[1].first; id <= legs[1].second; ++id) {
    EXPECT_NEAR(seq.keyframes[static_cast<std::size_t>(id)].gt_position->y(), 2.0, 1e-9);
  }
  EXPECT_NEAR(seq.keyframes[0].gt_position->y(), 0.0, 1e-9);
}

TEST(Synth, PoseJitterLeavesGroundTruthExact) {
  WorldSpec spec = out_and_back();
  const SynthSequence clean = generate(spec);
  spec.trajectory.pose_jitter = 0.5;
  const SynthSequence jittered = generate(spec);
  ASSERT_EQ(clean.keyframes.size(), jittered.keyframes.size());
  double moved = 0.0;
  for (std::size_t k = 0; k < clean.keyframes.size(); ++k) {
    EXPECT_EQ(*clean.keyframes[k].gt_position, *jittered.keyframes[k].gt_position);
    EXPECT_EQ(clean.keyframes[k].position, *clean.keyframes[k].gt_position);
    moved = std::max(moved, (jittered.keyframes[k].position - clean.keyframes[k].position).norm());
  }
  EXPECT_GT(moved, 0.1);
}

TEST(Synth, EmptyLayoutIsADataError) {
  // A street along y has no x extent, so no buildings or trees fit.
  WorldSpec spec = small_world({{0.0, 0.0}, {0.0, 30.0}});
  spec.layout.margin = 0.0;
  EXPECT_THROW(generate(spec), DataError);
}

TEST(Synth, InvalidSpecsAreConfigErrors) {
  WorldSpec spec = out_and_back();
  spec.trajectory.speed = 0.0;
  EXPECT_THROW(generate(spec), ConfigError);
  spec = out_and_back();
  spec.trajectory.waypoints = {{0.0, 0.0}, {0.0, 0.0}};
  EXPECT_THROW(generate(spec), ConfigError);
  spec = out_and_back();
  spec.layout.setback_min = 20.0;
  spec.layout.setback_max = 10.0;
  EXPECT_THROW(generate(spec), ConfigError);
}

TEST(Synth, ParsesSpecsAndRejectsUnknownKeys) {
  const WorldSpec spec = parse_world_spec(parse_kv(
      "seed = 9\ntrajectory.waypoints = 0,0, 50,0\nsensor.rays = 42\nperturb.legs = 1\n"
      "perturb.vegetation_resample = 0.25\nlayout.margin = 30\n"));
  EXPECT_EQ(spec.seed, 9u);
  ASSERT_EQ(spec.trajectory.waypoints.size(), 2u);
  EXPECT_EQ(spec.trajectory.waypoints[1], Eigen::Vector2d(50.0, 0.0));
  EXPECT_EQ(spec.sensor.rays_per_keyframe, 42);
  EXPECT_EQ(spec.perturbation.legs, std::vector<int>{1});
  EXPECT_EQ(spec.perturbation.vegetation_resample, 0.25);
  EXPECT_EQ(spec.layout.margin, 30.0);

  EXPECT_THROW(parse_world_spec(parse_kv("sensor.rayz = 5\n")), ConfigError);
  EXPECT_THROW(parse_world_spec(parse_kv("trajectory.waypoints = 0,0,5\n")), ConfigError);
  EXPECT_THROW(parse_world_spec(parse_kv("perturb.legs = 1.5\n")), ConfigError);
  EXPECT_THROW(parse_world_spec(parse_kv("perturb.vegetation_resample = 1.5\n")), ConfigError);
}

TEST(Perturb, ZeroPerturbationIsIdentity) {
  const SynthSequence seq = generate(out_and_back());
  PerturbationSpec none;
  none.legs = {0, 1};
  EXPECT_TRUE(none.is_identity());
  EXPECT_EQ(serialize(perturb(seq, none, 3).keyframes), serialize(seq.keyframes));
  PerturbationSpec no_legs;
  no_legs.intensity_gain = 0.5;
  EXPECT_EQ(serialize(perturb(seq, no_legs, 3).keyframes), serialize(seq.keyframes));
}

TEST(Perturb, IntensityOnlyKeepsGeometry) {
  const SynthSequence seq = generate(out_and_back());
  PerturbationSpec p;
  p.legs = {1};
  p.intensity_gain = 0.8;
  p.intensity_offset = 15.0;
  p.element_jitter = 30.0;
  p.point_noise = 5.0;
  const SynthSequence out = perturb(seq, p, 11);
  const auto legs = leg_id_ranges(seq);
  std::size_t changed = 0, total = 0;
  for (std::size_t k = 0; k < seq.keyframes.size(); ++k) {
    const auto& a = seq.keyframes[k].points;
    const auto& b = out.keyframes[k].points;
    ASSERT_EQ(a.size(), b.size());
    const bool perturbed = static_cast<std::int64_t>(k) >= legs[1].first;
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_EQ(a[i].position, b[i].position);
      if (!perturbed) ASSERT_EQ(a[i].intensity, b[i].intensity);
      if (perturbed) {
        ++total;
        changed += a[i].intensity != b[i].intensity;
      }
    }
  }
  EXPECT_GT(changed, total / 2);

  // Structure-only signatures cannot tell the runs apart.
  const ScanParams params;
  const auto clean_scans = imitate_sequence(seq.keyframes, FilterKind::kVoxel, params);
  const auto perturbed_scans = imitate_sequence(out.keyframes, FilterKind::kVoxel, params);
  const ScanContextParams sc;
  for (std::size_t k = static_cast<std::size_t>(legs[1].first) + 20; k < clean_scans.size(); k += 7) {
    const auto a = describe_scan_context(pca_align(clean_scans[k].points), sc);
    const auto b = describe_scan_context(pca_align(perturbed_scans[k].points), sc);
    EXPECT_EQ(a.structure, b.structure) << "keyframe " << k;
  }
}

TEST(Perturb, VegetationResampleMovesTheRequestedFraction) {
  WorldSpec spec = out_and_back();
  spec.sensor.rays_per_keyframe = 400;
  const SynthSequence seq = generate(spec);
  PerturbationSpec p;
  p.legs = {1};
  p.vegetation_resample = 0.3;
  const SynthSequence out = perturb(seq, p, 17);
  std::size_t vegetation = 0, moved = 0;
  for (std::size_t k = 0; k < seq.keyframes.size(); ++k) {
    const bool perturbed = seq.legs[k] == 1;
    for (std::size_t i = 0; i < seq.keyframes[k].points.size(); ++i) {
      const bool same = seq.keyframes[k].points[i].position == out.keyframes[k].points[i].position;
      if (seq.labels[k][i].cls != ElementClass::kVegetation || !perturbed) {
        ASSERT_TRUE(same);
        ASSERT_EQ(seq.keyframes[k].points[i].intensity, out.keyframes[k].points[i].intensity);
        continue;
      }
      ++vegetation;
      moved += !same;
    }
  }
  ASSERT_GT(vegetation, 1000u);
  // Binomial(n, 0.3): five standard deviations.
  const double n = static_cast<double>(vegetation);
  EXPECT_NEAR(static_cast<double>(moved) / n, 0.3, 5.0 * std::sqrt(0.21 / n));
}

TEST(Perturb, ResampledPointsStayNearTheirCanopy) {
  const SynthSequence seq = generate(out_and_back());
  PerturbationSpec p;
  p.legs = {0, 1};
  p.vegetation_resample = 1.0;
  const SynthSequence out = perturb(seq, p, 23);
  for (std::size_t k = 0; k < seq.keyframes.size(); ++k) {
    const RigidTransform pose =
        RigidTransform::from_quaternion(out.keyframes[k].orientation, *out.keyframes[k].gt_position);
    for (std::size_t i = 0; i < seq.keyframes[k].points.size(); ++i) {
      const PointLabel& label = seq.labels[k][i];
      if (label.cls != ElementClass::kVegetation) continue;
      const WorldElement& canopy = seq.elements[label.element];
      const Eigen::Vector3d world = transform_point(pose, out.keyframes[k].points[i].position);
      const Eigen::Vector3d u = (world - canopy.min).cwiseQuotient(p.canopy_scale * canopy.max);
      EXPECT_LE(u.norm(), 1.0 + 1e-9);
    }
  }
}

TEST(Perturb, SameSeedSameResult) {
  const SynthSequence seq = generate(out_and_back());
  PerturbationSpec p;
  p.legs = {1};
  p.vegetation_resample = 0.3;
  p.point_noise = 4.0;
  EXPECT_EQ(serialize(perturb(seq, p, 5).keyframes), serialize(perturb(seq, p, 5).keyframes));
  EXPECT_NE(serialize(perturb(seq, p, 5).keyframes), serialize(perturb(seq, p, 6).keyframes));
}

}  // namespace
}  // namespace placerec
