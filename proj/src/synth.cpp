#include "placerec/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <utility>

#include "placerec/error.hpp"

namespace placerec {

bool PerturbationSpec::is_identity() const {
  return legs.empty() || (vegetation_resample == 0.0 && intensity_gain == 1.0 && intensity_offset == 0.0 &&
                          element_jitter == 0.0 && point_noise == 0.0);
}

// --- spec parsing -----------------------------------------------------------

namespace {

template <class T>
struct Field {
  const char* key;
  T* value;
};

void read_fields(const KeyValues& kv, std::initializer_list<Field<double>> fields) {
  for (const auto& f : fields) {
    if (auto v = kv.get_double(f.key)) *f.value = *v;
  }
}

void validate(const WorldSpec& spec) {
  const auto& l = spec.layout;
  const auto range_ok = [](double lo, double hi, const char* name, double floor) {
    if (!(lo >= floor) || !(hi >= lo)) throw ConfigError(std::string("invalid range for ") + name);
  };
  range_ok(l.setback_min, l.setback_max, "layout.setback", 0.5);
  range_ok(l.building_length_min, l.building_length_max, "layout.building_length", 0.1);
  range_ok(l.building_gap_min, l.building_gap_max, "layout.building_gap", 0.0);
  range_ok(l.building_depth_min, l.building_depth_max, "layout.building_depth", 0.1);
  range_ok(l.building_height_min, l.building_height_max, "layout.building_height", 0.1);
  range_ok(l.building_intensity_min, l.building_intensity_max, "layout.building_intensity", 0.0);
  range_ok(l.tree_spacing_min, l.tree_spacing_max, "layout.tree_spacing", 0.1);
  range_ok(l.tree_offset_min, l.tree_offset_max, "layout.tree_offset", 1.5);
  range_ok(l.canopy_radius_min, l.canopy_radius_max, "layout.canopy_radius", 0.1);
  range_ok(l.canopy_height_min, l.canopy_height_max, "layout.canopy_height", 0.0);
  range_ok(l.tree_intensity_min, l.tree_intensity_max, "layout.tree_intensity", 0.0);
  if (l.margin < 0.0 || l.texture_amplitude < 0.0 || !(l.texture_cell > 0.0)) {
    throw ConfigError("invalid layout margin or texture");
  }
  const auto& t = spec.trajectory;
  if (t.waypoints.size() < 2) throw ConfigError("trajectory needs at least two waypoints");
  if (!(t.speed > 0.0)) throw ConfigError("trajectory.speed must be positive");
  if (!(t.camera_height > 0.0) || t.pose_jitter < 0.0) throw ConfigError("invalid camera height or pose jitter");
  const auto& s = spec.sensor;
  if (s.rays_per_keyframe < 0) throw ConfigError("sensor.rays must not be negative");
  if (!(s.horizontal_fov_deg > 0.0 && s.horizontal_fov_deg < 180.0) ||
      !(s.vertical_fov_deg > 0.0 && s.vertical_fov_deg < 180.0)) {
    throw ConfigError("sensor fields of view must lie in (0, 180) degrees");
  }
  if (!(s.max_range > 0.0) || s.intensity_noise < 0.0) throw ConfigError("invalid sensor range or noise");
  const auto& p = spec.perturbation;
  if (p.vegetation_resample < 0.0 || p.vegetation_resample > 1.0) {
    throw ConfigError("perturb.vegetation_resample must lie in [0, 1]");
  }
  if (!(p.canopy_scale > 0.0) || p.element_jitter < 0.0 || p.point_noise < 0.0) {
    throw ConfigError("invalid perturbation parameters");
  }
}

}  // namespace

WorldSpec parse_world_spec(const KeyValues& kv) {
  WorldSpec spec;
  if (auto v = kv.get_int("seed")) spec.seed = static_cast<std::uint64_t>(*v);
  auto& l = spec.layout;
  read_fields(kv, {{"layout.margin", &l.margin},
                   {"layout.setback_min", &l.setback_min},
                   {"layout.setback_max", &l.setback_max},
                   {"layout.building_length_min", &l.building_length_min},
                   {"layout.building_length_max", &l.building_length_max},
                   {"layout.building_gap_min", &l.building_gap_min},
                   {"layout.building_gap_max", &l.building_gap_max},
                   {"layout.building_depth_min", &l.building_depth_min},
                   {"layout.building_depth_max", &l.building_depth_max},
                   {"layout.building_height_min", &l.building_height_min},
                   {"layout.building_height_max", &l.building_height_max},
                   {"layout.building_intensity_min", &l.building_intensity_min},
                   {"layout.building_intensity_max", &l.building_intensity_max},
                   {"layout.tree_spacing_min", &l.tree_spacing_min},
                   {"layout.tree_spacing_max", &l.tree_spacing_max},
                   {"layout.tree_offset_min", &l.tree_offset_min},
                   {"layout.tree_offset_max", &l.tree_offset_max},
                   {"layout.canopy_radius_min", &l.canopy_radius_min},
                   {"layout.canopy_radius_max", &l.canopy_radius_max},
                   {"layout.canopy_height_min", &l.canopy_height_min},
                   {"layout.canopy_height_max", &l.canopy_height_max},
                   {"layout.tree_intensity_min", &l.tree_intensity_min},
                   {"layout.tree_intensity_max", &l.tree_intensity_max},
                   {"layout.ground_intensity", &l.ground_intensity},
                   {"layout.texture_amplitude", &l.texture_amplitude},
                   {"layout.texture_cell", &l.texture_cell}});
  auto& t = spec.trajectory;
  if (auto v = kv.get_doubles("trajectory.waypoints")) {
    if (v->size() % 2 != 0) throw ConfigError("trajectory.waypoints needs x,y pairs");
    t.waypoints.clear();
    for (std::size_t i = 0; i < v->size(); i += 2) t.waypoints.emplace_back((*v)[i], (*v)[i + 1]);
  }
  if (auto v = kv.get_doubles("trajectory.leg_offsets")) t.leg_offsets = *v;
  read_fields(kv, {{"trajectory.speed", &t.speed},
                   {"trajectory.camera_height", &t.camera_height},
                   {"trajectory.pose_jitter", &t.pose_jitter}});
  auto& s = spec.sensor;
  if (auto v = kv.get_int("sensor.rays")) {
    if (*v < 0 || *v > 10'000'000) throw ConfigError("sensor.rays out of range");
    s.rays_per_keyframe = static_cast<int>(*v);
  }
  read_fields(kv, {{"sensor.hfov", &s.horizontal_fov_deg},
                   {"sensor.vfov", &s.vertical_fov_deg},
                   {"sensor.max_range", &s.max_range},
                   {"sensor.intensity_noise", &s.intensity_noise}});
  auto& p = spec.perturbation;
  if (auto v = kv.get_doubles("perturb.legs")) {
    p.legs.clear();
    for (const double leg : *v) {
      if (leg < 0.0 || leg != std::floor(leg)) throw ConfigError("perturb.legs must be leg indices");
      p.legs.push_back(static_cast<int>(leg));
    }
  }
  read_fields(kv, {{"perturb.vegetation_resample", &p.vegetation_resample},
                   {"perturb.canopy_scale", &p.canopy_scale},
                   {"perturb.intensity_gain", &p.intensity_gain},
                   {"perturb.intensity_offset", &p.intensity_offset},
                   {"perturb.element_jitter", &p.element_jitter},
                   {"perturb.point_noise", &p.point_noise}});
  kv.reject_unused();
  validate(spec);
  return spec;
}

WorldSpec load_world_spec(const std::filesystem::path& path) { return parse_world_spec(KeyValues::load(path)); }

// --- generation -------------------------------------------------------------

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

double gaussian(std::mt19937_64& rng, double sigma) {
  return sigma > 0.0 ? std::normal_distribution<double>(0.0, sigma)(rng) : 0.0;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Static per-cell texture in [-1, 1].
double texture(std::uint32_t element, const Eigen::Vector3d& p, double cell) {
  std::uint64_t h = splitmix64(element);
  for (int k = 0; k < 3; ++k) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p[k] / cell))));
  }
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

std::uint8_t to_intensity(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
}

std::vector<WorldElement> build_layout(const LayoutSpec& l, double x_begin, double x_end, std::mt19937_64& rng) {
  std::vector<WorldElement> elements;
  elements.push_back({ElementClass::kGround, {}, {}, l.ground_intensity});
  for (const double side : {1.0, -1.0}) {
    double x = x_begin;
    while (x < x_end) {
      const double length = uniform(rng, l.building_length_min, l.building_length_max);
      const double setback = uniform(rng, l.setback_min, l.setback_max);
      const double depth = uniform(rng, l.building_depth_min, l.building_depth_max);
      const double height = uniform(rng, l.building_height_min, l.building_height_max);
      WorldElement b;
      b.cls = ElementClass::kBuilding;
      const double y_near = side * setback;
      const double y_far = side * (setback + depth);
      b.min = {x, std::min(y_near, y_far), 0.0};
      b.max = {x + length, std::max(y_near, y_far), height};
      b.base_intensity = uniform(rng, l.building_intensity_min, l.building_intensity_max);
      elements.push_back(b);
      x += length + uniform(rng, l.building_gap_min, l.building_gap_max);
    }
  }
  for (const double side : {1.0, -1.0}) {
    double x = x_begin + uniform(rng, 0.0, l.tree_spacing_max);
    while (x < x_end) {
      const double offset = uniform(rng, l.tree_offset_min, l.tree_offset_max);
      const double radius = std::min(uniform(rng, l.canopy_radius_min, l.canopy_radius_max), offset - 1.0);
      const double vertical = uniform(rng, l.canopy_radius_min, l.canopy_radius_max);
      const double height = std::max(uniform(rng, l.canopy_height_min, l.canopy_height_max), vertical + 0.5);
      WorldElement t;
      t.cls = ElementClass::kVegetation;
      t.min = {x, side * offset, height};
      t.max = {radius, radius, vertical};
      t.base_intensity = uniform(rng, l.tree_intensity_min, l.tree_intensity_max);
      elements.push_back(t);
      x += uniform(rng, l.tree_spacing_min, l.tree_spacing_max);
    }
  }
  return elements;
}

/// Ray parameter of the first hit with `e`, or +inf.
double intersect(const WorldElement& e, const Eigen::Vector3d& o, const Eigen::Vector3d& d) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  constexpr double kEps = 1e-9;
  switch (e.cls) {
    case ElementClass::kGround:
      return d.z() < -kEps ? -o.z() / d.z() : kInf;
    case ElementClass::kBuilding: {
      double t_near = -kInf;
      double t_far = kInf;
      for (int k = 0; k < 3; ++k) {
        if (std::abs(d[k]) < kEps) {
          if (o[k] < e.min[k] || o[k] > e.max[k]) return kInf;
          continue;
        }
        double t0 = (e.min[k] - o[k]) / d[k];
        double t1 = (e.max[k] - o[k]) / d[k];
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
      }
      return (t_near <= t_far && t_near > kEps) ? t_near : kInf;
    }
    case ElementClass::kVegetation: {
      const Eigen::Vector3d oc = (o - e.min).cwiseQuotient(e.max);
      const Eigen::Vector3d dc = d.cwiseQuotient(e.max);
      const double a = dc.squaredNorm();
      const double b = oc.dot(dc);
      const double c = oc.squaredNorm() - 1.0;
      const double disc = b * b - a * c;
      if (disc < 0.0) return kInf;
      const double t = (-b - std::sqrt(disc)) / a;
      return t > kEps ? t : kInf;
    }
  }
  return kInf;
}

double element_x_min(const WorldElement& e) {
  return e.cls == ElementClass::kBuilding ? e.min.x() : e.min.x() - e.max.x();
}
double element_x_max(const WorldElement& e) {
  return e.cls == ElementClass::kBuilding ? e.max.x() : e.min.x() + e.max.x();
}

struct Station {
  Eigen::Vector2d position;
  double heading;
  int leg;
};

std::vector<Station> sample_trajectory(const TrajectorySpec& t) {
  std::vector<double> lengths;
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < t.waypoints.size(); ++i) {
    lengths.push_back((t.waypoints[i + 1] - t.waypoints[i]).norm());
    total += lengths.back();
  }
  if (!(total > 0.0)) throw ConfigError("trajectory has zero length");
  std::vector<Station> stations;
  std::size_t leg = 0;
  double leg_start = 0.0;
  for (std::int64_t k = 0;; ++k) {
    const double s = static_cast<double>(k) * t.speed;
    if (s > total + 1e-9) break;
    while (leg + 1 < lengths.size() && s >= leg_start + lengths[leg]) {
      leg_start += lengths[leg];
      ++leg;
    }
    if (lengths[leg] == 0.0) continue;
    const Eigen::Vector2d dir = (t.waypoints[leg + 1] - t.waypoints[leg]) / lengths[leg];
    Eigen::Vector2d p = t.waypoints[leg] + dir * std::min(s - leg_start, lengths[leg]);
    const double offset = leg < t.leg_offsets.size() ? t.leg_offsets[leg] : 0.0;
    p += offset * Eigen::Vector2d(dir.y(), -dir.x());
    stations.push_back({p, std::atan2(dir.y(), dir.x()), static_cast<int>(leg)});
  }
  return stations;
}

/// Camera-to-world rotation for a level camera looking along `heading`.
Eigen::Matrix3d camera_rotation(double heading) {
  const Eigen::Vector3d forward(std::cos(heading), std::sin(heading), 0.0);
  const Eigen::Vector3d right(std::sin(heading), -std::cos(heading), 0.0);
  const Eigen::Vector3d down(0.0, 0.0, -1.0);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return r;
}

}  // namespace

SynthSequence generate(const WorldSpec& spec) {
  validate(spec);
  const auto stations = sample_trajectory(spec.trajectory);
  double x_lo = std::numeric_limits<double>::infinity();
  double x_hi = -x_lo;
  for (const auto& w : spec.trajectory.waypoints) {
    x_lo = std::min(x_lo, w.x());
    x_hi = std::max(x_hi, w.x());
  }
  std::mt19937_64 layout_rng(spec.seed);
  std::mt19937_64 sensor_rng(splitmix64(spec.seed ^ 0x5e45011ULL));
  std::mt19937_64 jitter_rng(splitmix64(spec.seed ^ 0x7177e4ULL));

  SynthSequence out;
  out.elements = build_layout(spec.layout, x_lo - spec.layout.margin, x_hi + spec.layout.margin, layout_rng);
  if (out.elements.size() <= 1) throw DataError("synthetic layout has no buildings or trees");

  const auto& sensor = spec.sensor;
  const double half_h = sensor.horizontal_fov_deg * kDegToRad / 2.0;
  const double sin_half_v = std::sin(sensor.vertical_fov_deg * kDegToRad / 2.0);
  std::vector<std::uint32_t> nearby;
  for (std::size_t k = 0; k < stations.size(); ++k) {
    const Station& st = stations[k];
    const Eigen::Matrix3d rotation = camera_rotation(st.heading);
    const Eigen::Vector3d origin(st.position.x(), st.position.y(), spec.trajectory.camera_height);

    nearby.clear();
    for (std::uint32_t e = 0; e < out.elements.size(); ++e) {
      const auto& el = out.elements[e];
      if (el.cls == ElementClass::kGround ||
          (element_x_max(el) >= origin.x() - sensor.max_range && element_x_min(el) <= origin.x() + sensor.max_range)) {
        nearby.push_back(e);
      }
    }

    Keyframe kf;
    kf.id = static_cast<std::int64_t>(k);
    kf.orientation = Eigen::Quaterniond(rotation).normalized();
    kf.gt_position = origin;
    kf.position = origin + Eigen::Vector3d(gaussian(jitter_rng, spec.trajectory.pose_jitter),
                                           gaussian(jitter_rng, spec.trajectory.pose_jitter),
                                           gaussian(jitter_rng, spec.trajectory.pose_jitter));
    std::vector<PointLabel> labels;
    for (int ray = 0; ray < sensor.rays_per_keyframe; ++ray) {
      // Uniform over the frustum's solid angle slice.
      const double azimuth = uniform(sensor_rng, -half_h, half_h);
      const double sin_el = uniform(sensor_rng, -sin_half_v, sin_half_v);
      const double noise = gaussian(sensor_rng, sensor.intensity_noise);
      const double cos_el = std::sqrt(1.0 - sin_el * sin_el);
      const Eigen::Vector3d dir_cam(cos_el * std::sin(azimuth), -sin_el, cos_el * std::cos(azimuth));
      const Eigen::Vector3d dir = rotation * dir_cam;
      double best_t = std::numeric_limits<double>::infinity();
      std::uint32_t best_e = 0;
      for (const std::uint32_t e : nearby) {
        const double t = intersect(out.elements[e], origin, dir);
        if (t < best_t) {
          best_t = t;
          best_e = e;
        }
      }
      if (!(best_t <= sensor.max_range)) continue;
      const Eigen::Vector3d hit = origin + best_t * dir;
      const WorldElement& el = out.elements[best_e];
      IntensityPoint p;
      p.position = rotation.transpose() * (hit - origin);
      p.intensity = to_intensity(el.base_intensity +
                                 spec.layout.texture_amplitude * texture(best_e, hit, spec.layout.texture_cell) + noise);
      kf.points.push_back(p);
      labels.push_back({best_e, el.cls});
    }
    out.keyframes.push_back(std::move(kf));
    out.labels.push_back(std::move(labels));
    out.legs.push_back(st.leg);
  }
  return out;
}

SynthSequence perturb(const SynthSequence& sequence, const PerturbationSpec& perturbation, std::uint64_t seed) {
  SynthSequence out = sequence;
  if (perturbation.is_identity()) return out;
  std::mt19937_64 rng(splitmix64(seed ^ 0x9e27b0ULL));
  std::vector<double> element_offset(sequence.elements.size());
  for (double& o : element_offset) o = gaussian(rng, perturbation.element_jitter);

  for (std::size_t k = 0; k < out.keyframes.size(); ++k) {
    if (std::find(perturbation.legs.begin(), perturbation.legs.end(), out.legs[k]) == perturbation.legs.end()) {
      continue;
    }
    Keyframe& kf = out.keyframes[k];
    const Eigen::Matrix3d rotation = kf.orientation.toRotationMatrix();
    const Eigen::Vector3d origin = kf.gt_position.value_or(kf.position);
    for (std::size_t i = 0; i < kf.points.size(); ++i) {
      IntensityPoint& p = kf.points[i];
      const PointLabel& label = out.labels[k][i];
      if (label.cls == ElementClass::kVegetation && perturbation.vegetation_resample > 0.0 &&
          uniform(rng, 0.0, 1.0) < perturbation.vegetation_resample) {
        const WorldElement& canopy = sequence.elements[label.element];
        Eigen::Vector3d u;
        do {
          u = Eigen::Vector3d(uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0));
        } while (u.squaredNorm() > 1.0);
        const Eigen::Vector3d world = canopy.min + perturbation.canopy_scale * u.cwiseProduct(canopy.max);
        p.position = rotation.transpose() * (world - origin);
      }
      const double value = perturbation.intensity_gain * p.intensity + perturbation.intensity_offset +
                           element_offset[label.element] + gaussian(rng, perturbation.point_noise);
      p.intensity = to_intensity(value);
    }
  }
  return out;
}

std::vector<std::pair<std::int64_t, std::int64_t>> leg_id_ranges(const SynthSequence& sequence) {
  std::vector<std::pair<std::int64_t, std::int64_t>> ranges;
  for (std::size_t k = 0; k < sequence.keyframes.size(); ++k) {
    const auto leg = static_cast<std::size_t>(sequence.legs[k]);
    const std::int64_t id = sequence.keyframes[k].id;
    if (ranges.size() <= leg) ranges.resize(leg + 1, {id, id});
    ranges[leg].second = id;
  }
  return ranges;
}

}  // namespace placerec
