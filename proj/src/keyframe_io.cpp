#include "placerec/keyframe_io.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include "placerec/error.hpp"
#include "placerec/text_format.hpp"

namespace placerec {

namespace {

Keyframe parse_header(const std::vector<std::string_view>& tokens, const text::LineReader& reader,
                      std::size_t& n_points) {
  if (tokens.size() != 10 && tokens.size() != 13) {
    reader.fail("expected 'KF <id> <tx> <ty> <tz> <qx> <qy> <qz> <qw> <n_points> [gt_x gt_y gt_z]'");
  }
  Keyframe kf;
  const auto id = text::parse_int(tokens[1]);
  if (!id) reader.fail("invalid keyframe id '" + std::string(tokens[1]) + "'");
  kf.id = *id;

  double v[7];
  for (int i = 0; i < 7; ++i) {
    const auto d = text::parse_double(tokens[2 + i]);
    if (!d) reader.fail("invalid number '" + std::string(tokens[2 + i]) + "'");
    v[i] = *d;
  }
  kf.position = {v[0], v[1], v[2]};
  kf.orientation = Eigen::Quaterniond(v[6], v[3], v[4], v[5]);
  if (std::abs(kf.orientation.norm() - 1.0) > kQuaternionNormTolerance) {
    reader.fail("quaternion is not normalized");
  }

  const auto n = text::parse_int(tokens[9]);
  if (!n || *n < 0) reader.fail("invalid point count '" + std::string(tokens[9]) + "'");
  n_points = static_cast<std::size_t>(*n);

  if (tokens.size() == 13) {
    Eigen::Vector3d gt;
    for (int i = 0; i < 3; ++i) {
      const auto d = text::parse_double(tokens[10 + i]);
      if (!d) reader.fail("invalid ground-truth coordinate '" + std::string(tokens[10 + i]) + "'");
      gt[i] = *d;
    }
    kf.gt_position = gt;
  }
  return kf;
}

}  // namespace

std::optional<IntensityPoint> parse_point_line(const std::string& line, std::string& error) {
  const auto tokens = text::tokenize(line);
  if (tokens.size() != 4) {
    error = "expected '<x> <y> <z> <intensity>'";
    return std::nullopt;
  }
  IntensityPoint p;
  for (int i = 0; i < 3; ++i) {
    const auto d = text::parse_double(tokens[static_cast<std::size_t>(i)]);
    if (!d) {
      error = "invalid coordinate '" + std::string(tokens[static_cast<std::size_t>(i)]) + "'";
      return std::nullopt;
    }
    p.position[i] = *d;
  }
  const auto intensity = text::parse_int(tokens[3]);
  if (!intensity || *intensity < 0 || *intensity > 255) {
    error = "intensity must be an integer in [0, 255], got '" + std::string(tokens[3]) + "'";
    return std::nullopt;
  }
  p.intensity = static_cast<std::uint8_t>(*intensity);
  return p;
}

void write_point_line(std::ostream& out, const IntensityPoint& p) {
  out << text::format_double(p.position.x()) << ' ' << text::format_double(p.position.y()) << ' '
      << text::format_double(p.position.z()) << ' ' << static_cast<int>(p.intensity) << '\n';
}

std::vector<Keyframe> read_sequence(std::istream& in, const std::string& source) {
  std::vector<Keyframe> keyframes;
  text::LineReader reader(in, source);
  std::string line;
  std::string error;
  while (reader.next(line)) {
    const auto tokens = text::tokenize(line);
    if (tokens.front() != "KF") reader.fail("expected a 'KF' record, got '" + std::string(tokens.front()) + "'");
    std::size_t n_points = 0;
    Keyframe kf = parse_header(tokens, reader, n_points);
    if (!keyframes.empty() && kf.id <= keyframes.back().id) {
      reader.fail("keyframe ids must be strictly increasing (" + std::to_string(kf.id) +
                  " follows " + std::to_string(keyframes.back().id) + ")");
    }
    kf.points.reserve(n_points);
    for (std::size_t i = 0; i < n_points; ++i) {
      if (!reader.next(line)) {
        reader.fail("keyframe " + std::to_string(kf.id) + " ends after " + std::to_string(i) + " of " +
                    std::to_string(n_points) + " points");
      }
      auto p = parse_point_line(line, error);
      if (!p) reader.fail(error);
      kf.points.push_back(*p);
    }
    keyframes.push_back(std::move(kf));
  }
  return keyframes;
}

std::vector<Keyframe> load_sequence(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open keyframe file " + path.string());
  return read_sequence(in, path.string());
}

void write_sequence(std::ostream& out, const std::vector<Keyframe>& keyframes) {
  for (const auto& kf : keyframes) {
    const auto& q = kf.orientation;
    out << "KF " << kf.id << ' ' << text::format_double(kf.position.x()) << ' '
        << text::format_double(kf.position.y()) << ' ' << text::format_double(kf.position.z()) << ' '
        << text::format_double(q.x()) << ' ' << text::format_double(q.y()) << ' '
        << text::format_double(q.z()) << ' ' << text::format_double(q.w()) << ' ' << kf.points.size();
    if (kf.gt_position) {
      out << ' ' << text::format_double(kf.gt_position->x()) << ' '
          << text::format_double(kf.gt_position->y()) << ' ' << text::format_double(kf.gt_position->z());
    }
    out << '\n';
    for (const auto& p : kf.points) write_point_line(out, p);
  }
}

void save_sequence(const std::filesystem::path& path, const std::vector<Keyframe>& keyframes) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write keyframe file " + path.string());
  write_sequence(out, keyframes);
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace placerec
