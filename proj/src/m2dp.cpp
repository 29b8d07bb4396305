#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "placerec/descriptors.hpp"
#include "placerec/error.hpp"

namespace placerec {

namespace {

void validate(const M2dpParams& params) {
  if (params.rings <= 0 || params.sectors <= 0 || params.azimuth_planes <= 0 || params.elevation_planes <= 0) {
    throw ConfigError("M2DP parameters l, t, p, q must be positive");
  }
}

}  // namespace

std::vector<Eigen::Vector3d> m2dp_plane_normals(const M2dpParams& params) {
  validate(params);
  constexpr double kPi = std::numbers::pi;
  std::vector<Eigen::Vector3d> normals;
  normals.reserve(static_cast<std::size_t>(params.plane_count()));
  for (int i = 0; i < params.azimuth_planes; ++i) {
    const double azimuth = -kPi / 2.0 + i * kPi / params.azimuth_planes;
    for (int j = 0; j < params.elevation_planes; ++j) {
      const double elevation = j * (kPi / 2.0) / params.elevation_planes;
      normals.emplace_back(std::cos(elevation) * std::cos(azimuth), std::cos(elevation) * std::sin(azimuth),
                           std::sin(elevation));
    }
  }
  return normals;
}

Eigen::Vector3d m2dp_plane_x_axis(const Eigen::Vector3d& normal) {
  // The x axis projected onto the plane; the plane with normal +x uses the y axis instead.
  const Eigen::Vector3d reference =
      std::abs(normal.x()) > 1.0 - 1e-9 ? Eigen::Vector3d::UnitY() : Eigen::Vector3d::UnitX();
  return (reference - reference.dot(normal) * normal).normalized();
}

double m2dp_max_radius(const PointCloud& aligned) {
  double max_sq = 0.0;
  for (const auto& p : aligned) max_sq = std::max(max_sq, p.position.squaredNorm());
  return std::sqrt(max_sq);
}

int m2dp_ring(double rho, double max_radius, int rings) {
  if (!(max_radius > 0.0)) return 0;
  const int ring = static_cast<int>(rings * std::sqrt(rho / max_radius));
  return std::clamp(ring, 0, rings - 1);
}

int m2dp_sector(double theta, int sectors) {
  const int sector = static_cast<int>((theta + std::numbers::pi) / (2.0 * std::numbers::pi / sectors));
  return std::clamp(sector, 0, sectors - 1);
}

double approx_atan2(double y, double x) {
  constexpr double kPi = std::numbers::pi;
  constexpr std::array<double, 10> kCoeffs = {
      0.9999999841277821,   -0.3333319473870713,  0.19996626041685364,  -0.14248418599412588,
      0.10882237729399362,  -0.08222729239914028, 0.05514476858716641,  -0.028581931530949747,
      0.00960658346573719,  -0.001516454052976828};
  const double ax = std::abs(x);
  const double ay = std::abs(y);
  const double hi = std::max(ax, ay);
  if (hi == 0.0) return std::atan2(y, x);
  const double r = std::min(ax, ay) / hi;
  const double r2 = r * r;
  double poly = kCoeffs.back();
  for (auto it = kCoeffs.rbegin() + 1; it != kCoeffs.rend(); ++it) poly = poly * r2 + *it;
  double angle = r * poly;
  if (ay > ax) angle = kPi / 2.0 - angle;
  if (x < 0.0) angle = kPi - angle;
  return std::signbit(y) ? -angle : angle;
}

int m2dp_sector_of(double y, double x, int sectors) {
  // Far enough from a boundary the approximate angle lands in the same bin.
  constexpr double kMargin = 1e-6;
  const double per_radian = sectors / (2.0 * std::numbers::pi);
  const double position = (approx_atan2(y, x) + std::numbers::pi) * per_radian;
  const int sector = static_cast<int>(position);
  const double fraction = position - sector;
  if (!(fraction > kMargin * per_radian && fraction < 1.0 - kMargin * per_radian) || sector >= sectors) {
    return m2dp_sector(std::atan2(y, x), sectors);
  }
  return sector;
}

Eigen::MatrixXd m2dp_projection_matrix(const PointCloud& aligned, const M2dpParams& params, double max_radius) {
  const auto normals = m2dp_plane_normals(params);
  Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(params.plane_count(), params.bin_count());
  for (std::size_t row = 0; row < normals.size(); ++row) {
    const Eigen::Vector3d& n = normals[row];
    const Eigen::Vector3d u = m2dp_plane_x_axis(n);
    const Eigen::Vector3d v = n.cross(u);
    for (const auto& p : aligned) {
      const double a = u.dot(p.position);
      const double b = v.dot(p.position);
      const int ring = m2dp_ring(std::sqrt(a * a + b * b), max_radius, params.rings);
      const int sector = m2dp_sector_of(b, a, params.sectors);
      counts(static_cast<Eigen::Index>(row), ring * params.sectors + sector) += 1.0;
    }
  }
  return counts;
}

void canonicalize_sign(Eigen::Ref<Eigen::VectorXd> v) {
  if (v.size() == 0) return;
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (std::abs(v[i]) > std::abs(v[best])) best = i;
  }
  if (v[best] < 0.0) v = -v;
}

M2dpVariant describe_m2dp_variant(const PointCloud& aligned, const M2dpParams& params) {
  validate(params);
  if (aligned.empty()) throw DegenerateError("M2DP: empty cloud gives an all-zero projection matrix");
  const double max_radius = m2dp_max_radius(aligned);
  if (!(max_radius > 0.0)) throw DegenerateError("M2DP: all points coincide with the origin");

  const Eigen::MatrixXd a = m2dp_projection_matrix(aligned, params, max_radius);
  // Leading singular pair through the (p*q) x (p*q) Gram matrix.
  const Eigen::MatrixXd gram = a * a.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw DegenerateError("M2DP: SVD of the projection matrix failed");
  const Eigen::Index top = gram.rows() - 1;
  const double sigma = std::sqrt(std::max(solver.eigenvalues()[top], 0.0));
  if (!(sigma > 0.0)) throw DegenerateError("M2DP: projection matrix is all zero");

  Eigen::VectorXd left = solver.eigenvectors().col(top);
  Eigen::VectorXd right = a.transpose() * left / sigma;
  right.normalize();
  canonicalize_sign(left);
  canonicalize_sign(right);

  M2dpVariant out;
  out.structure.resize(static_cast<std::size_t>(params.structure_length()));
  std::copy(left.data(), left.data() + left.size(), out.structure.begin());
  std::copy(right.data(), right.data() + right.size(), out.structure.begin() + left.size());

  // Intensity: mean per horizontal bin against the cloud's mean, compared in
  // integers so ties are exact.
  const auto bins = static_cast<std::size_t>(params.bin_count());
  std::vector<std::uint64_t> bin_sum(bins, 0);
  std::vector<std::uint64_t> bin_count(bins, 0);
  std::uint64_t global_sum = 0;
  for (const auto& p : aligned) {
    const int ring = m2dp_ring(std::sqrt(p.position.x() * p.position.x() + p.position.y() * p.position.y()),
                                max_radius, params.rings);
    const int sector = m2dp_sector_of(p.position.y(), p.position.x(), params.sectors);
    const auto bin = static_cast<std::size_t>(ring * params.sectors + sector);
    bin_sum[bin] += p.intensity;
    bin_count[bin] += 1;
    global_sum += p.intensity;
  }
  const std::uint64_t n = aligned.size();
  out.intensity.assign(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    if (bin_count[b] > 0 && bin_sum[b] * n > global_sum * bin_count[b]) out.intensity[b] = 1.0;
  }
  return out;
}

M2dpSignature describe_m2dp(const AlignedCloudSet& aligned, const M2dpParams& params) {
  M2dpSignature sig;
  for (std::size_t k = 0; k < kPcaVariants; ++k) sig.variants[k] = describe_m2dp_variant(aligned.variants[k], params);
  return sig;
}

}  // namespace placerec
