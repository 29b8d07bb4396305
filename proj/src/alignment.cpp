#include "placerec/alignment.hpp"

#include <Eigen/Eigenvalues>

#include "placerec/error.hpp"

namespace placerec {

std::array<int, 2> variant_signs(std::size_t k) {
  static constexpr std::array<std::array<int, 2>, kPcaVariants> kSigns{{{1, 1}, {1, -1}, {-1, 1}, {-1, -1}}};
  return kSigns.at(k);
}

namespace {

double third_moment(const PointCloud& points, const Eigen::Vector3d& centroid, const Eigen::Vector3d& axis) {
  double sum = 0.0;
  for (const auto& p : points) {
    const double d = axis.dot(p.position - centroid);
    sum += d * d * d;
  }
  return sum;
}

}  // namespace

AlignedCloudSet pca_align(const PointCloud& points) {
  if (points.size() < 3) {
    throw DegenerateError("PCA needs at least 3 points, got " + std::to_string(points.size()));
  }
  AlignedCloudSet out;
  Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
  for (const auto& p : points) centroid += p.position;
  centroid /= static_cast<double>(points.size());

  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p.position - centroid;
    covariance.noalias() += d * d.transpose();
  }
  covariance /= static_cast<double>(points.size());

  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(covariance);
  if (solver.info() != Eigen::Success) throw DegenerateError("PCA eigen-decomposition failed");
  // Eigen sorts ascending.
  const Eigen::Vector3d values = solver.eigenvalues().reverse().cwiseMax(0.0);
  if (!(values[0] > 0.0) || values[1] / values[0] < kDegenerateEigenRatio) {
    throw DegenerateError("degenerate cloud: points are collinear or coincident");
  }

  Eigen::Vector3d e1 = solver.eigenvectors().col(2);
  Eigen::Vector3d e3 = solver.eigenvectors().col(0);
  if (third_moment(points, centroid, e3) < 0.0) e3 = -e3;
  if (third_moment(points, centroid, e1) < 0.0) e1 = -e1;
  const Eigen::Vector3d e2 = e3.cross(e1).normalized();

  out.centroid = centroid;
  out.eigenvalues = values;
  for (std::size_t k = 0; k < kPcaVariants; ++k) {
    const auto [s1, s2] = variant_signs(k);
    const Eigen::Vector3d a1 = s1 * e1;
    const Eigen::Vector3d a2 = s2 * e2;
    Eigen::Matrix3d frame;
    frame.row(0) = a1.transpose();
    frame.row(1) = a2.transpose();
    frame.row(2) = a1.cross(a2).transpose();
    out.frames[k] = frame;

    PointCloud& variant = out.variants[k];
    variant.reserve(points.size());
    for (const auto& p : points) variant.push_back({frame * (p.position - centroid), p.intensity});
  }
  return out;
}

}  // namespace placerec
