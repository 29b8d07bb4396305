#include "placerec/geometry.hpp"

#include <cmath>

namespace placerec {

RigidTransform RigidTransform::from_quaternion(const Eigen::Quaterniond& q,
                                               const Eigen::Vector3d& t) {
  RigidTransform out;
  out.rotation = q.normalized().toRotationMatrix();
  out.translation = t;
  return out;
}

bool RigidTransform::is_valid(double tolerance) const {
  const Eigen::Matrix3d gram = rotation * rotation.transpose() - Eigen::Matrix3d::Identity();
  return gram.cwiseAbs().maxCoeff() <= tolerance &&
         std::abs(rotation.determinant() - 1.0) <= tolerance &&
         translation.allFinite();
}

Eigen::Vector3d transform_point(const RigidTransform& t, const Eigen::Vector3d& p) {
  return t.rotation * p + t.translation;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

RigidTransform inverse(const RigidTransform& t) {
  RigidTransform out;
  out.rotation = t.rotation.transpose();
  out.translation = -(out.rotation * t.translation);
  return out;
}

PointCloud transform_cloud(const RigidTransform& t, const PointCloud& cloud) {
  PointCloud out;
  out.reserve(cloud.size());
  for (const auto& p : cloud) {
    out.push_back({transform_point(t, p.position), p.intensity});
  }
  return out;
}

}  // namespace placerec
