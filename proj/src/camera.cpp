#include "vifi/camera.hpp"

#include "vifi/parallel.hpp"

#include <vector>

namespace vifi {

namespace {

void require_positive_depth(const ImageGrid& depth, const char* what) {
  if (depth.channels() != 1) throw std::invalid_argument(std::string(what) + ": depth must have 1 channel");
  for (Eigen::Index i = 0; i < depth.size(); ++i) {
    if (!(depth.data()[i] > 0.0)) {
      throw std::invalid_argument(std::string(what) + ": depth must be strictly positive");
    }
  }
}

}  // namespace

Reprojection reproject_map(const ImageGrid& depth, const LinearPose& pose, const Intrinsics& k) {
  require_positive_depth(depth, "reproject_map");
  const int h = depth.height();
  const int w = depth.width();
  Reprojection out{CoordMap(h, w, 2), ValidityMask(h, w), ImageGrid(h, w, 2)};
  const Eigen::Matrix3d k_inv = k.inverse();
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Eigen::Vector3d ray = k_inv * Eigen::Vector3d(x, y, 1.0);
      const Eigen::Vector3d q = pose.linear * (depth(y, x) * ray) + pose.translation;
      if (!(q.z() > kMinReprojectedDepth)) {
        out.coords(y, x, 0) = x;
        out.coords(y, x, 1) = y;
        continue;
      }
      out.valid(y, x) = 1;
      const double iz = 1.0 / q.z();
      out.coords(y, x, 0) = k.fx * q.x() * iz + k.cx;
      out.coords(y, x, 1) = k.fy * q.y() * iz + k.cy;
      const Eigen::Vector3d dq = pose.linear * ray;
      out.d_coords_d_depth(y, x, 0) = k.fx * (dq.x() - q.x() * iz * dq.z()) * iz;
      out.d_coords_d_depth(y, x, 1) = k.fy * (dq.y() - q.y() * iz * dq.z()) * iz;
    }
  });
  return out;
}

ReprojectionVjp reproject_map_vjp(const ImageGrid& depth, const LinearPose& pose,
                                  const Intrinsics& k, const CoordMap& d_coords) {
  require_positive_depth(depth, "reproject_map_vjp");
  require_same_extent(depth, d_coords, "reproject_map_vjp");
  const int h = depth.height();
  const int w = depth.width();
  ReprojectionVjp out{ImageGrid(h, w, 1), {}};
  std::vector<LinearPoseGradient> row_pose(h);
  const Eigen::Matrix3d k_inv = k.inverse();
  parallel_rows(h, [&](int y) {
    LinearPoseGradient& acc = row_pose[y];
    for (int x = 0; x < w; ++x) {
      const double gu = d_coords(y, x, 0);
      const double gv = d_coords(y, x, 1);
      if (gu == 0.0 && gv == 0.0) continue;
      const Eigen::Vector3d ray = k_inv * Eigen::Vector3d(x, y, 1.0);
      const Eigen::Vector3d p = depth(y, x) * ray;
      const Eigen::Vector3d q = pose.linear * p + pose.translation;
      if (!(q.z() > kMinReprojectedDepth)) continue;
      const double iz = 1.0 / q.z();
      const Eigen::Vector3d d_q(gu * k.fx * iz, gv * k.fy * iz,
                                -(gu * k.fx * q.x() + gv * k.fy * q.y()) * iz * iz);
      out.d_depth(y, x) = d_q.dot(pose.linear * ray);
      acc.d_linear.noalias() += d_q * p.transpose();
      acc.d_translation += d_q;
    }
  });
  for (const auto& r : row_pose) out.d_pose += r;
  return out;
}

Vector6d pose_params_gradient(const PoseParams& params, const LinearPoseGradient& g) {
  const auto jac = rotation_jacobian(params.axis_angle);
  Vector6d out;
  for (int i = 0; i < 3; ++i) out[i] = g.d_linear.cwiseProduct(jac[i]).sum();
  out.tail<3>() = g.d_translation;
  return out;
}

}  // namespace vifi
