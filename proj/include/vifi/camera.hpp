#pragma once

#include "vifi/imgrid.hpp"

#include <Eigen/Core>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <stdexcept>

namespace vifi {

/// Pinhole intrinsics K = [[fx, 0, cx], [0, fy, cy], [0, 0, 1]].
template <typename Scalar>
struct IntrinsicsT {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

  Scalar fx = 1;
  Scalar fy = 1;
  Scalar cx = 0;
  Scalar cy = 0;

  void validate() const {
    if (!(fx > 0) || !(fy > 0)) throw std::invalid_argument("Intrinsics: focal lengths must be positive");
  }

  Matrix3 matrix() const {
    Matrix3 k;
    k << fx, 0, cx, 0, fy, cy, 0, 0, 1;
    return k;
  }

  Matrix3 inverse() const {
    Matrix3 k;
    k << 1 / fx, 0, -cx / fx, 0, 1 / fy, -cy / fy, 0, 0, 1;
    return k;
  }

  // Intrinsics of the same camera sampled on a grid rescaled by (rx, ry)
  // with half-pixel alignment.
  IntrinsicsT rescaled(Scalar rx, Scalar ry) const {
    return {fx * rx, fy * ry, (cx + Scalar(0.5)) * rx - Scalar(0.5),
            (cy + Scalar(0.5)) * ry - Scalar(0.5)};
  }
};

/// Rigid transform; maps points of one camera frame into another.
template <typename Scalar>
struct PoseSE3T {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 rotation = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  static PoseSE3T identity() { return {}; }

  bool is_rigid(Scalar tol = Scalar(1e-9)) const {
    const Matrix3 e = rotation.transpose() * rotation - Matrix3::Identity();
    return e.cwiseAbs().maxCoeff() < tol && std::abs(rotation.determinant() - 1) < tol;
  }
};

/// General x -> A x + t. Rectified poses live here: conjugating a rotation by
/// a non-orthogonal matrix leaves SE(3).
template <typename Scalar>
struct LinearPoseT {
  using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

  Matrix3 linear = Matrix3::Identity();
  Vector3 translation = Vector3::Zero();

  LinearPoseT() = default;
  LinearPoseT(const Matrix3& a, const Vector3& t) : linear(a), translation(t) {}
  LinearPoseT(const PoseSE3T<Scalar>& p)  // NOLINT: implicit by intent
      : linear(p.rotation), translation(p.translation) {}
};

/// Axis-angle rotation plus translation; the optimizer's pose variables.
template <typename Scalar>
struct PoseParamsT {
  using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
  Vector3 axis_angle = Vector3::Zero();
  Vector3 translation = Vector3::Zero();
};

using Intrinsics = IntrinsicsT<double>;
using PoseSE3 = PoseSE3T<double>;
using LinearPose = LinearPoseT<double>;
using PoseParams = PoseParamsT<double>;

template <typename Scalar>
Eigen::Matrix<Scalar, 2, 1> project(const Eigen::Matrix<Scalar, 3, 1>& point,
                                    const IntrinsicsT<Scalar>& k) {
  if (!(point.z() > 0)) throw std::domain_error("project: point is behind the camera");
  return {k.fx * point.x() / point.z() + k.cx, k.fy * point.y() / point.z() + k.cy};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> backproject(const Eigen::Matrix<Scalar, 2, 1>& pixel, Scalar depth,
                                        const IntrinsicsT<Scalar>& k) {
  if (!(depth > 0)) throw std::invalid_argument("backproject: depth must be positive");
  return {depth * (pixel.x() - k.cx) / k.fx, depth * (pixel.y() - k.cy) / k.fy, depth};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> transform_point(const PoseSE3T<Scalar>& t,
                                            const Eigen::Matrix<Scalar, 3, 1>& p) {
  return t.rotation * p + t.translation;
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 1> transform_point(const LinearPoseT<Scalar>& t,
                                            const Eigen::Matrix<Scalar, 3, 1>& p) {
  return t.linear * p + t.translation;
}

/// a ∘ b: apply b first.
template <typename Scalar>
PoseSE3T<Scalar> pose_compose(const PoseSE3T<Scalar>& a, const PoseSE3T<Scalar>& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

template <typename Scalar>
PoseSE3T<Scalar> pose_inverse(const PoseSE3T<Scalar>& t) {
  const auto rt = t.rotation.transpose();
  return {rt, -(rt * t.translation)};
}

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> skew(const Eigen::Matrix<Scalar, 3, 1>& v) {
  Eigen::Matrix<Scalar, 3, 3> s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

namespace detail {

// Rodrigues coefficients R = I + a [w]x + b [w]x^2 and their radial
// derivatives divided by theta, with series expansions near zero.
template <typename Scalar>
struct RodriguesCoefficients {
  Scalar a, b, da_over_theta, db_over_theta;
};

template <typename Scalar>
RodriguesCoefficients<Scalar> rodrigues_coefficients(Scalar theta) {
  const Scalar t2 = theta * theta;
  if (theta < Scalar(1e-2)) {
    const Scalar t4 = t2 * t2;
    const Scalar t6 = t4 * t2;
    return {1 - t2 / 6 + t4 / 120 - t6 / 5040, Scalar(0.5) - t2 / 24 + t4 / 720 - t6 / 40320,
            -Scalar(1) / 3 + t2 / 30 - t4 / 840 + t6 / 45360,
            -Scalar(1) / 12 + t2 / 180 - t4 / 6720 + t6 / 453600};
  }
  const Scalar s = std::sin(theta);
  const Scalar c = std::cos(theta);
  return {s / theta, (1 - c) / t2, (theta * c - s) / (t2 * theta),
          (theta * s - 2 * (1 - c)) / (t2 * t2)};
}

}  // namespace detail

template <typename Scalar>
Eigen::Matrix<Scalar, 3, 3> rotation_from_axis_angle(const Eigen::Matrix<Scalar, 3, 1>& w) {
  const auto k = detail::rodrigues_coefficients(w.norm());
  const auto s = skew(w);
  return Eigen::Matrix<Scalar, 3, 3>::Identity() + k.a * s + k.b * s * s;
}

/// dR/dw_i for i = 0, 1, 2.
template <typename Scalar>
std::array<Eigen::Matrix<Scalar, 3, 3>, 3> rotation_jacobian(const Eigen::Matrix<Scalar, 3, 1>& w) {
  const auto k = detail::rodrigues_coefficients(w.norm());
  const Eigen::Matrix<Scalar, 3, 3> s = skew(w);
  const Eigen::Matrix<Scalar, 3, 3> s2 = s * s;
  std::array<Eigen::Matrix<Scalar, 3, 3>, 3> out;
  for (int i = 0; i < 3; ++i) {
    const Eigen::Matrix<Scalar, 3, 3> e = skew(Eigen::Matrix<Scalar, 3, 1>(Eigen::Matrix<Scalar, 3, 1>::Unit(i)));
    out[i] = k.da_over_theta * w[i] * s + k.a * e + k.db_over_theta * w[i] * s2 +
             k.b * (e * s + s * e);
  }
  return out;
}

template <typename Scalar>
PoseSE3T<Scalar> pose_from_params(const PoseParamsT<Scalar>& p) {
  if (!(p.axis_angle.norm() < Scalar(M_PI))) {
    throw std::invalid_argument("pose_from_params: axis-angle norm must be below pi");
  }
  return {rotation_from_axis_angle(p.axis_angle), p.translation};
}

// ---------------------------------------------------------------------------
// Dense reprojection (view synthesis coordinates).

/// Transformed points with camera-frame z at or below this are invalid.
inline constexpr double kMinReprojectedDepth = 1e-6;

struct Reprojection {
  CoordMap coords;            ///< source-view sampling positions
  ValidityMask valid;         ///< 0 where the point lands behind the source camera
  ImageGrid d_coords_d_depth; ///< 2 channels: d(x, y)/dD per pixel
};

/// Gradient of a scalar w.r.t. the entries of a LinearPose.
struct LinearPoseGradient {
  Eigen::Matrix3d d_linear = Eigen::Matrix3d::Zero();
  Eigen::Vector3d d_translation = Eigen::Vector3d::Zero();

  LinearPoseGradient& operator+=(const LinearPoseGradient& o) {
    d_linear += o.d_linear;
    d_translation += o.d_translation;
    return *this;
  }
};

struct ReprojectionVjp {
  ImageGrid d_depth;
  LinearPoseGradient d_pose;
};

/// coords(p) = project(T · backproject(p, D(p))). T maps target-frame
/// points into the source frame.
Reprojection reproject_map(const ImageGrid& depth, const LinearPose& pose, const Intrinsics& k);

/// Pulls an upstream gradient on coords back to depth and pose entries.
ReprojectionVjp reproject_map_vjp(const ImageGrid& depth, const LinearPose& pose,
                                  const Intrinsics& k, const CoordMap& d_coords);

using Vector6d = Eigen::Matrix<double, 6, 1>;

/// Chains a gradient on (R, t) into (axis_angle, translation).
Vector6d pose_params_gradient(const PoseParams& params, const LinearPoseGradient& g);

}  // namespace vifi
