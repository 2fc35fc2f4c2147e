#include "vifi/affine.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace vifi {

AffineParams AffineParams::identity(int height, int width) {
  AffineParams p;
  p.image_center = {(width - 1) / 2.0, (height - 1) / 2.0};
  p.crop_center = p.image_center;
  return p;
}

void AffineParams::validate() const {
  if (!(scale >= 1.0)) throw std::invalid_argument("AffineParams: scale must be >= 1");
  if (!(std::abs(theta) <= M_PI)) throw std::invalid_argument("AffineParams: |theta| must be <= pi");
  if (!crop_center.allFinite() || !image_center.allFinite()) {
    throw std::invalid_argument("AffineParams: centers must be finite");
  }
}

Eigen::Matrix2d AffineParams::rotation2() const {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Eigen::Matrix2d r;
  r << c, s, -s, c;
  return r;
}

Eigen::Matrix3d AffineParams::rotation3() const {
  Eigen::Matrix3d r = Eigen::Matrix3d::Identity();
  r.topLeftCorner<2, 2>() = rotation2();
  return r;
}

Eigen::Vector3d AffineParams::offset() const {
  const Eigen::Vector3d centered(-image_center.x(), -image_center.y(), 1.0 / scale - 1.0);
  const Eigen::Vector3d shift((image_center.x() - crop_center.x()) + image_center.x() / scale,
                              (image_center.y() - crop_center.y()) + image_center.y() / scale,
                              0.0);
  return rotation3() * centered + shift;
}

Eigen::Vector2d affine_pixel(const AffineParams& params, const Eigen::Vector2d& pixel) {
  const Eigen::Vector2d& c = params.image_center;
  return params.rotation2() * (params.scale * (pixel - c)) +
         params.scale * (c - params.crop_center) + c;
}

Eigen::Vector2d affine_pixel_inverse(const AffineParams& params, const Eigen::Vector2d& pixel) {
  const Eigen::Vector2d& c = params.image_center;
  return c + params.rotation2().transpose() *
                 ((pixel - c) / params.scale - (c - params.crop_center));
}

CoordMap affine_inverse_coords(const AffineParams& params, int height, int width) {
  params.validate();
  CoordMap coords(height, width, 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector2d src = affine_pixel_inverse(params, {double(x), double(y)});
      coords(y, x, 0) = src.x();
      coords(y, x, 1) = src.y();
    }
  }
  return coords;
}

CoordMap affine_forward_coords(const AffineParams& params, int height, int width) {
  params.validate();
  CoordMap coords(height, width, 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector2d dst = affine_pixel(params, {double(x), double(y)});
      coords(y, x, 0) = dst.x();
      coords(y, x, 1) = dst.y();
    }
  }
  return coords;
}

SampleResult affine_image(const ImageGrid& image, const AffineParams& params) {
  return bilinear_sample(image, affine_inverse_coords(params, image.height(), image.width()));
}

double affine_depth_value(double depth, double scale) {
  if (!(depth > 0.0)) throw std::invalid_argument("affine_depth_value: depth must be positive");
  return depth / scale;
}

namespace {

// K^-1 m evaluated row by row as (m0 - cx m2) / fx, which keeps centered
// cases free of rounding.
Eigen::Matrix3d apply_k_inverse(const Intrinsics& k, const Eigen::Matrix3d& m) {
  Eigen::Matrix3d out;
  out.row(0) = (m.row(0) - k.cx * m.row(2)) / k.fx;
  out.row(1) = (m.row(1) - k.cy * m.row(2)) / k.fy;
  out.row(2) = m.row(2);
  return out;
}

}  // namespace

RectificationMatrix rectification_matrix(const Intrinsics& k, const AffineParams& params) {
  params.validate();
  const Eigen::Matrix3d r_minus_i = params.rotation3() - Eigen::Matrix3d::Identity();
  Eigen::Matrix3d offset_block = Eigen::Matrix3d::Zero();
  offset_block.col(2) = params.offset();
  // K^-1 R K written as I + K^-1 (R - I) K so the unrotated case stays exact.
  RectificationMatrix rc;
  rc.matrix = Eigen::Matrix3d::Identity() + apply_k_inverse(k, r_minus_i * k.matrix()) +
              apply_k_inverse(k, offset_block);
  return rc;
}

LinearPose rectify_pose(const LinearPose& pose, const RectificationMatrix& rc) {
  if (!(std::abs(rc.matrix.determinant()) > 1e-12)) {
    throw std::invalid_argument("rectify_pose: singular rectification matrix");
  }
  return {rc.matrix * pose.linear * rc.matrix.inverse(), rc.matrix * pose.translation};
}

RestoredDepth affine_inverse_depth(const ImageGrid& augmented_depth, const AffineParams& params) {
  SampleResult s = bilinear_sample(
      augmented_depth,
      affine_forward_coords(params, augmented_depth.height(), augmented_depth.width()));
  return {std::move(s.values), std::move(s.valid)};
}

ImageGrid affine_inverse_depth_vjp(const AffineParams& params, int height, int width,
                                   const ImageGrid& upstream) {
  return bilinear_grid_vjp(height, width, affine_forward_coords(params, height, width), upstream);
}

AffineParams sample_aug_params(Rng& rng, int height, int width, const AugmentationRanges& ranges) {
  AffineParams p = AffineParams::identity(height, width);
  p.scale = uniform(rng, ranges.scale_min, ranges.scale_max);
  const double max_theta = ranges.theta_max_deg * M_PI / 180.0;
  p.theta = uniform(rng, -max_theta, max_theta);

  // Source-space point that lands on the output center; the output box,
  // rotated and shrunk by 1/f_s around it, must stay inside the image.
  const double hw = (width - 1) / 2.0;
  const double hh = (height - 1) / 2.0;
  const double c = std::abs(std::cos(p.theta));
  const double s = std::abs(std::sin(p.theta));
  constexpr double kMargin = 1e-9;
  const double ex = (c * hw + s * hh) / p.scale + kMargin;
  const double ey = (s * hw + c * hh) / p.scale + kMargin;
  auto pick = [&](double extent, double half) {
    const double lo = extent;
    const double hi = 2.0 * half - extent;
    const double u = uniform01(rng);
    return lo <= hi ? lo + (hi - lo) * u : half;
  };
  const Eigen::Vector2d anchor(pick(ex, hw), pick(ey, hh));
  p.crop_center = p.image_center + p.rotation2() * (anchor - p.image_center);
  return p;
}

bool AffineSuiteReport::passed(double tolerance) const {
  return cases > 0 && max_pixel_rel_error < tolerance && max_depth_rel_error < tolerance &&
         identity_error < 1e-12 && centered_error == 0.0;
}

AffineSuiteReport run_affine_suite(std::uint64_t seed, int cases) {
  Rng rng(seed);
  AffineSuiteReport r;
  r.cases = cases;
  for (int i = 0; i < cases; ++i) {
    const int w = 32 + static_cast<int>(uniform(rng, 0.0, 600.0));
    const int h = 24 + static_cast<int>(uniform(rng, 0.0, 400.0));
    const Intrinsics k{uniform(rng, 0.5, 1.5) * w, uniform(rng, 0.5, 1.5) * w,
                       uniform(rng, 0.4, 0.6) * w, uniform(rng, 0.4, 0.6) * h};
    AffineParams params = AffineParams::identity(h, w);
    params.scale = uniform(rng, 1.0, 3.0);
    params.theta = uniform(rng, -0.5, 0.5);
    params.crop_center = {uniform(rng, 0.0, w - 1.0), uniform(rng, 0.0, h - 1.0)};
    const Eigen::Vector2d pixel(uniform(rng, 0.0, w - 1.0), uniform(rng, 0.0, h - 1.0));
    const double depth = uniform(rng, 0.5, 80.0);
    const Eigen::Vector3d point = backproject(pixel, depth, k);

    const Eigen::Vector2d via_pixels = affine_pixel(params, project(point, k));
    const Eigen::Vector3d rectified = rectification_matrix(k, params).matrix * point;
    const Eigen::Vector2d via_points = project(rectified, k);
    const double scale = std::max(1.0, via_pixels.cwiseAbs().maxCoeff());
    r.max_pixel_rel_error =
        std::max(r.max_pixel_rel_error, (via_points - via_pixels).cwiseAbs().maxCoeff() / scale);
    const double expected_z = affine_depth_value(depth, params.scale);
    r.max_depth_rel_error =
        std::max(r.max_depth_rel_error, std::abs(rectified.z() - expected_z) / expected_z);

    const AffineParams identity = AffineParams::identity(h, w);
    r.identity_error = std::max(
        r.identity_error,
        (rectification_matrix(k, identity).matrix - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff());
    // The closed form holds when the principal point is the image center.
    AffineParams centered = identity;
    centered.scale = 2.0;
    const Intrinsics kc{k.fx, k.fy, identity.image_center.x(), identity.image_center.y()};
    const Eigen::Matrix3d half = Eigen::Vector3d(1.0, 1.0, 0.5).asDiagonal();
    r.centered_error = std::max(
        r.centered_error, (rectification_matrix(kc, centered).matrix - half).cwiseAbs().maxCoeff());
  }
  return r;
}

}  // namespace vifi
