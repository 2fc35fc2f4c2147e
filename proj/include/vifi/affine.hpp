#pragma once

#include "vifi/camera.hpp"
#include "vifi/imgrid.hpp"
#include "vifi/random.hpp"

#include <Eigen/Core>

namespace vifi {

/// Rotation about the image center (counterclockwise positive), resize by
/// `scale` >= 1, then a crop of the original size centered so that
/// `crop_center` lands on the output image center.
struct AffineParams {
  double scale = 1.0;  ///< resize factor f_s
  double theta = 0.0;  ///< radians
  Eigen::Vector2d crop_center = Eigen::Vector2d::Zero();
  Eigen::Vector2d image_center = Eigen::Vector2d::Zero();

  static AffineParams identity(int height, int width);
  void validate() const;

  /// Upper-left 2x2 block of the rotation matrix of the augmentation.
  Eigen::Matrix2d rotation2() const;
  Eigen::Matrix3d rotation3() const;
  /// The offset vector q with [x~, y~, 1] = f_s R [x, y, 1] + f_s q.
  Eigen::Vector3d offset() const;
};

struct RectificationMatrix {
  Eigen::Matrix3d matrix = Eigen::Matrix3d::Identity();
};

struct AugmentationRanges {
  double scale_min = 1.2;
  double scale_max = 2.0;
  double theta_max_deg = 5.0;
};

/// Pixel of the original image -> pixel of the augmented image.
Eigen::Vector2d affine_pixel(const AffineParams& params, const Eigen::Vector2d& pixel);
Eigen::Vector2d affine_pixel_inverse(const AffineParams& params, const Eigen::Vector2d& pixel);

/// Augmented image by inverse mapping; pixels whose preimage leaves the
/// original image are flagged invalid.
SampleResult affine_image(const ImageGrid& image, const AffineParams& params);

/// Sampling positions in the original image for every augmented pixel.
CoordMap affine_inverse_coords(const AffineParams& params, int height, int width);
/// Sampling positions in the augmented image for every original pixel.
CoordMap affine_forward_coords(const AffineParams& params, int height, int width);

double affine_depth_value(double depth, double scale);

RectificationMatrix rectification_matrix(const Intrinsics& k, const AffineParams& params);

/// R~ = Rc R Rc^-1, t~ = Rc t.
LinearPose rectify_pose(const LinearPose& pose, const RectificationMatrix& rc);

struct RestoredDepth {
  ImageGrid depth;       ///< D^ = A^-1(D~)
  ValidityMask coverage; ///< M_sa
};

/// Brings an augmented-view depth back to the original view.
RestoredDepth affine_inverse_depth(const ImageGrid& augmented_depth, const AffineParams& params);

/// Gradient w.r.t. the augmented depth of sum_p upstream(p) * D^(p).
ImageGrid affine_inverse_depth_vjp(const AffineParams& params, int height, int width,
                                   const ImageGrid& upstream);

/// Draws f_s, theta uniformly from `ranges` and a crop center whose crop
/// stays inside the rotated, resized image.
AffineParams sample_aug_params(Rng& rng, int height, int width,
                               const AugmentationRanges& ranges = {});

/// Agreement of the pixel-space and 3D paths of the augmentation over
/// random (K, params, point) cases, plus the two closed-form R_c cases.
struct AffineSuiteReport {
  int cases = 0;
  double max_pixel_rel_error = 0.0;  ///< project(Rc P) vs affine_pixel(project(P))
  double max_depth_rel_error = 0.0;  ///< (Rc P).z vs P.z / f_s
  double identity_error = 0.0;       ///< ||Rc - I||inf for identity params
  double centered_error = 0.0;       ///< ||Rc - diag(1, 1, 1/2)||inf, centered f_s = 2

  bool passed(double tolerance = 1e-9) const;
};

AffineSuiteReport run_affine_suite(std::uint64_t seed, int cases = 1000);

}  // namespace vifi
