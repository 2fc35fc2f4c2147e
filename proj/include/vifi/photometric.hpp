#pragma once

#include "vifi/camera.hpp"
#include "vifi/imgrid.hpp"

#include <span>
#include <vector>

namespace vifi {

struct PhotoConfig {
  double alpha = 0.85;   ///< SSIM weight in the photometric error
  double gamma = 0.001;  ///< smoothness weight
  int ssim_window = 3;   ///< odd box-filter side
  double c1 = 1e-4;      ///< 0.01^2
  double c2 = 9e-4;      ///< 0.03^2

  void validate() const;
};

struct LossBreakdown {
  double total = 0.0;           ///< photometric + gamma * smoothness
  double photometric = 0.0;     ///< mean min-reprojection over used pixels
  double smoothness = 0.0;      ///< unweighted edge-aware smoothness
  double masked_fraction = 0.0; ///< share of pixels excluded by auto-mask or validity
};

/// Channel-averaged SSIM with a box window and border replication.
ImageGrid ssim_map(const ImageGrid& a, const ImageGrid& b, const PhotoConfig& cfg);

/// Gradient of sum_p upstream(p) * ssim(a, b)(p) w.r.t. b.
ImageGrid ssim_map_vjp(const ImageGrid& a, const ImageGrid& b, const PhotoConfig& cfg,
                       const ImageGrid& upstream);

/// Per-pixel (alpha/2)(1 - SSIM) + (1 - alpha) mean_c |target - rec|.
ImageGrid photometric_error(const ImageGrid& target, const ImageGrid& rec,
                            const PhotoConfig& cfg);

/// Gradient of sum_p upstream(p) * photometric_error(p) w.r.t. rec.
/// The |.| subgradient at zero is zero.
ImageGrid photometric_error_vjp(const ImageGrid& target, const ImageGrid& rec,
                                const PhotoConfig& cfg, const ImageGrid& upstream);

struct Reconstruction {
  ImageGrid image;
  ValidityMask valid;
};

struct MinReprojection {
  ImageGrid error;           ///< min over valid reconstructions (0 where none valid)
  ValidityMask valid;        ///< 0 iff invalid in every reconstruction
  ImageGridT<int> source;    ///< achieving index, lowest on ties, -1 if none
};

MinReprojection min_reprojection(const ImageGrid& target, std::span<const Reconstruction> recs,
                                 const PhotoConfig& cfg);

/// mu(p) = 1 iff the best reconstruction beats every unwarped source
/// strictly.
ValidityMask auto_mask(const ImageGrid& target, std::span<const ImageGrid> sources,
                       std::span<const Reconstruction> recs, const PhotoConfig& cfg);

/// Edge-aware smoothness of mean-normalised inverse depth.
double smoothness_loss(const ImageGrid& depth, const ImageGrid& image);
ImageGrid smoothness_gradient(const ImageGrid& depth, const ImageGrid& image);

/// A source image sampled at reprojected target pixels, with everything
/// needed to differentiate the samples w.r.t. depth and pose.
struct SynthesizedView {
  Reconstruction rec;
  Reprojection reprojection;
  SampleJacobian sampling;
};

SynthesizedView synthesize_view(const ImageGrid& source, const ImageGrid& depth,
                                const LinearPose& pose, const Intrinsics& k);

struct SelfSupervisedResult {
  LossBreakdown loss;
  ImageGrid d_depth;                        ///< empty unless gradients requested
  std::vector<LinearPoseGradient> d_poses;  ///< one per source
};

/// mu-masked min-reprojection photometric loss plus gamma * smoothness.
/// `target_valid` optionally excludes target pixels (augmented views).
SelfSupervisedResult self_supervised_loss(const ImageGrid& depth,
                                          std::span<const LinearPose> poses,
                                          const ImageGrid& target,
                                          std::span<const ImageGrid> sources,
                                          const Intrinsics& k, const PhotoConfig& cfg,
                                          const ValidityMask* target_valid = nullptr,
                                          bool with_gradient = false);

}  // namespace vifi
