#pragma once

#include "vifi/affine.hpp"
#include "vifi/camera.hpp"
#include "vifi/consistency.hpp"
#include "vifi/imgrid.hpp"
#include "vifi/metrics.hpp"
#include "vifi/photometric.hpp"
#include "vifi/scene.hpp"

#include <Eigen/Core>

#include <array>
#include <utility>
#include <vector>

namespace vifi {

/// Depth through a bounded inverse: D = 1 / (a sigma + b). The defaults
/// map sigma in [0, 1] onto [0.1, 100] m.
struct DepthParam {
  ImageGrid sigma;
  double a = 9.99;
  double b = 0.01;
};

/// (a, b) such that sigma = 0 decodes to max_depth and sigma = 1 to min_depth.
std::pair<double, double> depth_coefficients(double min_depth, double max_depth);

ImageGrid decode_depth(const DepthParam& p);
/// dD/dsigma = -a / (a sigma + b)^2.
ImageGrid decode_depth_derivative(const DepthParam& p);
/// Inverse of decode_depth; rejects depths outside (1/(a+b), 1/b).
DepthParam encode_depth(const ImageGrid& depth, double a = 9.99, double b = 0.01);

struct LossToggles {
  bool photometric = true;
  bool smoothness = true;
  bool multi_frame = false;   ///< L_ss on a second depth grid plus SVDC
  bool augmentation = false;  ///< L_ss on the augmented view plus SADC
  bool svdc = true;
  bool sadc = true;
};

struct ObjectiveConfig {
  PhotoConfig photo;
  ConsistencyConfig consistency;
  LossToggles toggles;
  bool optimize_pose = false;

  void validate() const;
};

/// Everything the objective needs that does not change while optimizing.
struct Problem {
  int height = 0;
  int width = 0;
  Intrinsics k;
  std::array<ImageGrid, 3> targets;                ///< images at positions 1, 2, 3
  std::array<ImageGrid, 3> target_depths;          ///< ground truth, for evaluation only
  std::array<ImageGrid, 2> sources;                ///< images at positions 0, 4
  std::array<std::array<PoseSE3, 2>, 3> gt_poses;  ///< T_{target -> source}
  std::array<AffineParams, 3> augment;
  std::array<ImageGrid, 3> aug_targets;
  std::array<ValidityMask, 3> aug_target_valid;
  std::array<std::array<ImageGrid, 2>, 3> aug_sources;
  std::array<RectificationMatrix, 3> rectification;
};

/// Builds the problem for a bundle; augmentation parameters are drawn
/// from `seed`.
Problem make_problem(const Bundle& bundle, std::uint64_t seed,
                     const AugmentationRanges& ranges = {});
/// Same with explicit augmentation parameters.
Problem make_problem(const Bundle& bundle, const std::array<AffineParams, 3>& augment);

struct TargetParams {
  DepthParam single;
  DepthParam multi;
  DepthParam augmented;
  std::array<PoseParams, 2> poses;
};

struct ObjectiveParams {
  std::array<TargetParams, 3> targets;
};

/// Axis-angle parameters of a rigid pose.
PoseParams params_from_pose(const PoseSE3& pose);

/// Constant depths for every grid (augmented grids start at
/// single_depth / f_s) and ground-truth relative poses.
ObjectiveParams constant_init(const Problem& problem, double single_depth, double multi_depth,
                              double a = 9.99, double b = 0.01);
/// Ground-truth depths for every grid and ground-truth poses.
ObjectiveParams ground_truth_init(const Problem& problem, double a = 9.99, double b = 0.01);

struct ObjectiveValue {
  double total = 0.0;
  double pe = 0.0;  ///< summed photometric terms
  double sm = 0.0;  ///< summed unweighted smoothness terms
  double sv = 0.0;
  double sa = 0.0;
  double sa_m = 0.0;
  std::array<TripletLosses, 3> per_target;
};

struct TargetGradient {
  ImageGrid single;
  ImageGrid multi;
  ImageGrid augmented;
  std::array<Vector6d, 2> poses{Vector6d::Zero(), Vector6d::Zero()};
};

struct ObjectiveResult {
  ObjectiveValue value;
  std::array<TargetGradient, 3> gradient;  ///< w.r.t. sigma grids and pose parameters
};

ObjectiveResult objective_and_gradient(const ObjectiveParams& params, const Problem& problem,
                                       const ObjectiveConfig& cfg, bool with_gradient = true);

/// Flattening of the parameters the configuration makes active: single
/// grids, then multi grids, then augmented grids, then pose parameters.
Eigen::VectorXd pack_params(const ObjectiveParams& params, const ObjectiveConfig& cfg);
void unpack_params(const Eigen::VectorXd& v, const ObjectiveConfig& cfg, ObjectiveParams& params);
Eigen::VectorXd pack_gradient(const ObjectiveResult& result, const ObjectiveConfig& cfg);

struct OptimConfig {
  int max_iters = 2000;
  double step_size = 0.05;
  double momentum = 0.9;
  double pose_step_size = 1e-4;
  double sigma_epsilon = 1e-6;  ///< sigma is kept in [eps, 1 - eps]
  double divergence_factor = 10.0;
  int divergence_window = 50;
  int trace_every = 0;  ///< record center-target metrics every n iterations (0 = never)
  ObjectiveConfig objective;

  void validate() const;
};

enum class OptimStatus { kCompleted, kDiverged };

struct MetricsSample {
  int iter = 0;
  DepthMetrics metrics;
};

struct OptimResult {
  OptimStatus status = OptimStatus::kCompleted;
  ObjectiveParams params;
  std::vector<ObjectiveValue> curve;  ///< entry i is the value before update i
  std::vector<MetricsSample> trace;
};

OptimResult optimize(const Problem& problem, ObjectiveParams init, const OptimConfig& cfg);

/// Median-scaled metrics of the center target's single-frame depth.
DepthMetrics center_metrics(const Problem& problem, const ObjectiveParams& params,
                            const EvalConfig& eval = {});

}  // namespace vifi
