#pragma once

#include "vifi/imgrid.hpp"

namespace vifi {

struct DepthMetrics {
  double abs_rel = 0.0;
  double sq_rel = 0.0;
  double rmse = 0.0;
  double rmse_log = 0.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;
};

struct EvalConfig {
  double min_depth = 0.1;
  double cap = 80.0;
};

/// Mean of the two middle values for even counts.
double masked_median(const ImageGrid& grid, const ValidityMask& mask);

/// pred * median(gt) / median(pred) over `mask`.
ImageGrid median_scale(const ImageGrid& pred, const ImageGrid& gt, const ValidityMask& mask);

/// Both depths are clamped to [min_depth, cap] before evaluation. Pixels
/// outside `mask` (when given) are ignored.
DepthMetrics depth_metrics(const ImageGrid& pred, const ImageGrid& gt,
                           const EvalConfig& cfg = {}, const ValidityMask* mask = nullptr);

/// Per-pixel |pred - gt| / gt after clamping.
ImageGrid abs_rel_map(const ImageGrid& pred, const ImageGrid& gt, const EvalConfig& cfg = {});

}  // namespace vifi
