#include "vifi/metrics.hpp"

#include "vifi/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace vifi {

namespace {

void require_depth_pair(const ImageGrid& pred, const ImageGrid& gt, const char* what) {
  require_same_shape(pred, gt, what);
  if (pred.channels() != 1) throw std::invalid_argument(std::string(what) + ": depths need 1 channel");
}

void require_eval_config(const EvalConfig& cfg) {
  if (!(cfg.min_depth > 0.0) || !(cfg.cap > cfg.min_depth)) {
    throw std::invalid_argument("depth_metrics: need 0 < min_depth < cap");
  }
}

}  // namespace

double masked_median(const ImageGrid& grid, const ValidityMask& mask) {
  require_same_extent(grid, mask, "masked_median");
  std::vector<double> v;
  for (Eigen::Index p = 0; p < grid.pixels(); ++p) {
    if (mask.data()[p]) v.push_back(grid.data()[p * grid.channels()]);
  }
  if (v.empty()) throw std::invalid_argument("masked_median: empty mask");
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + mid);
  return 0.5 * (lower + upper);
}

ImageGrid median_scale(const ImageGrid& pred, const ImageGrid& gt, const ValidityMask& mask) {
  require_depth_pair(pred, gt, "median_scale");
  const double mp = masked_median(pred, mask);
  const double mg = masked_median(gt, mask);
  if (!(mp > 0.0) || !(mg > 0.0)) throw std::invalid_argument("median_scale: median must be positive");
  ImageGrid out = pred;
  out.data() *= mg / mp;
  return out;
}

DepthMetrics depth_metrics(const ImageGrid& pred, const ImageGrid& gt, const EvalConfig& cfg,
                           const ValidityMask* mask) {
  require_depth_pair(pred, gt, "depth_metrics");
  require_eval_config(cfg);
  if (mask) require_same_extent(gt, *mask, "depth_metrics");
  std::vector<double> abs_rel, sq_rel, sq, sq_log, d1, d2, d3;
  for (Eigen::Index p = 0; p < gt.pixels(); ++p) {
    if (mask && !mask->data()[p]) continue;
    if (!(gt.data()[p] > 0.0)) throw std::invalid_argument("depth_metrics: ground truth must be positive");
    const double g = std::clamp(gt.data()[p], cfg.min_depth, cfg.cap);
    const double d = std::clamp(pred.data()[p], cfg.min_depth, cfg.cap);
    const double diff = d - g;
    abs_rel.push_back(std::abs(diff) / g);
    sq_rel.push_back(diff * diff / g);
    sq.push_back(diff * diff);
    const double l = std::log(d) - std::log(g);
    sq_log.push_back(l * l);
    const double ratio = std::max(d / g, g / d);
    d1.push_back(ratio < 1.25 ? 1.0 : 0.0);
    d2.push_back(ratio < 1.25 * 1.25 ? 1.0 : 0.0);
    d3.push_back(ratio < 1.25 * 1.25 * 1.25 ? 1.0 : 0.0);
  }
  if (abs_rel.empty()) throw std::invalid_argument("depth_metrics: no valid pixels");
  const double n = static_cast<double>(abs_rel.size());
  DepthMetrics m;
  m.abs_rel = pairwise_sum(abs_rel) / n;
  m.sq_rel = pairwise_sum(sq_rel) / n;
  m.rmse = std::sqrt(pairwise_sum(sq) / n);
  m.rmse_log = std::sqrt(pairwise_sum(sq_log) / n);
  m.delta1 = pairwise_sum(d1) / n;
  m.delta2 = pairwise_sum(d2) / n;
  m.delta3 = pairwise_sum(d3) / n;
  return m;
}

ImageGrid abs_rel_map(const ImageGrid& pred, const ImageGrid& gt, const EvalConfig& cfg) {
  require_depth_pair(pred, gt, "abs_rel_map");
  require_eval_config(cfg);
  ImageGrid out(gt.height(), gt.width(), 1);
  for (Eigen::Index p = 0; p < gt.pixels(); ++p) {
    const double g = std::clamp(gt.data()[p], cfg.min_depth, cfg.cap);
    const double d = std::clamp(pred.data()[p], cfg.min_depth, cfg.cap);
    out.data()[p] = std::abs(d - g) / g;
  }
  return out;
}

}  // namespace vifi
