#include "vifi/consistency.hpp"

#include "vifi/reduce.hpp"

#include <cmath>
#include <vector>

namespace vifi {

void ConsistencyConfig::validate() const {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("ConsistencyConfig: beta must lie in [0,1]");
  if (!(lambda >= 0.0)) throw std::invalid_argument("ConsistencyConfig: lambda must be nonnegative");
}

namespace {

struct LogErrors {
  std::vector<Eigen::Index> pixels;
  std::vector<double> e;
  std::vector<double> e2;
};

LogErrors log_errors(const ImageGrid& d1, const ImageGrid& d2, const ValidityMask& mask) {
  require_same_shape(d1, d2, "scale_invariant_error");
  require_same_extent(d1, mask, "scale_invariant_error");
  if (d1.channels() != 1) throw std::invalid_argument("scale_invariant_error: depths must have 1 channel");
  LogErrors out;
  for (Eigen::Index p = 0; p < d1.pixels(); ++p) {
    if (!mask.data()[p]) continue;
    const double a = d1.data()[p];
    const double b = d2.data()[p];
    if (!(a > 0.0) || !(b > 0.0)) {
      throw std::invalid_argument("scale_invariant_error: non-positive depth on a valid pixel");
    }
    const double e = std::log(a) - std::log(b);
    out.pixels.push_back(p);
    out.e.push_back(e);
    out.e2.push_back(e * e);
  }
  if (out.e.empty()) throw std::invalid_argument("scale_invariant_error: no valid pixels");
  return out;
}

ValidityMask all_valid(const ImageGrid& g) { return full_mask(g.height(), g.width()); }

ImageGrid scaled(const ImageGrid& g, double s) {
  ImageGrid out = g;
  out.data() *= s;
  return out;
}

}  // namespace

double scale_invariant_error(const ImageGrid& d1, const ImageGrid& d2, const ValidityMask& mask,
                             double beta) {
  const LogErrors le = log_errors(d1, d2, mask);
  const double v = static_cast<double>(le.e.size());
  const double sum = pairwise_sum(le.e);
  return pairwise_sum(le.e2) / v - beta * sum * sum / (v * v);
}

PairGradient scale_invariant_error_gradient(const ImageGrid& d1, const ImageGrid& d2,
                                            const ValidityMask& mask, double beta) {
  const LogErrors le = log_errors(d1, d2, mask);
  const double v = static_cast<double>(le.e.size());
  const double sum = pairwise_sum(le.e);
  PairGradient g;
  g.value = pairwise_sum(le.e2) / v - beta * sum * sum / (v * v);
  g.d_first = ImageGrid(d1.height(), d1.width(), 1);
  g.d_second = ImageGrid(d1.height(), d1.width(), 1);
  for (std::size_t i = 0; i < le.e.size(); ++i) {
    const Eigen::Index p = le.pixels[i];
    const double d_e = 2.0 * le.e[i] / v - 2.0 * beta * sum / (v * v);
    g.d_first.data()[p] = d_e / d1.data()[p];
    g.d_second.data()[p] = -d_e / d2.data()[p];
  }
  return g;
}

double svdc(const ImageGrid& multi, const ImageGrid& single, double beta) {
  return scale_invariant_error(multi, single, all_valid(multi), beta);
}

PairGradient svdc_gradient(const ImageGrid& multi, const ImageGrid& single, double beta) {
  return scale_invariant_error_gradient(multi, single, all_valid(multi), beta);
}

double sadc(const ImageGrid& depth, const ImageGrid& restored, double scale,
            const ValidityMask& coverage, double beta) {
  return scale_invariant_error(depth, scaled(restored, scale), coverage, beta);
}

PairGradient sadc_gradient(const ImageGrid& depth, const ImageGrid& restored, double scale,
                           const ValidityMask& coverage, double beta) {
  PairGradient g = scale_invariant_error_gradient(depth, scaled(restored, scale), coverage, beta);
  g.d_second.data() *= scale;
  return g;
}

void TripletLosses::finalize(double lambda) {
  l_tc = l_sv + l_sa + l_sa_m;
  total = l_ss + l_ss_m + l_ss_tilde + lambda * l_tc;
}

TripletLosses triplet_consistency(const ImageGrid& depth, const ImageGrid& multi,
                                  const ImageGrid& restored, double scale,
                                  const ValidityMask& coverage, const ConsistencyConfig& cfg) {
  cfg.validate();
  TripletLosses t;
  t.l_sv = svdc(multi, depth, cfg.beta);
  t.l_sa = sadc(depth, restored, scale, coverage, cfg.beta);
  t.l_sa_m = sadc(multi, restored, scale, coverage, cfg.beta);
  t.finalize(cfg.lambda);
  return t;
}

TripletGradient triplet_consistency_gradient(const ImageGrid& depth, const ImageGrid& multi,
                                             const ImageGrid& restored, double scale,
                                             const ValidityMask& coverage,
                                             const ConsistencyConfig& cfg) {
  cfg.validate();
  const PairGradient sv = svdc_gradient(multi, depth, cfg.beta);
  const PairGradient sa = sadc_gradient(depth, restored, scale, coverage, cfg.beta);
  const PairGradient sa_m = sadc_gradient(multi, restored, scale, coverage, cfg.beta);
  TripletGradient g;
  g.losses.l_sv = sv.value;
  g.losses.l_sa = sa.value;
  g.losses.l_sa_m = sa_m.value;
  g.losses.finalize(cfg.lambda);
  g.d_depth = sv.d_second;
  g.d_depth.data() += sa.d_first.data();
  g.d_multi = sv.d_first;
  g.d_multi.data() += sa_m.d_first.data();
  g.d_restored = sa.d_second;
  g.d_restored.data() += sa_m.d_second.data();
  return g;
}

double total_objective(std::span<const TripletLosses> positions, const ConsistencyConfig& cfg) {
  std::vector<double> per_position;
  per_position.reserve(positions.size());
  for (const auto& t : positions) {
    per_position.push_back(t.l_ss + t.l_ss_m + t.l_ss_tilde + cfg.lambda * t.l_tc);
  }
  return pairwise_sum(per_position);
}

}  // namespace vifi
