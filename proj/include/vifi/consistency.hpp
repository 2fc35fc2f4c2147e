#pragma once

#include "vifi/imgrid.hpp"

#include <span>

namespace vifi {

struct ConsistencyConfig {
  double beta = 0.5;    ///< squared-mean weight of the scale-invariant error
  double lambda = 0.2;  ///< weight of the triplet consistency loss

  void validate() const;
};

/// Value and gradients of a two-depth consistency term.
struct PairGradient {
  double value = 0.0;
  ImageGrid d_first;
  ImageGrid d_second;
};

/// (1/V) sum e_i^2 - (beta/V^2) (sum e_i)^2 with e = ln D1 - ln D2 over the
/// V pixels where `mask` is set.
double scale_invariant_error(const ImageGrid& d1, const ImageGrid& d2, const ValidityMask& mask,
                             double beta);
PairGradient scale_invariant_error_gradient(const ImageGrid& d1, const ImageGrid& d2,
                                            const ValidityMask& mask, double beta);

/// Standard-view consistency between multi-frame and single-frame depth.
double svdc(const ImageGrid& multi, const ImageGrid& single, double beta = 0.5);
PairGradient svdc_gradient(const ImageGrid& multi, const ImageGrid& single, double beta = 0.5);

/// Scale-aware consistency: SI(D, f_s * D^) on the coverage mask.
/// d_second of the gradient is w.r.t. D^ (the restored depth).
double sadc(const ImageGrid& depth, const ImageGrid& restored, double scale,
            const ValidityMask& coverage, double beta = 0.5);
PairGradient sadc_gradient(const ImageGrid& depth, const ImageGrid& restored, double scale,
                           const ValidityMask& coverage, double beta = 0.5);

struct TripletLosses {
  double l_sv = 0.0;
  double l_sa = 0.0;
  double l_sa_m = 0.0;
  double l_tc = 0.0;  ///< l_sv + l_sa + l_sa_m
  double l_ss = 0.0;
  double l_ss_m = 0.0;
  double l_ss_tilde = 0.0;
  double total = 0.0;  ///< l_ss + l_ss_m + l_ss_tilde + lambda * l_tc

  /// Recomputes l_tc and total from the components.
  void finalize(double lambda);
};

struct TripletGradient {
  TripletLosses losses;
  ImageGrid d_depth;     ///< w.r.t. single-frame D
  ImageGrid d_multi;     ///< w.r.t. multi-frame D^m
  ImageGrid d_restored;  ///< w.r.t. restored D^
};

TripletLosses triplet_consistency(const ImageGrid& depth, const ImageGrid& multi,
                                  const ImageGrid& restored, double scale,
                                  const ValidityMask& coverage, const ConsistencyConfig& cfg);

/// Gradients of l_tc (not lambda-weighted).
TripletGradient triplet_consistency_gradient(const ImageGrid& depth, const ImageGrid& multi,
                                             const ImageGrid& restored, double scale,
                                             const ValidityMask& coverage,
                                             const ConsistencyConfig& cfg);

/// Sum over target positions of l_ss + l_ss_m + l_ss_tilde + lambda * l_tc.
double total_objective(std::span<const TripletLosses> positions, const ConsistencyConfig& cfg);

}  // namespace vifi
