#pragma once

#include "vifi/imgrid.hpp"

#include <Eigen/Core>

#include <utility>
#include <vector>

namespace vifi {

struct FusionConfig {
  int levels = 4;    ///< pyramid levels N; level k has 2^-(k-1) resolution
  int octaves = 10;  ///< S of the flow encoding
  /// Optional per-level channel mix (C x 2C'); empty -> selector of the
  /// current-frame feature block.
  std::vector<Eigen::MatrixXd> channel_mix;
};

/// Channel count added by encoding a 2D flow: 2 (2S + 1).
constexpr int encoded_flow_channels(int octaves) { return 2 * (2 * octaves + 1); }

/// [u, sin(2^0 pi u), cos(2^0 pi u), ..., sin(2^(S-1) pi u), cos(2^(S-1) pi u)].
Eigen::VectorXd fourier_encode(double u, int octaves);

/// Encodes both flow components: channels are g(dx) followed by g(dy).
ImageGrid encode_flow(const FlowField& flow, int octaves);

/// m * from_prev + (1 - m) * from_next per pixel.
ImageGrid vfi_merge(const ImageGrid& from_prev, const ImageGrid& from_next, const MergeMask& m);

std::pair<int, int> pyramid_shape(int height, int width, int level);

/// Flow resampled to `level` with displacements rescaled to that level's
/// pixel units.
FlowField pyramid_flow(const FlowField& flow, int level, int max_level);
MergeMask pyramid_mask(const MergeMask& mask, int level, int max_level);

struct AlignedFeatures {
  ImageGrid from_prev;  ///< concat(warp(phi_prev, F_prev), g(F_prev))
  ImageGrid from_next;  ///< concat(warp(phi_next, F_next), g(F_next))
  ImageGrid current;    ///< concat(phi_t, g(0))
};

/// Motion-aware alignment of neighbor features to the target position.
AlignedFeatures mafa_align(const ImageGrid& phi_prev, const ImageGrid& phi_next,
                           const ImageGrid& phi_t, const FlowField& flow_prev,
                           const FlowField& flow_next, int octaves);

/// chi = M * prev + (1 - M) * next; out = mix * concat(current, chi).
ImageGrid oaff_fuse(const ImageGrid& aligned_prev, const ImageGrid& aligned_next,
                    const ImageGrid& aligned_current, const MergeMask& m,
                    const Eigen::MatrixXd& mix);

/// Mix that returns the first `out_channels` channels of the current block.
Eigen::MatrixXd selector_mix(int out_channels, int aligned_channels);

/// Intermediate frame from two neighbors and externally supplied flows.
ImageGrid synthesize_intermediate(const ImageGrid& prev, const ImageGrid& next,
                                  const FlowField& to_prev, const FlowField& to_next,
                                  const MergeMask& m);

}  // namespace vifi
