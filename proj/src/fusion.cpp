#include "vifi/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vifi {

Eigen::VectorXd fourier_encode(double u, int octaves) {
  if (octaves <= 0) throw std::invalid_argument("fourier_encode: octaves must be positive");
  if (!std::isfinite(u)) throw std::invalid_argument("fourier_encode: input must be finite");
  Eigen::VectorXd g(2 * octaves + 1);
  g[0] = u;
  for (int k = 0; k < octaves; ++k) {
    // Reduce 2^k u modulo 2 first (both steps are exact) so the phase
    // stays accurate at high octaves.
    const double phase = M_PI * std::fmod(std::ldexp(u, k), 2.0);
    g[1 + 2 * k] = std::sin(phase);
    g[2 + 2 * k] = std::cos(phase);
  }
  return g;
}

ImageGrid encode_flow(const FlowField& flow, int octaves) {
  if (flow.channels() != 2) throw std::invalid_argument("encode_flow: flow needs 2 channels");
  const int per = 2 * octaves + 1;
  ImageGrid out(flow.height(), flow.width(), 2 * per);
  for (Eigen::Index p = 0; p < flow.pixels(); ++p) {
    out.data().segment(p * 2 * per, per) = fourier_encode(flow.data()[2 * p], octaves);
    out.data().segment(p * 2 * per + per, per) = fourier_encode(flow.data()[2 * p + 1], octaves);
  }
  return out;
}

ImageGrid vfi_merge(const ImageGrid& from_prev, const ImageGrid& from_next, const MergeMask& m) {
  require_same_shape(from_prev, from_next, "vfi_merge");
  require_same_extent(from_prev, m, "vfi_merge");
  if (m.channels() != 1) throw std::invalid_argument("vfi_merge: mask needs 1 channel");
  const int nc = from_prev.channels();
  ImageGrid out(from_prev.height(), from_prev.width(), nc);
  for (Eigen::Index p = 0; p < out.pixels(); ++p) {
    const double w = m.data()[p];
    for (int c = 0; c < nc; ++c) {
      const Eigen::Index i = p * nc + c;
      out.data()[i] = w * from_prev.data()[i] + (1.0 - w) * from_next.data()[i];
    }
  }
  return out;
}

std::pair<int, int> pyramid_shape(int height, int width, int level) {
  const double r = std::ldexp(1.0, -(level - 1));
  return {std::max(1, static_cast<int>(std::lround(height * r))),
          std::max(1, static_cast<int>(std::lround(width * r)))};
}

namespace {

void require_level(int level, int max_level) {
  if (level < 1 || level > max_level) throw std::invalid_argument("pyramid: level out of range");
}

}  // namespace

FlowField pyramid_flow(const FlowField& flow, int level, int max_level) {
  require_level(level, max_level);
  if (flow.channels() != 2) throw std::invalid_argument("pyramid_flow: flow needs 2 channels");
  const auto [h, w] = pyramid_shape(flow.height(), flow.width(), level);
  FlowField out = resample_to(flow, h, w);
  const double rx = static_cast<double>(w) / flow.width();
  const double ry = static_cast<double>(h) / flow.height();
  for (Eigen::Index p = 0; p < out.pixels(); ++p) {
    out.data()[2 * p] *= rx;
    out.data()[2 * p + 1] *= ry;
  }
  return out;
}

MergeMask pyramid_mask(const MergeMask& mask, int level, int max_level) {
  require_level(level, max_level);
  const auto [h, w] = pyramid_shape(mask.height(), mask.width(), level);
  MergeMask out = resample_to(mask, h, w);
  out.data() = out.data().cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

AlignedFeatures mafa_align(const ImageGrid& phi_prev, const ImageGrid& phi_next,
                           const ImageGrid& phi_t, const FlowField& flow_prev,
                           const FlowField& flow_next, int octaves) {
  require_same_shape(phi_prev, phi_t, "mafa_align");
  require_same_shape(phi_next, phi_t, "mafa_align");
  require_same_extent(flow_prev, phi_t, "mafa_align");
  require_same_extent(flow_next, phi_t, "mafa_align");
  const FlowField zero(phi_t.height(), phi_t.width(), 2);
  return {concat_channels(backward_warp(phi_prev, flow_prev), encode_flow(flow_prev, octaves)),
          concat_channels(backward_warp(phi_next, flow_next), encode_flow(flow_next, octaves)),
          concat_channels(phi_t, encode_flow(zero, octaves))};
}

ImageGrid oaff_fuse(const ImageGrid& aligned_prev, const ImageGrid& aligned_next,
                    const ImageGrid& aligned_current, const MergeMask& m,
                    const Eigen::MatrixXd& mix) {
  require_same_shape(aligned_prev, aligned_current, "oaff_fuse");
  const ImageGrid chi = vfi_merge(aligned_prev, aligned_next, m);
  const int cp = aligned_current.channels();
  if (mix.cols() != 2 * cp || mix.rows() <= 0) {
    throw std::invalid_argument("oaff_fuse: mix must have 2C' columns");
  }
  const int out_c = static_cast<int>(mix.rows());
  ImageGrid out(chi.height(), chi.width(), out_c);
  Eigen::VectorXd stacked(2 * cp);
  for (Eigen::Index p = 0; p < chi.pixels(); ++p) {
    stacked.head(cp) = aligned_current.data().segment(p * cp, cp);
    stacked.tail(cp) = chi.data().segment(p * cp, cp);
    out.data().segment(p * out_c, out_c).noalias() = mix * stacked;
  }
  return out;
}

Eigen::MatrixXd selector_mix(int out_channels, int aligned_channels) {
  if (out_channels > aligned_channels) throw std::invalid_argument("selector_mix: too many outputs");
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(out_channels, 2 * aligned_channels);
  mix.leftCols(out_channels).setIdentity();
  return mix;
}

ImageGrid synthesize_intermediate(const ImageGrid& prev, const ImageGrid& next,
                                  const FlowField& to_prev, const FlowField& to_next,
                                  const MergeMask& m) {
  require_same_shape(prev, next, "synthesize_intermediate");
  return vfi_merge(backward_warp(prev, to_prev), backward_warp(next, to_next), m);
}

}  // namespace vifi
