#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>

namespace vifi {

/// Dense H x W x C grid of samples stored row-major with interleaved
/// channels. Pixel centers sit at integer coordinates, origin top-left,
/// x to the right and y downward.
template <typename Scalar>
class ImageGridT {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  ImageGridT() = default;

  ImageGridT(int height, int width, int channels = 1, Scalar fill = Scalar(0))
      : height_(height), width_(width), channels_(channels) {
    if (height < 0 || width < 0 || channels <= 0) {
      throw std::invalid_argument("ImageGrid: invalid shape");
    }
    data_ = Storage::Constant(Eigen::Index(height) * width * channels, fill);
  }

  ImageGridT(int height, int width, int channels, Storage data)
      : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    if (data_.size() != Eigen::Index(height) * width * channels) {
      throw std::invalid_argument("ImageGrid: data length does not match shape");
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  Eigen::Index pixels() const noexcept { return Eigen::Index(height_) * width_; }
  Eigen::Index size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.size() == 0; }

  Eigen::Index index(int y, int x, int c = 0) const noexcept {
    return (Eigen::Index(y) * width_ + x) * channels_ + c;
  }

  Scalar& operator()(int y, int x, int c = 0) noexcept { return data_[index(y, x, c)]; }
  const Scalar& operator()(int y, int x, int c = 0) const noexcept {
    return data_[index(y, x, c)];
  }

  Storage& data() noexcept { return data_; }
  const Storage& data() const noexcept { return data_; }

  template <typename Other>
  bool same_extent(const ImageGridT<Other>& o) const noexcept {
    return height_ == o.height() && width_ == o.width();
  }
  template <typename Other>
  bool same_shape(const ImageGridT<Other>& o) const noexcept {
    return same_extent(o) && channels_ == o.channels();
  }

  template <typename Other>
  ImageGridT<Other> cast() const {
    return ImageGridT<Other>(height_, width_, channels_, data_.template cast<Other>());
  }

  ImageGridT channel(int c) const {
    ImageGridT out(height_, width_, 1);
    for (Eigen::Index p = 0; p < pixels(); ++p) out.data_[p] = data_[p * channels_ + c];
    return out;
  }

  bool all_finite() const { return data_.allFinite(); }

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 1;
  Storage data_;
};

using ImageGrid = ImageGridT<double>;
/// Per-pixel {0,1} validity flags.
using ValidityMask = ImageGridT<std::uint8_t>;
/// Two channels (x, y) of sampling positions in pixel units.
using CoordMap = ImageGrid;
/// Two channels (dx, dy) of backward-warping displacements in pixels.
using FlowField = ImageGrid;
/// One channel blend weight in [0, 1].
using MergeMask = ImageGrid;

template <typename A, typename B>
void require_same_extent(const ImageGridT<A>& a, const ImageGridT<B>& b, const char* what) {
  if (!a.same_extent(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

template <typename A, typename B>
void require_same_shape(const ImageGridT<A>& a, const ImageGridT<B>& b, const char* what) {
  if (!a.same_shape(b)) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

Eigen::Index mask_count(const ValidityMask& mask);
ValidityMask mask_and(const ValidityMask& a, const ValidityMask& b);
ValidityMask full_mask(int height, int width, bool value = true);

/// Integer lattice: coords(y, x) = (x, y).
CoordMap pixel_lattice(int height, int width);

/// Concatenates channels of same-extent grids.
ImageGrid concat_channels(const ImageGrid& a, const ImageGrid& b);

struct SampleResult {
  ImageGrid values;
  ValidityMask valid;
};

/// Bilinear samples plus their partial derivatives w.r.t. the sampling
/// coordinates. d_dx / d_dy have the channel count of the sampled grid and
/// are zero along an axis whose coordinate was clamped.
struct SampleJacobian {
  ImageGrid values;
  ValidityMask valid;
  ImageGrid d_dx;
  ImageGrid d_dy;
};

/// Samples `grid` at `coords`. Out-of-range coordinates are clamped to the
/// border and flagged invalid.
SampleResult bilinear_sample(const ImageGrid& grid, const CoordMap& coords);
SampleJacobian bilinear_sample_jacobian(const ImageGrid& grid, const CoordMap& coords);

/// Chains an upstream gradient on sampled values into a gradient on coords.
CoordMap bilinear_coords_vjp(const SampleJacobian& jac, const ImageGrid& upstream);

/// Adjoint of bilinear_sample w.r.t. the sampled grid's values: scatters the
/// upstream gradient back through the interpolation weights.
ImageGrid bilinear_grid_vjp(int height, int width, const CoordMap& coords,
                            const ImageGrid& upstream);

/// Forward differences; the last column of d/dx and last row of d/dy are zero.
std::pair<ImageGrid, ImageGrid> spatial_gradients(const ImageGrid& grid);

/// Inverse-mapping bilinear resample with half-pixel alignment.
ImageGrid resample_to(const ImageGrid& grid, int height, int width);
ImageGrid resample_scale(const ImageGrid& grid, double factor);

/// out(p) = grid sampled at p + flow(p).
ImageGrid backward_warp(const ImageGrid& grid, const FlowField& flow);

}  // namespace vifi
