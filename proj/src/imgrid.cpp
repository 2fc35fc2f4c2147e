#include "vifi/imgrid.hpp"

#include "vifi/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace vifi {

namespace {

// Interpolation cell along one axis: lower index, weight of the upper
// sample, and whether the coordinate had to be clamped.
struct Cell {
  int lo;
  int hi;
  double frac;
  bool clamped;
};

Cell locate(double v, int extent) {
  const double max_v = extent - 1;
  Cell c{0, 0, 0.0, false};
  if (!(v >= 0.0)) {  // also catches NaN
    v = 0.0;
    c.clamped = true;
  } else if (v > max_v) {
    v = max_v;
    c.clamped = true;
  }
  if (extent == 1) return c;
  c.lo = std::min(static_cast<int>(std::floor(v)), extent - 2);
  c.hi = c.lo + 1;
  c.frac = v - c.lo;
  return c;
}

void require_sampling_inputs(const ImageGrid& grid, const CoordMap& coords) {
  if (grid.empty() || grid.height() == 0 || grid.width() == 0) {
    throw std::invalid_argument("bilinear_sample: empty grid");
  }
  if (coords.channels() != 2) {
    throw std::invalid_argument("bilinear_sample: coords must have 2 channels");
  }
}

}  // namespace

Eigen::Index mask_count(const ValidityMask& mask) {
  Eigen::Index n = 0;
  for (Eigen::Index i = 0; i < mask.size(); ++i) n += mask.data()[i] != 0;
  return n;
}

ValidityMask mask_and(const ValidityMask& a, const ValidityMask& b) {
  require_same_shape(a, b, "mask_and");
  ValidityMask out(a.height(), a.width());
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    out.data()[i] = (a.data()[i] && b.data()[i]) ? 1 : 0;
  }
  return out;
}

ValidityMask full_mask(int height, int width, bool value) {
  return ValidityMask(height, width, 1, value ? 1 : 0);
}

CoordMap pixel_lattice(int height, int width) {
  CoordMap c(height, width, 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      c(y, x, 0) = x;
      c(y, x, 1) = y;
    }
  }
  return c;
}

ImageGrid concat_channels(const ImageGrid& a, const ImageGrid& b) {
  require_same_extent(a, b, "concat_channels");
  const int ca = a.channels();
  const int cb = b.channels();
  ImageGrid out(a.height(), a.width(), ca + cb);
  for (Eigen::Index p = 0; p < a.pixels(); ++p) {
    out.data().segment(p * (ca + cb), ca) = a.data().segment(p * ca, ca);
    out.data().segment(p * (ca + cb) + ca, cb) = b.data().segment(p * cb, cb);
  }
  return out;
}

SampleJacobian bilinear_sample_jacobian(const ImageGrid& grid, const CoordMap& coords) {
  require_sampling_inputs(grid, coords);
  const int h = coords.height();
  const int w = coords.width();
  const int nc = grid.channels();
  SampleJacobian out{ImageGrid(h, w, nc), ValidityMask(h, w), ImageGrid(h, w, nc),
                     ImageGrid(h, w, nc)};
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Cell cx = locate(coords(y, x, 0), grid.width());
      const Cell cy = locate(coords(y, x, 1), grid.height());
      out.valid(y, x) = (cx.clamped || cy.clamped) ? 0 : 1;
      const double fx = cx.frac;
      const double fy = cy.frac;
      for (int c = 0; c < nc; ++c) {
        const double g00 = grid(cy.lo, cx.lo, c);
        const double g01 = grid(cy.lo, cx.hi, c);
        const double g10 = grid(cy.hi, cx.lo, c);
        const double g11 = grid(cy.hi, cx.hi, c);
        const double top = (1.0 - fx) * g00 + fx * g01;
        const double bottom = (1.0 - fx) * g10 + fx * g11;
        out.values(y, x, c) = (1.0 - fy) * top + fy * bottom;
        out.d_dx(y, x, c) = cx.clamped ? 0.0 : (1.0 - fy) * (g01 - g00) + fy * (g11 - g10);
        out.d_dy(y, x, c) = cy.clamped ? 0.0 : bottom - top;
      }
    }
  });
  return out;
}

SampleResult bilinear_sample(const ImageGrid& grid, const CoordMap& coords) {
  auto jac = bilinear_sample_jacobian(grid, coords);
  return {std::move(jac.values), std::move(jac.valid)};
}

CoordMap bilinear_coords_vjp(const SampleJacobian& jac, const ImageGrid& upstream) {
  require_same_shape(jac.values, upstream, "bilinear_coords_vjp");
  CoordMap out(upstream.height(), upstream.width(), 2);
  const int nc = upstream.channels();
  for (Eigen::Index p = 0; p < upstream.pixels(); ++p) {
    double gx = 0.0;
    double gy = 0.0;
    for (int c = 0; c < nc; ++c) {
      const double u = upstream.data()[p * nc + c];
      gx += u * jac.d_dx.data()[p * nc + c];
      gy += u * jac.d_dy.data()[p * nc + c];
    }
    out.data()[2 * p] = gx;
    out.data()[2 * p + 1] = gy;
  }
  return out;
}

ImageGrid bilinear_grid_vjp(int height, int width, const CoordMap& coords,
                            const ImageGrid& upstream) {
  require_same_extent(coords, upstream, "bilinear_grid_vjp");
  const int nc = upstream.channels();
  ImageGrid out(height, width, nc);
  // Scatter in a fixed pixel order so the accumulation is reproducible.
  for (int y = 0; y < coords.height(); ++y) {
    for (int x = 0; x < coords.width(); ++x) {
      const Cell cx = locate(coords(y, x, 0), width);
      const Cell cy = locate(coords(y, x, 1), height);
      const double w00 = (1.0 - cy.frac) * (1.0 - cx.frac);
      const double w01 = (1.0 - cy.frac) * cx.frac;
      const double w10 = cy.frac * (1.0 - cx.frac);
      const double w11 = cy.frac * cx.frac;
      for (int c = 0; c < nc; ++c) {
        const double u = upstream(y, x, c);
        out(cy.lo, cx.lo, c) += w00 * u;
        out(cy.lo, cx.hi, c) += w01 * u;
        out(cy.hi, cx.lo, c) += w10 * u;
        out(cy.hi, cx.hi, c) += w11 * u;
      }
    }
  }
  return out;
}

std::pair<ImageGrid, ImageGrid> spatial_gradients(const ImageGrid& grid) {
  if (grid.height() < 2 || grid.width() < 2) {
    throw std::invalid_argument("spatial_gradients: grid must be at least 2x2");
  }
  const int h = grid.height();
  const int w = grid.width();
  const int nc = grid.channels();
  ImageGrid gx(h, w, nc);
  ImageGrid gy(h, w, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        if (x + 1 < w) gx(y, x, c) = grid(y, x + 1, c) - grid(y, x, c);
        if (y + 1 < h) gy(y, x, c) = grid(y + 1, x, c) - grid(y, x, c);
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

ImageGrid resample_to(const ImageGrid& grid, int height, int width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("resample_to: empty target");
  if (height == grid.height() && width == grid.width()) return grid;
  const double sx = static_cast<double>(grid.width()) / width;
  const double sy = static_cast<double>(grid.height()) / height;
  CoordMap coords(height, width, 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      coords(y, x, 0) = std::clamp((x + 0.5) * sx - 0.5, 0.0, grid.width() - 1.0);
      coords(y, x, 1) = std::clamp((y + 0.5) * sy - 0.5, 0.0, grid.height() - 1.0);
    }
  }
  return bilinear_sample(grid, coords).values;
}

ImageGrid resample_scale(const ImageGrid& grid, double factor) {
  if (!(factor > 0.0)) throw std::invalid_argument("resample_scale: factor must be positive");
  const int h = std::max(1, static_cast<int>(std::lround(grid.height() * factor)));
  const int w = std::max(1, static_cast<int>(std::lround(grid.width() * factor)));
  return resample_to(grid, h, w);
}

ImageGrid backward_warp(const ImageGrid& grid, const FlowField& flow) {
  require_same_extent(grid, flow, "backward_warp");
  if (flow.channels() != 2) throw std::invalid_argument("backward_warp: flow needs 2 channels");
  CoordMap coords = pixel_lattice(flow.height(), flow.width());
  coords.data() += flow.data();
  return bilinear_sample(grid, coords).values;
}

}  // namespace vifi
