#include "vifi/photometric.hpp"

#include "vifi/parallel.hpp"
#include "vifi/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vifi {

void PhotoConfig::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("PhotoConfig: alpha must lie in [0,1]");
  if (!(gamma >= 0.0)) throw std::invalid_argument("PhotoConfig: gamma must be nonnegative");
  if (ssim_window <= 0 || ssim_window % 2 == 0) {
    throw std::invalid_argument("PhotoConfig: ssim_window must be odd and positive");
  }
  if (!(c1 > 0.0) || !(c2 > 0.0)) throw std::invalid_argument("PhotoConfig: c1, c2 must be positive");
}

namespace {

// Window statistics of one channel pair at one pixel.
struct Moments {
  double mx, my, exx, eyy, exy;
};

template <typename Fn>
void for_each_window_tap(int y, int x, int h, int w, int radius, Fn&& fn) {
  for (int dy = -radius; dy <= radius; ++dy) {
    const int yy = std::clamp(y + dy, 0, h - 1);
    for (int dx = -radius; dx <= radius; ++dx) {
      fn(yy, std::clamp(x + dx, 0, w - 1));
    }
  }
}

Moments window_moments(const ImageGrid& a, const ImageGrid& b, int y, int x, int c,
                       int radius) {
  Moments m{0, 0, 0, 0, 0};
  for_each_window_tap(y, x, a.height(), a.width(), radius, [&](int yy, int xx) {
    const double va = a(yy, xx, c);
    const double vb = b(yy, xx, c);
    m.mx += va;
    m.my += vb;
    m.exx += va * va;
    m.eyy += vb * vb;
    m.exy += va * vb;
  });
  const double n = (2 * radius + 1) * (2 * radius + 1);
  m.mx /= n;
  m.my /= n;
  m.exx /= n;
  m.eyy /= n;
  m.exy /= n;
  return m;
}

// Terms of SSIM = (lum_num * cs_num) / (lum_den * cs_den).
struct SsimTerms {
  double lum_num, cs_num, lum_den, cs_den;
};

SsimTerms ssim_terms(const Moments& m, const PhotoConfig& cfg) {
  const double sxx = m.exx - m.mx * m.mx;
  const double syy = m.eyy - m.my * m.my;
  const double sxy = m.exy - m.mx * m.my;
  return {2.0 * m.mx * m.my + cfg.c1, 2.0 * sxy + cfg.c2, m.mx * m.mx + m.my * m.my + cfg.c1,
          sxx + syy + cfg.c2};
}

void require_photo_inputs(const ImageGrid& a, const ImageGrid& b, const PhotoConfig& cfg,
                          const char* what) {
  require_same_shape(a, b, what);
  if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty image");
  cfg.validate();
}

}  // namespace

ImageGrid ssim_map(const ImageGrid& a, const ImageGrid& b, const PhotoConfig& cfg) {
  require_photo_inputs(a, b, cfg, "ssim_map");
  const int h = a.height();
  const int w = a.width();
  const int nc = a.channels();
  const int radius = cfg.ssim_window / 2;
  ImageGrid out(h, w, 1);
  parallel_rows(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int c = 0; c < nc; ++c) {
        const SsimTerms t = ssim_terms(window_moments(a, b, y, x, c, radius), cfg);
        acc += (t.lum_num * t.cs_num) / (t.lum_den * t.cs_den);
      }
      out(y, x) = acc / nc;
    }
  });
  return out;
}

ImageGrid ssim_map_vjp(const ImageGrid& a, const ImageGrid& b, const PhotoConfig& cfg,
                       const ImageGrid& upstream) {
  require_photo_inputs(a, b, cfg, "ssim_map_vjp");
  require_same_extent(a, upstream, "ssim_map_vjp");
  const int h = a.height();
  const int w = a.width();
  const int nc = a.channels();
  const int radius = cfg.ssim_window / 2;
  const double n = cfg.ssim_window * cfg.ssim_window;
  ImageGrid grad(h, w, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double u = upstream(y, x) / nc;
      if (u == 0.0) continue;
      for (int c = 0; c < nc; ++c) {
        const Moments m = window_moments(a, b, y, x, c, radius);
        const SsimTerms t = ssim_terms(m, cfg);
        const double den = t.lum_den * t.cs_den;
        const double d_exy = 2.0 * t.lum_num / den;
        const double d_eyy = -t.lum_num * t.cs_num / (den * t.cs_den);
        const double d_my = 2.0 * m.mx * (t.cs_num - t.lum_num) / den -
                            2.0 * m.my * t.lum_num * t.cs_num * (t.cs_den - t.lum_den) / (den * den);
        for_each_window_tap(y, x, h, w, radius, [&](int yy, int xx) {
          grad(yy, xx, c) +=
              u * (d_my + 2.0 * b(yy, xx, c) * d_eyy + a(yy, xx, c) * d_exy) / n;
        });
      }
    }
  }
  return grad;
}

ImageGrid photometric_error(const ImageGrid& target, const ImageGrid& rec,
                            const PhotoConfig& cfg) {
  const ImageGrid ssim = ssim_map(target, rec, cfg);
  const int nc = target.channels();
  ImageGrid out(target.height(), target.width(), 1);
  for (Eigen::Index p = 0; p < out.pixels(); ++p) {
    double l1 = 0.0;
    for (int c = 0; c < nc; ++c) l1 += std::abs(target.data()[p * nc + c] - rec.data()[p * nc + c]);
    out.data()[p] = 0.5 * cfg.alpha * (1.0 - ssim.data()[p]) + (1.0 - cfg.alpha) * l1 / nc;
  }
  return out;
}

ImageGrid photometric_error_vjp(const ImageGrid& target, const ImageGrid& rec,
                                const PhotoConfig& cfg, const ImageGrid& upstream) {
  ImageGrid grad = ssim_map_vjp(target, rec, cfg, upstream);
  grad.data() *= -0.5 * cfg.alpha;
  const int nc = target.channels();
  for (Eigen::Index p = 0; p < upstream.pixels(); ++p) {
    const double u = upstream.data()[p] * (1.0 - cfg.alpha) / nc;
    if (u == 0.0) continue;
    for (int c = 0; c < nc; ++c) {
      const double d = rec.data()[p * nc + c] - target.data()[p * nc + c];
      grad.data()[p * nc + c] += u * ((d > 0.0) - (d < 0.0));
    }
  }
  return grad;
}

MinReprojection min_reprojection(const ImageGrid& target, std::span<const Reconstruction> recs,
                                 const PhotoConfig& cfg) {
  if (recs.empty()) throw std::invalid_argument("min_reprojection: no reconstructions");
  const int h = target.height();
  const int w = target.width();
  MinReprojection out{ImageGrid(h, w, 1), ValidityMask(h, w), ImageGridT<int>(h, w, 1, -1)};
  std::vector<ImageGrid> errors;
  errors.reserve(recs.size());
  for (const auto& r : recs) {
    require_same_extent(target, r.valid, "min_reprojection");
    errors.push_back(photometric_error(target, r.image, cfg));
  }
  for (Eigen::Index p = 0; p < out.error.pixels(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    int arg = -1;
    for (std::size_t s = 0; s < recs.size(); ++s) {
      if (!recs[s].valid.data()[p]) continue;
      const double e = errors[s].data()[p];
      if (e < best) {
        best = e;
        arg = static_cast<int>(s);
      }
    }
    if (arg >= 0) {
      out.error.data()[p] = best;
      out.valid.data()[p] = 1;
      out.source.data()[p] = arg;
    }
  }
  return out;
}

namespace {

ValidityMask auto_mask_from(const MinReprojection& best, const ImageGrid& target,
                            std::span<const ImageGrid> sources, const PhotoConfig& cfg) {
  ImageGrid identity(target.height(), target.width(), 1,
                     std::numeric_limits<double>::infinity());
  for (const auto& s : sources) {
    identity.data() = identity.data().cwiseMin(photometric_error(target, s, cfg).data());
  }
  ValidityMask mu(target.height(), target.width());
  for (Eigen::Index p = 0; p < mu.pixels(); ++p) {
    mu.data()[p] = (best.valid.data()[p] && best.error.data()[p] < identity.data()[p]) ? 1 : 0;
  }
  return mu;
}

}  // namespace

ValidityMask auto_mask(const ImageGrid& target, std::span<const ImageGrid> sources,
                       std::span<const Reconstruction> recs, const PhotoConfig& cfg) {
  if (sources.empty() || sources.size() != recs.size()) {
    throw std::invalid_argument("auto_mask: sources and reconstructions must align");
  }
  return auto_mask_from(min_reprojection(target, recs, cfg), target, sources, cfg);
}

namespace {

struct SmoothnessTerms {
  ImageGrid inv;       // 1/D
  double mean_inv;
  ImageGrid norm;      // d* = d / mean(d)
  ImageGrid weight_x;  // exp(-|dI/dx|)
  ImageGrid weight_y;
};

SmoothnessTerms smoothness_terms(const ImageGrid& depth, const ImageGrid& image) {
  require_same_extent(depth, image, "smoothness_loss");
  if (depth.channels() != 1) throw std::invalid_argument("smoothness_loss: depth must have 1 channel");
  for (Eigen::Index i = 0; i < depth.size(); ++i) {
    if (!(depth.data()[i] > 0.0)) throw std::invalid_argument("smoothness_loss: depth must be positive");
  }
  SmoothnessTerms t;
  t.inv = depth;
  t.inv.data() = depth.data().cwiseInverse();
  t.mean_inv = pairwise_sum({t.inv.data().data(), std::size_t(t.inv.size())}) / t.inv.size();
  t.norm = t.inv;
  t.norm.data() /= t.mean_inv;
  const auto [ix, iy] = spatial_gradients(image);
  const int nc = image.channels();
  t.weight_x = ImageGrid(depth.height(), depth.width(), 1);
  t.weight_y = ImageGrid(depth.height(), depth.width(), 1);
  for (Eigen::Index p = 0; p < depth.pixels(); ++p) {
    double ex = 0.0;
    double ey = 0.0;
    for (int c = 0; c < nc; ++c) {
      ex += std::abs(ix.data()[p * nc + c]);
      ey += std::abs(iy.data()[p * nc + c]);
    }
    t.weight_x.data()[p] = std::exp(-ex / nc);
    t.weight_y.data()[p] = std::exp(-ey / nc);
  }
  return t;
}

}  // namespace

double smoothness_loss(const ImageGrid& depth, const ImageGrid& image) {
  const SmoothnessTerms t = smoothness_terms(depth, image);
  const auto [gx, gy] = spatial_gradients(t.norm);
  std::vector<double> terms(depth.pixels());
  for (Eigen::Index p = 0; p < depth.pixels(); ++p) {
    terms[p] = std::abs(gx.data()[p]) * t.weight_x.data()[p] +
               std::abs(gy.data()[p]) * t.weight_y.data()[p];
  }
  return pairwise_sum(terms) / static_cast<double>(terms.size());
}

ImageGrid smoothness_gradient(const ImageGrid& depth, const ImageGrid& image) {
  const SmoothnessTerms t = smoothness_terms(depth, image);
  const int h = depth.height();
  const int w = depth.width();
  const double n = static_cast<double>(depth.pixels());
  const auto [gx, gy] = spatial_gradients(t.norm);
  auto sign = [](double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); };
  ImageGrid d_norm(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (x + 1 < w) {
        const double s = sign(gx(y, x)) * t.weight_x(y, x) / n;
        d_norm(y, x + 1) += s;
        d_norm(y, x) -= s;
      }
      if (y + 1 < h) {
        const double s = sign(gy(y, x)) * t.weight_y(y, x) / n;
        d_norm(y + 1, x) += s;
        d_norm(y, x) -= s;
      }
    }
  }
  std::vector<double> dots(depth.pixels());
  for (Eigen::Index p = 0; p < depth.pixels(); ++p) dots[p] = d_norm.data()[p] * t.inv.data()[p];
  const double coupling = pairwise_sum(dots) / (n * t.mean_inv * t.mean_inv);
  ImageGrid grad(h, w, 1);
  for (Eigen::Index p = 0; p < depth.pixels(); ++p) {
    const double d_inv = d_norm.data()[p] / t.mean_inv - coupling;
    grad.data()[p] = -d_inv * t.inv.data()[p] * t.inv.data()[p];
  }
  return grad;
}

SynthesizedView synthesize_view(const ImageGrid& source, const ImageGrid& depth,
                                const LinearPose& pose, const Intrinsics& k) {
  Reprojection rp = reproject_map(depth, pose, k);
  SampleJacobian sj = bilinear_sample_jacobian(source, rp.coords);
  Reconstruction rec{sj.values, mask_and(rp.valid, sj.valid)};
  return {std::move(rec), std::move(rp), std::move(sj)};
}

SelfSupervisedResult self_supervised_loss(const ImageGrid& depth,
                                          std::span<const LinearPose> poses,
                                          const ImageGrid& target,
                                          std::span<const ImageGrid> sources,
                                          const Intrinsics& k, const PhotoConfig& cfg,
                                          const ValidityMask* target_valid,
                                          bool with_gradient) {
  if (sources.empty() || poses.size() != sources.size()) {
    throw std::invalid_argument("self_supervised_loss: one pose per source is required");
  }
  require_same_extent(depth, target, "self_supervised_loss");
  for (const auto& s : sources) require_same_shape(target, s, "self_supervised_loss");
  if (target_valid) require_same_extent(target, *target_valid, "self_supervised_loss");

  std::vector<SynthesizedView> views;
  std::vector<Reconstruction> recs;
  views.reserve(sources.size());
  recs.reserve(sources.size());
  for (std::size_t s = 0; s < sources.size(); ++s) {
    views.push_back(synthesize_view(sources[s], depth, poses[s], k));
    recs.push_back(views.back().rec);
  }
  const MinReprojection best = min_reprojection(target, recs, cfg);
  const ValidityMask mu = auto_mask_from(best, target, sources, cfg);

  const Eigen::Index n = depth.pixels();
  std::vector<double> used_errors;
  used_errors.reserve(n);
  std::vector<std::uint8_t> used(n, 0);
  for (Eigen::Index p = 0; p < n; ++p) {
    if (mu.data()[p] && (!target_valid || target_valid->data()[p])) {
      used[p] = 1;
      used_errors.push_back(best.error.data()[p]);
    }
  }
  const double v = static_cast<double>(used_errors.size());

  SelfSupervisedResult out;
  out.loss.photometric = v > 0 ? pairwise_sum(used_errors) / v : 0.0;
  out.loss.smoothness = smoothness_loss(depth, target);
  out.loss.total = out.loss.photometric + cfg.gamma * out.loss.smoothness;
  out.loss.masked_fraction = 1.0 - v / static_cast<double>(n);
  if (!with_gradient) return out;

  out.d_depth = smoothness_gradient(depth, target);
  out.d_depth.data() *= cfg.gamma;
  out.d_poses.assign(sources.size(), LinearPoseGradient{});
  if (v == 0) return out;
  for (std::size_t s = 0; s < sources.size(); ++s) {
    ImageGrid upstream(depth.height(), depth.width(), 1);
    bool any = false;
    for (Eigen::Index p = 0; p < n; ++p) {
      if (used[p] && best.source.data()[p] == static_cast<int>(s)) {
        upstream.data()[p] = 1.0 / v;
        any = true;
      }
    }
    if (!any) continue;
    const ImageGrid d_rec = photometric_error_vjp(target, views[s].rec.image, cfg, upstream);
    const CoordMap d_coords = bilinear_coords_vjp(views[s].sampling, d_rec);
    const ReprojectionVjp back = reproject_map_vjp(depth, poses[s], k, d_coords);
    out.d_depth.data() += back.d_depth.data();
    out.d_poses[s] = back.d_pose;
  }
  return out;
}

}  // namespace vifi
