#include "vifi/gradcheck.hpp"

#include "vifi/affine.hpp"
#include "vifi/camera.hpp"
#include "vifi/consistency.hpp"
#include "vifi/imgrid.hpp"
#include "vifi/optim.hpp"
#include "vifi/photometric.hpp"
#include "vifi/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace vifi {

namespace {

constexpr double kSmooth = 1e-6;
constexpr double kComposite = 1e-4;

ImageGrid random_grid(Rng& rng, int h, int w, int c, double lo, double hi) {
  ImageGrid g(h, w, c);
  for (Eigen::Index i = 0; i < g.size(); ++i) g.data()[i] = uniform(rng, lo, hi);
  return g;
}

ValidityMask random_mask(Rng& rng, int h, int w) {
  ValidityMask m(h, w);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform01(rng) < 0.7 ? 1 : 0;
  m.data()[0] = 1;
  return m;
}

ImageGrid as_grid(const Eigen::VectorXd& v, Eigen::Index offset, int h, int w, int c = 1) {
  return ImageGrid(h, w, c, v.segment(offset, Eigen::Index(h) * w * c));
}

double dot(const ImageGrid& a, const ImageGrid& b) { return a.data().dot(b.data()); }

Eigen::VectorXd stack(std::initializer_list<const Eigen::VectorXd*> parts) {
  Eigen::Index n = 0;
  for (const auto* p : parts) n += p->size();
  Eigen::VectorXd out(n);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.segment(at, p->size()) = *p;
    at += p->size();
  }
  return out;
}

Intrinsics small_intrinsics(int h, int w) { return {0.9 * w, 0.9 * w, (w - 1) / 2.0, (h - 1) / 2.0}; }

LinearPose random_pose(Rng& rng) {
  Eigen::Vector3d aa(uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05), uniform(rng, -0.05, 0.05));
  Eigen::Vector3d t(uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3), uniform(rng, -0.2, 0.2));
  return LinearPose(PoseSE3{rotation_from_axis_angle(aa), t});
}

Eigen::VectorXd pose_vector(const LinearPose& p) {
  Eigen::VectorXd v(12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[3 * r + c] = p.linear(r, c);
  }
  v.tail<3>() = p.translation;
  return v;
}

LinearPose pose_from_vector(const Eigen::VectorXd& v, Eigen::Index at) {
  LinearPose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.linear(r, c) = v[at + 3 * r + c];
  }
  p.translation = v.segment<3>(at + 9);
  return p;
}

Eigen::VectorXd pose_gradient_vector(const LinearPoseGradient& g) {
  Eigen::VectorXd v(12);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) v[3 * r + c] = g.d_linear(r, c);
  }
  v.tail<3>() = g.d_translation;
  return v;
}

// Small rendered bundle for the composite losses.
Bundle small_bundle(Rng& rng, int h, int w) {
  SceneConfig sc;
  const Scene scene = generate_scene(rng(), sc);
  const Intrinsics k = Intrinsics{58.0, 58.0, 31.5, 23.5}.rescaled(w / 64.0, h / 48.0);
  return make_triplet(scene, make_trajectory({}), k, h, w);
}

GradcheckCase bilinear_coords_case(Rng& rng) {
  const int h = 6, w = 7;
  const ImageGrid grid = random_grid(rng, h, w, 2, 0.0, 1.0);
  const ImageGrid weights = random_grid(rng, 5, 5, 2, -1.0, 1.0);
  const CoordMap coords = [&] {
    CoordMap c(5, 5, 2);
    for (Eigen::Index p = 0; p < c.pixels(); ++p) {
      c.data()[2 * p] = uniform(rng, -0.5, w - 0.5);
      c.data()[2 * p + 1] = uniform(rng, -0.5, h - 0.5);
    }
    return c;
  }();
  GradcheckCase c;
  c.x = coords.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, bilinear_sample(grid, CoordMap(5, 5, 2, x)).values);
  };
  c.gradient = bilinear_coords_vjp(bilinear_sample_jacobian(grid, coords), weights).data();
  return c;
}

GradcheckCase bilinear_grid_case(Rng& rng) {
  const int h = 6, w = 7;
  const ImageGrid grid = random_grid(rng, h, w, 1, 0.0, 1.0);
  const ImageGrid weights = random_grid(rng, 5, 5, 1, -1.0, 1.0);
  CoordMap coords(5, 5, 2);
  for (Eigen::Index p = 0; p < coords.pixels(); ++p) {
    coords.data()[2 * p] = uniform(rng, -0.5, w - 0.5);
    coords.data()[2 * p + 1] = uniform(rng, -0.5, h - 0.5);
  }
  GradcheckCase c;
  c.x = grid.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, bilinear_sample(ImageGrid(h, w, 1, x), coords).values);
  };
  c.gradient = bilinear_grid_vjp(h, w, coords, weights).data();
  return c;
}

GradcheckCase reproject_depth_case(Rng& rng) {
  const int h = 6, w = 8;
  const Intrinsics k = small_intrinsics(h, w);
  const LinearPose pose = random_pose(rng);
  const ImageGrid depth = random_grid(rng, h, w, 1, 2.0, 10.0);
  const ImageGrid weights = random_grid(rng, h, w, 2, -1.0, 1.0);
  GradcheckCase c;
  c.x = depth.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, reproject_map(ImageGrid(h, w, 1, x), pose, k).coords);
  };
  c.gradient = reproject_map_vjp(depth, pose, k, weights).d_depth.data();
  return c;
}

GradcheckCase reproject_pose_case(Rng& rng) {
  const int h = 6, w = 8;
  const Intrinsics k = small_intrinsics(h, w);
  const LinearPose pose = random_pose(rng);
  const ImageGrid depth = random_grid(rng, h, w, 1, 2.0, 10.0);
  const ImageGrid weights = random_grid(rng, h, w, 2, -1.0, 1.0);
  GradcheckCase c;
  c.x = pose_vector(pose);
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, reproject_map(depth, pose_from_vector(x, 0), k).coords);
  };
  c.gradient = pose_gradient_vector(reproject_map_vjp(depth, pose, k, weights).d_pose);
  return c;
}

GradcheckCase pose_params_case(Rng& rng) {
  Eigen::Vector3d dir(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  dir.normalize();
  // Norms from 1e-4 to 2.5 rad exercise both branches of the coefficients.
  const double norm = std::pow(10.0, uniform(rng, -4.0, std::log10(2.5)));
  const PoseParams params{norm * dir, {uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1)}};
  LinearPoseGradient g;
  for (int r = 0; r < 3; ++r) {
    for (int col = 0; col < 3; ++col) g.d_linear(r, col) = uniform(rng, -1, 1);
    g.d_translation[r] = uniform(rng, -1, 1);
  }
  GradcheckCase c;
  c.x.resize(6);
  c.x << params.axis_angle, params.translation;
  c.f = [=](const Eigen::VectorXd& x) {
    const PoseSE3 p = pose_from_params(PoseParams{x.head<3>(), x.tail<3>()});
    return (g.d_linear.array() * p.rotation.array()).sum() + g.d_translation.dot(p.translation);
  };
  c.gradient = pose_params_gradient(params, g);
  c.step = 1e-5;
  return c;
}

GradcheckCase ssim_case(Rng& rng) {
  const int h = 6, w = 7, ch = 2;
  const PhotoConfig cfg;
  const ImageGrid a = random_grid(rng, h, w, ch, 0.0, 1.0);
  const ImageGrid b = random_grid(rng, h, w, ch, 0.0, 1.0);
  const ImageGrid weights = random_grid(rng, h, w, 1, -1.0, 1.0);
  GradcheckCase c;
  c.x = b.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, ssim_map(a, ImageGrid(h, w, ch, x), cfg));
  };
  c.gradient = ssim_map_vjp(a, b, cfg, weights).data();
  return c;
}

GradcheckCase photometric_case(Rng& rng) {
  const int h = 6, w = 7, ch = 2;
  const PhotoConfig cfg;
  const ImageGrid target = random_grid(rng, h, w, ch, 0.0, 1.0);
  const ImageGrid rec = random_grid(rng, h, w, ch, 0.0, 1.0);
  const ImageGrid weights = random_grid(rng, h, w, 1, -1.0, 1.0);
  GradcheckCase c;
  c.x = rec.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, photometric_error(target, ImageGrid(h, w, ch, x), cfg));
  };
  c.gradient = photometric_error_vjp(target, rec, cfg, weights).data();
  return c;
}

GradcheckCase smoothness_case(Rng& rng) {
  const int h = 6, w = 7;
  const ImageGrid image = random_grid(rng, h, w, 2, 0.0, 1.0);
  const ImageGrid depth = random_grid(rng, h, w, 1, 1.0, 10.0);
  GradcheckCase c;
  c.x = depth.data();
  c.f = [=](const Eigen::VectorXd& x) { return smoothness_loss(ImageGrid(h, w, 1, x), image); };
  c.gradient = smoothness_gradient(depth, image).data();
  return c;
}

GradcheckCase si_case(Rng& rng) {
  const int h = 5, w = 6;
  const double beta = uniform(rng, 0.0, 1.0);
  const ImageGrid d1 = random_grid(rng, h, w, 1, 1.0, 20.0);
  const ImageGrid d2 = random_grid(rng, h, w, 1, 1.0, 20.0);
  const ValidityMask mask = random_mask(rng, h, w);
  const Eigen::Index n = d1.size();
  const PairGradient g = scale_invariant_error_gradient(d1, d2, mask, beta);
  GradcheckCase c;
  c.x = stack({&d1.data(), &d2.data()});
  c.f = [=](const Eigen::VectorXd& x) {
    return scale_invariant_error(as_grid(x, 0, h, w), as_grid(x, n, h, w), mask, beta);
  };
  c.gradient = stack({&g.d_first.data(), &g.d_second.data()});
  return c;
}

GradcheckCase svdc_case(Rng& rng) {
  const int h = 5, w = 6;
  const ImageGrid multi = random_grid(rng, h, w, 1, 1.0, 20.0);
  const ImageGrid single = random_grid(rng, h, w, 1, 1.0, 20.0);
  const Eigen::Index n = multi.size();
  const PairGradient g = svdc_gradient(multi, single);
  GradcheckCase c;
  c.x = stack({&multi.data(), &single.data()});
  c.f = [=](const Eigen::VectorXd& x) { return svdc(as_grid(x, 0, h, w), as_grid(x, n, h, w)); };
  c.gradient = stack({&g.d_first.data(), &g.d_second.data()});
  return c;
}

GradcheckCase sadc_case(Rng& rng) {
  const int h = 5, w = 6;
  const double scale = uniform(rng, 1.2, 2.0);
  const ImageGrid depth = random_grid(rng, h, w, 1, 1.0, 20.0);
  const ImageGrid restored = random_grid(rng, h, w, 1, 0.5, 15.0);
  const ValidityMask coverage = random_mask(rng, h, w);
  const Eigen::Index n = depth.size();
  const PairGradient g = sadc_gradient(depth, restored, scale, coverage);
  GradcheckCase c;
  c.x = stack({&depth.data(), &restored.data()});
  c.f = [=](const Eigen::VectorXd& x) {
    return sadc(as_grid(x, 0, h, w), as_grid(x, n, h, w), scale, coverage);
  };
  c.gradient = stack({&g.d_first.data(), &g.d_second.data()});
  return c;
}

GradcheckCase affine_depth_case(Rng& rng) {
  const int h = 12, w = 16;
  const AffineParams params = sample_aug_params(rng, h, w);
  const ImageGrid aug = random_grid(rng, h, w, 1, 1.0, 10.0);
  const ImageGrid weights = random_grid(rng, h, w, 1, -1.0, 1.0);
  GradcheckCase c;
  c.x = aug.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, affine_inverse_depth(ImageGrid(h, w, 1, x), params).depth);
  };
  c.gradient = affine_inverse_depth_vjp(params, h, w, weights).data();
  return c;
}

GradcheckCase decode_case(Rng& rng) {
  const int h = 5, w = 6;
  DepthParam p{random_grid(rng, h, w, 1, 0.005, 0.95)};
  const ImageGrid weights = random_grid(rng, h, w, 1, -1.0, 1.0);
  GradcheckCase c;
  c.x = p.sigma.data();
  c.f = [=](const Eigen::VectorXd& x) {
    return dot(weights, decode_depth(DepthParam{ImageGrid(h, w, 1, x), p.a, p.b}));
  };
  c.gradient = weights.data().cwiseProduct(decode_depth_derivative(p).data());
  c.step = 1e-6;
  return c;
}

GradcheckCase self_supervised_case(Rng& rng) {
  const int h = 12, w = 16;
  const Bundle b = small_bundle(rng, h, w);
  const PhotoConfig cfg;
  const int t = 2;
  const std::vector<ImageGrid> sources{b.images[0], b.images[4]};
  const std::vector<LinearPose> poses{b.relative(t, 0), b.relative(t, 4)};
  ImageGrid depth = b.depths[t];
  for (Eigen::Index i = 0; i < depth.size(); ++i) depth.data()[i] *= std::exp(uniform(rng, -0.1, 0.1));
  const ImageGrid target = b.images[t];
  const Eigen::Index n = depth.size();
  const SelfSupervisedResult r =
      self_supervised_loss(depth, poses, target, sources, b.k, cfg, nullptr, true);
  const Eigen::VectorXd p0 = pose_vector(poses[0]);
  const Eigen::VectorXd p1 = pose_vector(poses[1]);
  const Eigen::VectorXd g0 = pose_gradient_vector(r.d_poses[0]);
  const Eigen::VectorXd g1 = pose_gradient_vector(r.d_poses[1]);
  GradcheckCase c;
  c.x = stack({&depth.data(), &p0, &p1});
  c.f = [=](const Eigen::VectorXd& x) {
    const std::vector<LinearPose> ps{pose_from_vector(x, n), pose_from_vector(x, n + 12)};
    return self_supervised_loss(as_grid(x, 0, h, w), ps, target, sources, b.k, cfg).loss.total;
  };
  c.gradient = stack({&r.d_depth.data(), &g0, &g1});
  return c;
}

GradcheckCase objective_case(Rng& rng) {
  const int h = 12, w = 16;
  const Bundle b = small_bundle(rng, h, w);
  const Problem problem = make_problem(b, rng());
  ObjectiveConfig cfg;
  cfg.toggles.multi_frame = true;
  cfg.toggles.augmentation = true;
  cfg.optimize_pose = true;
  ObjectiveParams params = ground_truth_init(problem);
  Eigen::VectorXd x = pack_params(params, cfg);
  const Eigen::Index n_sigma = x.size() - 36;
  for (Eigen::Index i = 0; i < n_sigma; ++i) x[i] *= std::exp(uniform(rng, -0.1, 0.1));
  for (Eigen::Index i = n_sigma; i < x.size(); ++i) x[i] += uniform(rng, -0.005, 0.005);
  unpack_params(x, cfg, params);
  GradcheckCase c;
  c.x = x;
  c.f = [=](const Eigen::VectorXd& v) {
    ObjectiveParams p = params;
    unpack_params(v, cfg, p);
    return objective_and_gradient(p, problem, cfg, false).value.total;
  };
  c.gradient = pack_gradient(objective_and_gradient(params, problem, cfg, true), cfg);
  c.step = 1e-6;
  return c;
}

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

const std::vector<GradcheckOp>& gradcheck_registry() {
  static const std::vector<GradcheckOp> ops = {
      {"bilinear_sample.coords", kSmooth, bilinear_coords_case},
      {"bilinear_sample.grid", kSmooth, bilinear_grid_case},
      {"reproject_map.depth", kSmooth, reproject_depth_case},
      {"reproject_map.pose", kSmooth, reproject_pose_case},
      {"pose_from_params", kSmooth, pose_params_case},
      {"ssim_map", kSmooth, ssim_case},
      {"photometric_error", kSmooth, photometric_case},
      {"smoothness_loss", kSmooth, smoothness_case},
      {"scale_invariant_error", kSmooth, si_case},
      {"svdc", kSmooth, svdc_case},
      {"sadc", kSmooth, sadc_case},
      {"affine_inverse_depth", kSmooth, affine_depth_case},
      {"decode_depth", kSmooth, decode_case},
      {"self_supervised_loss", kComposite, self_supervised_case},
      {"objective", kComposite, objective_case},
  };
  return ops;
}

GradcheckRow run_gradcheck(const GradcheckOp& op, const GradcheckOptions& options) {
  constexpr int kPerCase = 25;
  constexpr int kMaxCases = 400;
  constexpr double kInformative = 1e-3;
  constexpr double kEps = 2.220446049250313e-16;

  Rng rng(options.seed ^ name_hash(op.name));
  GradcheckRow row{op.name, 0.0, 0, 0, op.threshold, false};
  for (int n_case = 0; n_case < kMaxCases && row.samples < options.samples; ++n_case) {
    GradcheckCase c = op.make(rng);
    if (options.inject_sign_flip) c.gradient = -c.gradient;
    const double scale = c.gradient.cwiseAbs().maxCoeff();
    std::vector<Eigen::Index> order(c.x.size());
    std::iota(order.begin(), order.end(), Eigen::Index(0));
    for (Eigen::Index i = static_cast<Eigen::Index>(order.size()) - 1; i > 0; --i) {
      std::swap(order[i], order[static_cast<Eigen::Index>(uniform01(rng) * (i + 1))]);
    }
    const double f0 = c.f(c.x);
    const double h = c.step;
    int used = 0;
    for (Eigen::Index i : order) {
      if (used == kPerCase || row.samples == options.samples) break;
      auto at = [&](double offset) {
        Eigen::VectorXd x = c.x;
        x[i] += offset;
        return c.f(x);
      };
      const double fp1 = at(h), fm1 = at(-h), fp2 = at(2 * h), fm2 = at(-2 * h);
      const double c1 = (fp1 - fm1) / (2 * h);
      const double c2 = (fp2 - fm2) / (4 * h);
      // Fourth-order estimate; the two central differences disagree when
      // a kink (min, |.|, cell boundary, mask switch) lies within 2h.
      const double numeric = (4 * c1 - c2) / 3;
      const double analytic = c.gradient[i];
      const double magnitude = std::max(std::abs(analytic), std::abs(numeric));
      const double rounding = 8 * kEps * std::max(1.0, std::abs(f0)) / h;
      const bool kink = std::abs(c1 - c2) > 0.1 * op.threshold * std::abs(c1) + rounding;
      if (kink || magnitude < kInformative * scale || magnitude == 0.0) {
        ++row.skipped;
        continue;
      }
      row.max_rel_error = std::max(row.max_rel_error, std::abs(analytic - numeric) / magnitude);
      ++row.samples;
      ++used;
    }
  }
  row.passed = row.samples >= options.samples && row.max_rel_error < op.threshold;
  return row;
}

std::vector<GradcheckRow> run_gradcheck_suite(const GradcheckOptions& options) {
  std::vector<GradcheckRow> rows;
  for (const GradcheckOp& op : gradcheck_registry()) rows.push_back(run_gradcheck(op, options));
  return rows;
}

std::string format_gradcheck_table(const std::vector<GradcheckRow>& rows) {
  std::string out = "op                        max_rel_err  threshold  samples  skipped  status\n";
  char line[160];
  for (const GradcheckRow& r : rows) {
    std::snprintf(line, sizeof line, "%-24s  %11.3e  %9.1e  %7d  %7d  %s\n", r.name.c_str(),
                  r.max_rel_error, r.threshold, r.samples, r.skipped, r.passed ? "pass" : "FAIL");
    out += line;
  }
  return out;
}

}  // namespace vifi
