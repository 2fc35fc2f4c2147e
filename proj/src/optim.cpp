#include "vifi/optim.hpp"

#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace vifi {

std::pair<double, double> depth_coefficients(double min_depth, double max_depth) {
  if (!(min_depth > 0.0) || !(max_depth > min_depth)) {
    throw std::invalid_argument("depth_coefficients: need 0 < min_depth < max_depth");
  }
  return {1.0 / min_depth - 1.0 / max_depth, 1.0 / max_depth};
}

ImageGrid decode_depth(const DepthParam& p) {
  if (!(p.a > 0.0) || !(p.b > 0.0)) throw std::invalid_argument("decode_depth: a and b must be positive");
  ImageGrid d = p.sigma;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double s = d.data()[i];
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("decode_depth: sigma must lie in (0, 1)");
    d.data()[i] = 1.0 / (p.a * s + p.b);
  }
  return d;
}

ImageGrid decode_depth_derivative(const DepthParam& p) {
  ImageGrid d = decode_depth(p);
  d.data() = -p.a * d.data().cwiseProduct(d.data());
  return d;
}

DepthParam encode_depth(const ImageGrid& depth, double a, double b) {
  DepthParam p{depth, a, b};
  for (Eigen::Index i = 0; i < depth.size(); ++i) {
    const double s = (1.0 / depth.data()[i] - b) / a;
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("encode_depth: depth outside the decodable range");
    p.sigma.data()[i] = s;
  }
  return p;
}

void ObjectiveConfig::validate() const {
  photo.validate();
  consistency.validate();
}

Problem make_problem(const Bundle& bundle, std::uint64_t seed, const AugmentationRanges& ranges) {
  Rng rng(seed);
  std::array<AffineParams, 3> augment;
  for (auto& a : augment) a = sample_aug_params(rng, bundle.height, bundle.width, ranges);
  return make_problem(bundle, augment);
}

Problem make_problem(const Bundle& bundle, const std::array<AffineParams, 3>& augment) {
  Problem pr;
  pr.height = bundle.height;
  pr.width = bundle.width;
  pr.k = bundle.k;
  pr.augment = augment;
  for (int s = 0; s < 2; ++s) pr.sources[s] = bundle.images[Bundle::kSources[s]];
  for (int j = 0; j < 3; ++j) {
    const int t = Bundle::kTargets[j];
    pr.targets[j] = bundle.images[t];
    pr.target_depths[j] = bundle.depths[t];
    SampleResult aug = affine_image(bundle.images[t], augment[j]);
    pr.aug_targets[j] = std::move(aug.values);
    pr.aug_target_valid[j] = std::move(aug.valid);
    pr.rectification[j] = rectification_matrix(bundle.k, augment[j]);
    for (int s = 0; s < 2; ++s) {
      pr.gt_poses[j][s] = bundle.relative(t, Bundle::kSources[s]);
      pr.aug_sources[j][s] = affine_image(pr.sources[s], augment[j]).values;
    }
  }
  return pr;
}

PoseParams params_from_pose(const PoseSE3& pose) {
  const Eigen::AngleAxisd aa(pose.rotation);
  return {aa.angle() * aa.axis(), pose.translation};
}

ObjectiveParams constant_init(const Problem& problem, double single_depth, double multi_depth,
                              double a, double b) {
  ObjectiveParams p;
  for (int j = 0; j < 3; ++j) {
    auto constant = [&](double d) {
      return encode_depth(ImageGrid(problem.height, problem.width, 1, d), a, b);
    };
    p.targets[j].single = constant(single_depth);
    p.targets[j].multi = constant(multi_depth);
    p.targets[j].augmented = constant(single_depth / problem.augment[j].scale);
    for (int s = 0; s < 2; ++s) p.targets[j].poses[s] = params_from_pose(problem.gt_poses[j][s]);
  }
  return p;
}

ObjectiveParams ground_truth_init(const Problem& problem, double a, double b) {
  ObjectiveParams p;
  for (int j = 0; j < 3; ++j) {
    const ImageGrid& d = problem.target_depths[j];
    p.targets[j].single = encode_depth(d, a, b);
    p.targets[j].multi = encode_depth(d, a, b);
    ImageGrid aug = affine_image(d, problem.augment[j]).values;
    aug.data() /= problem.augment[j].scale;
    p.targets[j].augmented = encode_depth(aug, a, b);
    for (int s = 0; s < 2; ++s) p.targets[j].poses[s] = params_from_pose(problem.gt_poses[j][s]);
  }
  return p;
}

namespace {

// One self-supervised term: photometric and smoothness reported apart.
struct TermResult {
  double pe = 0.0;
  double sm = 0.0;
  ImageGrid d_depth;  // of pe + gamma * sm
  std::array<LinearPoseGradient, 2> d_poses;
};

TermResult self_term(const ImageGrid& depth, const std::array<LinearPose, 2>& poses,
                     const ImageGrid& target, const std::array<ImageGrid, 2>& sources,
                     const Intrinsics& k, const ObjectiveConfig& cfg, const ValidityMask* valid,
                     bool with_gradient) {
  TermResult r;
  if (with_gradient) r.d_depth = ImageGrid(depth.height(), depth.width(), 1);
  if (cfg.toggles.photometric) {
    PhotoConfig photo = cfg.photo;
    photo.gamma = 0.0;
    SelfSupervisedResult ss =
        self_supervised_loss(depth, poses, target, sources, k, photo, valid, with_gradient);
    r.pe = ss.loss.photometric;
    if (with_gradient) {
      r.d_depth = std::move(ss.d_depth);
      for (int s = 0; s < 2; ++s) r.d_poses[s] = ss.d_poses[s];
    }
  }
  if (cfg.toggles.smoothness) {
    r.sm = smoothness_loss(depth, target);
    if (with_gradient) {
      r.d_depth.data() += cfg.photo.gamma * smoothness_gradient(depth, target).data();
    }
  }
  return r;
}

LinearPoseGradient unrectify_gradient(const LinearPoseGradient& g, const RectificationMatrix& rc) {
  // R~ = Rc R Rc^-1, t~ = Rc t.
  const Eigen::Matrix3d rc_inv = rc.matrix.inverse();
  LinearPoseGradient out;
  out.d_linear = rc.matrix.transpose() * g.d_linear * rc_inv.transpose();
  out.d_translation = rc.matrix.transpose() * g.d_translation;
  return out;
}

void chain_sigma(ImageGrid& grad, const DepthParam& p) {
  grad.data() = grad.data().cwiseProduct(decode_depth_derivative(p).data());
}

}  // namespace

ObjectiveResult objective_and_gradient(const ObjectiveParams& params, const Problem& problem,
                                       const ObjectiveConfig& cfg, bool with_gradient) {
  cfg.validate();
  const LossToggles& on = cfg.toggles;
  const double gamma = cfg.photo.gamma;
  const double lambda = cfg.consistency.lambda;
  const double beta = cfg.consistency.beta;
  ObjectiveResult out;
  ObjectiveValue& v = out.value;

  for (int j = 0; j < 3; ++j) {
    const TargetParams& tp = params.targets[j];
    TargetGradient& tg = out.gradient[j];
    TripletLosses& tl = v.per_target[j];

    std::array<LinearPose, 2> poses;
    for (int s = 0; s < 2; ++s) {
      poses[s] = cfg.optimize_pose ? pose_from_params(tp.poses[s]) : problem.gt_poses[j][s];
    }
    std::array<LinearPoseGradient, 2> d_poses;

    const ImageGrid depth = decode_depth(tp.single);
    TermResult single = self_term(depth, poses, problem.targets[j], problem.sources, problem.k,
                                  cfg, nullptr, with_gradient);
    tl.l_ss = single.pe + gamma * single.sm;
    v.pe += single.pe;
    v.sm += single.sm;
    if (with_gradient) {
      tg.single = std::move(single.d_depth);
      for (int s = 0; s < 2; ++s) d_poses[s] += single.d_poses[s];
    }

    ImageGrid multi;
    if (on.multi_frame) {
      multi = decode_depth(tp.multi);
      TermResult m = self_term(multi, poses, problem.targets[j], problem.sources, problem.k, cfg,
                               nullptr, with_gradient);
      tl.l_ss_m = m.pe + gamma * m.sm;
      v.pe += m.pe;
      v.sm += m.sm;
      if (with_gradient) {
        tg.multi = std::move(m.d_depth);
        for (int s = 0; s < 2; ++s) d_poses[s] += m.d_poses[s];
      }
      if (on.svdc) {
        const PairGradient sv = svdc_gradient(multi, depth, beta);
        tl.l_sv = sv.value;
        if (with_gradient) {
          tg.multi.data() += lambda * sv.d_first.data();
          tg.single.data() += lambda * sv.d_second.data();
        }
      }
    }

    if (on.augmentation) {
      const AffineParams& aug = problem.augment[j];
      const RectificationMatrix& rc = problem.rectification[j];
      std::array<LinearPose, 2> rect;
      for (int s = 0; s < 2; ++s) rect[s] = rectify_pose(poses[s], rc);
      const ImageGrid aug_depth = decode_depth(tp.augmented);
      TermResult a = self_term(aug_depth, rect, problem.aug_targets[j], problem.aug_sources[j],
                               problem.k, cfg, &problem.aug_target_valid[j], with_gradient);
      tl.l_ss_tilde = a.pe + gamma * a.sm;
      v.pe += a.pe;
      v.sm += a.sm;
      if (with_gradient) {
        tg.augmented = std::move(a.d_depth);
        for (int s = 0; s < 2; ++s) d_poses[s] += unrectify_gradient(a.d_poses[s], rc);
      }
      if (on.sadc) {
        const RestoredDepth restored = affine_inverse_depth(aug_depth, aug);
        ImageGrid d_restored(problem.height, problem.width, 1);
        const PairGradient sa =
            sadc_gradient(depth, restored.depth, aug.scale, restored.coverage, beta);
        tl.l_sa = sa.value;
        if (with_gradient) {
          tg.single.data() += lambda * sa.d_first.data();
          d_restored.data() += sa.d_second.data();
        }
        if (on.multi_frame) {
          const PairGradient sa_m =
              sadc_gradient(multi, restored.depth, aug.scale, restored.coverage, beta);
          tl.l_sa_m = sa_m.value;
          if (with_gradient) {
            tg.multi.data() += lambda * sa_m.d_first.data();
            d_restored.data() += sa_m.d_second.data();
          }
        }
        if (with_gradient) {
          d_restored.data() *= lambda;
          tg.augmented.data() +=
              affine_inverse_depth_vjp(aug, problem.height, problem.width, d_restored).data();
        }
      }
    }

    tl.finalize(lambda);
    v.sv += tl.l_sv;
    v.sa += tl.l_sa;
    v.sa_m += tl.l_sa_m;
    v.total += tl.total;

    if (with_gradient) {
      chain_sigma(tg.single, tp.single);
      if (on.multi_frame) chain_sigma(tg.multi, tp.multi);
      if (on.augmentation) chain_sigma(tg.augmented, tp.augmented);
      if (cfg.optimize_pose) {
        for (int s = 0; s < 2; ++s) tg.poses[s] = pose_params_gradient(tp.poses[s], d_poses[s]);
      }
    }
  }
  return out;
}

namespace {

// Visits the active parameter blocks in packing order.
template <typename Grid, typename Pose>
void for_each_block(const ObjectiveConfig& cfg, Grid&& grid, Pose&& pose) {
  for (int j = 0; j < 3; ++j) grid(j, 0);
  if (cfg.toggles.multi_frame) {
    for (int j = 0; j < 3; ++j) grid(j, 1);
  }
  if (cfg.toggles.augmentation) {
    for (int j = 0; j < 3; ++j) grid(j, 2);
  }
  if (cfg.optimize_pose) {
    for (int j = 0; j < 3; ++j) {
      for (int s = 0; s < 2; ++s) pose(j, s);
    }
  }
}

template <typename T>
auto& grid_of(T& target, int kind) {
  return kind == 0 ? target.single : kind == 1 ? target.multi : target.augmented;
}

}  // namespace

Eigen::VectorXd pack_params(const ObjectiveParams& params, const ObjectiveConfig& cfg) {
  std::vector<double> out;
  for_each_block(
      cfg,
      [&](int j, int kind) {
        const auto& g = grid_of(params.targets[j], kind).sigma.data();
        out.insert(out.end(), g.data(), g.data() + g.size());
      },
      [&](int j, int s) {
        const PoseParams& p = params.targets[j].poses[s];
        for (int i = 0; i < 3; ++i) out.push_back(p.axis_angle[i]);
        for (int i = 0; i < 3; ++i) out.push_back(p.translation[i]);
      });
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void unpack_params(const Eigen::VectorXd& v, const ObjectiveConfig& cfg, ObjectiveParams& params) {
  Eigen::Index at = 0;
  for_each_block(
      cfg,
      [&](int j, int kind) {
        auto& g = grid_of(params.targets[j], kind).sigma.data();
        if (at + g.size() > v.size()) throw std::invalid_argument("unpack_params: vector too short");
        g = v.segment(at, g.size());
        at += g.size();
      },
      [&](int j, int s) {
        if (at + 6 > v.size()) throw std::invalid_argument("unpack_params: vector too short");
        PoseParams& p = params.targets[j].poses[s];
        p.axis_angle = v.segment<3>(at);
        p.translation = v.segment<3>(at + 3);
        at += 6;
      });
  if (at != v.size()) throw std::invalid_argument("unpack_params: vector length mismatch");
}

Eigen::VectorXd pack_gradient(const ObjectiveResult& result, const ObjectiveConfig& cfg) {
  std::vector<double> out;
  for_each_block(
      cfg,
      [&](int j, int kind) {
        const auto& g = grid_of(result.gradient[j], kind).data();
        out.insert(out.end(), g.data(), g.data() + g.size());
      },
      [&](int j, int s) {
        const Vector6d& g = result.gradient[j].poses[s];
        out.insert(out.end(), g.data(), g.data() + 6);
      });
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void OptimConfig::validate() const {
  if (max_iters < 0) throw std::invalid_argument("OptimConfig: max_iters must be nonnegative");
  if (!(step_size > 0.0) || !(pose_step_size > 0.0)) {
    throw std::invalid_argument("OptimConfig: step sizes must be positive");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("OptimConfig: momentum must lie in [0, 1)");
  if (!(sigma_epsilon > 0.0 && sigma_epsilon < 0.5)) {
    throw std::invalid_argument("OptimConfig: sigma_epsilon must lie in (0, 0.5)");
  }
  if (!(divergence_factor > 1.0) || divergence_window <= 0) {
    throw std::invalid_argument("OptimConfig: invalid divergence rule");
  }
  objective.validate();
}

DepthMetrics center_metrics(const Problem& problem, const ObjectiveParams& params,
                            const EvalConfig& eval) {
  const ImageGrid& gt = problem.target_depths[1];
  const ValidityMask all = full_mask(problem.height, problem.width);
  return depth_metrics(median_scale(decode_depth(params.targets[1].single), gt, all), gt, eval);
}

OptimResult optimize(const Problem& problem, ObjectiveParams init, const OptimConfig& cfg) {
  cfg.validate();
  const ObjectiveConfig& ocfg = cfg.objective;
  OptimResult res;
  res.params = std::move(init);

  Eigen::VectorXd x = pack_params(res.params, ocfg);
  const Eigen::Index n_pose = ocfg.optimize_pose ? 36 : 0;
  const Eigen::Index n_sigma = x.size() - n_pose;
  Eigen::VectorXd step = Eigen::VectorXd::Constant(x.size(), cfg.step_size);
  step.tail(n_pose).setConstant(cfg.pose_step_size);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(x.size());

  double initial = 0.0;
  int above = 0;
  for (int it = 0;; ++it) {
    const bool last = it == cfg.max_iters;
    ObjectiveResult r = objective_and_gradient(res.params, problem, ocfg, !last);
    res.curve.push_back(r.value);
    if (cfg.trace_every > 0 && (it % cfg.trace_every == 0 || last)) {
      res.trace.push_back({it, center_metrics(problem, res.params)});
    }
    if (it == 0) initial = r.value.total;
    if (!std::isfinite(r.value.total)) {
      res.status = OptimStatus::kDiverged;
      break;
    }
    above = r.value.total > cfg.divergence_factor * initial ? above + 1 : 0;
    if (above >= cfg.divergence_window) {
      res.status = OptimStatus::kDiverged;
      break;
    }
    if (last) break;

    const Eigen::VectorXd g = pack_gradient(r, ocfg);
    velocity = cfg.momentum * velocity - step.cwiseProduct(g);
    x += velocity;
    x.head(n_sigma) = x.head(n_sigma).cwiseMax(cfg.sigma_epsilon).cwiseMin(1.0 - cfg.sigma_epsilon);
    unpack_params(x, ocfg, res.params);
  }
  return res;
}

}  // namespace vifi
