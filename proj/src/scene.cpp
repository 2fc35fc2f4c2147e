#include "vifi/scene.hpp"

#include "vifi/parallel.hpp"
#include "vifi/random.hpp"

#include <cmath>
#include <stdexcept>

namespace vifi {

Scene::Scene(SceneConfig config, std::vector<Wave> relief, std::vector<Wave> texture)
    : config_(config), relief_(std::move(relief)), texture_(std::move(texture)) {}

double Scene::height(double x, double y) const {
  if (config_.mode == SceneMode::kPlane) return config_.plane_depth;
  double z = config_.base_depth;
  for (const auto& w : relief_) z += w(x, y);
  return z;
}

double Scene::albedo(double x, double y) const {
  double a = 0.5;
  for (const auto& w : texture_) a += w(x, y);
  return a;
}

double Scene::feature(double x, double y, int channel) const {
  if (channel == 0 || texture_.empty()) return albedo(x, y);
  // Each extra channel reuses one texture wave with a rotated phase.
  const Wave& w = texture_[static_cast<std::size_t>(channel) % texture_.size()];
  return 0.5 + 0.5 * std::sin(w.frequency.x() * x + w.frequency.y() * y + w.phase + channel);
}

namespace {

std::vector<Wave> random_waves(Rng& rng, int count, double total_amplitude, double freq_min,
                               double freq_max) {
  std::vector<Wave> waves;
  if (count <= 0) return waves;
  std::vector<double> weights(count);
  double sum = 0.0;
  for (double& w : weights) {
    w = uniform(rng, 0.5, 1.0);
    sum += w;
  }
  for (int i = 0; i < count; ++i) {
    const double angle = uniform(rng, 0.0, 2.0 * M_PI);
    const double freq = uniform(rng, freq_min, freq_max);
    const double phase = uniform(rng, 0.0, 2.0 * M_PI);
    waves.push_back({total_amplitude * weights[i] / sum,
                     {freq * std::cos(angle), freq * std::sin(angle)},
                     phase});
  }
  return waves;
}

}  // namespace

Scene generate_scene(std::uint64_t seed, const SceneConfig& config) {
  if (config.mode == SceneMode::kPlane &&
      !(config.plane_depth >= Scene::kMinDepth && config.plane_depth <= Scene::kMaxDepth)) {
    throw std::invalid_argument("generate_scene: plane depth outside [1, 50] m");
  }
  if (config.mode == SceneMode::kTerrain &&
      !(config.base_depth - config.relief_amplitude >= Scene::kMinDepth &&
        config.base_depth + config.relief_amplitude <= Scene::kMaxDepth)) {
    throw std::invalid_argument("generate_scene: terrain depth range outside [1, 50] m");
  }
  Rng rng(seed);
  auto relief = random_waves(rng, config.relief_terms, config.relief_amplitude, 0.08, 0.3);
  const double depth_scale =
      config.mode == SceneMode::kPlane ? config.plane_depth : config.base_depth;
  const double f = config.reference_depth / depth_scale;
  auto texture = random_waves(rng, config.texture_terms, 0.45, config.texture_freq_min * f,
                              config.texture_freq_max * f);
  return Scene(config, std::move(relief), std::move(texture));
}

Eigen::Vector3d cast_ray(const Scene& scene, const PoseSE3& pose, const Intrinsics& k,
                         const Eigen::Vector2d& pixel) {
  const Eigen::Matrix3d rt = pose.rotation.transpose();
  const Eigen::Vector3d center = -(rt * pose.translation);
  const Eigen::Vector3d dir = rt * (k.inverse() * Eigen::Vector3d(pixel.x(), pixel.y(), 1.0));
  if (scene.config().mode == SceneMode::kPlane) {
    const double s = (scene.config().plane_depth - center.z()) / dir.z();
    if (!(dir.z() > 0.0) || !(s > 0.0)) throw std::domain_error("cast_ray: ray misses the plane");
    return center + s * dir;
  }
  auto f = [&](double s) {
    const Eigen::Vector3d p = center + s * dir;
    return p.z() - scene.height(p.x(), p.y());
  };
  double lo = 1e-3;
  double hi = 2.0 * Scene::kMaxDepth;
  if (!(f(lo) < 0.0) || !(f(hi) > 0.0)) throw std::domain_error("cast_ray: ray misses the surface");
  // Bisection on the ray parameter; hit point accurate well below 1e-8 m.
  while (hi - lo > 1e-10) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return center + (0.5 * (lo + hi)) * dir;
}

RenderedView render_view(const Scene& scene, const PoseSE3& pose, const Intrinsics& k, int height,
                         int width) {
  RenderedView v{ImageGrid(height, width, 1), ImageGrid(height, width, 1)};
  parallel_rows(height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d hit = cast_ray(scene, pose, k, {double(x), double(y)});
      v.image(y, x) = scene.albedo(hit.x(), hit.y());
      v.depth(y, x) = transform_point(pose, hit).z();
    }
  });
  return v;
}

ImageGrid render_features(const Scene& scene, const PoseSE3& pose, const Intrinsics& k,
                          int height, int width, int channels) {
  ImageGrid out(height, width, channels);
  parallel_rows(height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d hit = cast_ray(scene, pose, k, {double(x), double(y)});
      for (int c = 0; c < channels; ++c) out(y, x, c) = scene.feature(hit.x(), hit.y(), c);
    }
  });
  return out;
}

namespace {

// Round-trip rounding of project(backproject(x)) at the border.
constexpr double kBorderSlack = 1e-9;

GroundTruthFlow flow_against(const Scene& scene, const PoseSE3& pose_a, const PoseSE3& pose_b,
                             const ImageGrid& depth_b, const Intrinsics& k, int height,
                             int width) {
  GroundTruthFlow out{FlowField(height, width, 2), ValidityMask(height, width)};
  parallel_rows(height, [&](int y) {
    for (int x = 0; x < width; ++x) {
      const Eigen::Vector3d hit = cast_ray(scene, pose_a, k, {double(x), double(y)});
      const Eigen::Vector3d pb = transform_point(pose_b, hit);
      if (!(pb.z() > kMinReprojectedDepth)) {
        out.occluded(y, x) = 1;
        continue;
      }
      const Eigen::Vector2d u = project(pb, k);
      out.flow(y, x, 0) = u.x() - x;
      out.flow(y, x, 1) = u.y() - y;
      const bool inside = u.x() >= -kBorderSlack && u.x() <= width - 1.0 + kBorderSlack &&
                          u.y() >= -kBorderSlack && u.y() <= height - 1.0 + kBorderSlack;
      if (!inside) {
        out.occluded(y, x) = 1;
        continue;
      }
      CoordMap at(1, 1, 2);
      at(0, 0, 0) = u.x();
      at(0, 0, 1) = u.y();
      const double visible_depth = bilinear_sample(depth_b, at).values(0, 0);
      out.occluded(y, x) = pb.z() > visible_depth + kOcclusionTolerance ? 1 : 0;
    }
  });
  return out;
}

}  // namespace

GroundTruthFlow ground_truth_flow(const Scene& scene, const PoseSE3& pose_a,
                                  const PoseSE3& pose_b, const Intrinsics& k, int height,
                                  int width) {
  const RenderedView b = render_view(scene, pose_b, k, height, width);
  return flow_against(scene, pose_a, pose_b, b.depth, k, height, width);
}

Trajectory make_trajectory(const TrajectorySpec& spec) {
  if (!(spec.step_translation.norm() < 0.5)) {
    throw std::invalid_argument("make_trajectory: step translation must be below 0.5 m");
  }
  if (!(spec.step_rotation.norm() < 3.0 * M_PI / 180.0)) {
    throw std::invalid_argument("make_trajectory: step rotation must be below 3 degrees");
  }
  Trajectory t;
  for (int i = 0; i < 5; ++i) {
    const double offset = i - 2;
    const Eigen::Matrix3d cam_to_world = rotation_from_axis_angle<double>(offset * spec.step_rotation);
    const Eigen::Vector3d center = offset * spec.step_translation;
    t.poses[i].rotation = cam_to_world.transpose();
    t.poses[i].translation = -(t.poses[i].rotation * center);
  }
  return t;
}

PoseSE3 Bundle::relative(int target, int source) const {
  return pose_compose(poses.at(source), pose_inverse(poses.at(target)));
}

InterpolationTruth make_interpolation(const Scene& scene, const Bundle& bundle, int prev, int mid,
                                      int next) {
  const int h = bundle.height;
  const int w = bundle.width;
  GroundTruthFlow fp = flow_against(scene, bundle.poses[mid], bundle.poses[prev],
                                    bundle.depths[prev], bundle.k, h, w);
  GroundTruthFlow fn = flow_against(scene, bundle.poses[mid], bundle.poses[next],
                                    bundle.depths[next], bundle.k, h, w);
  InterpolationTruth t;
  t.prev = prev;
  t.mid = mid;
  t.next = next;
  t.merge = MergeMask(h, w, 1, 0.5);
  t.covisible = ValidityMask(h, w);
  for (Eigen::Index p = 0; p < t.merge.pixels(); ++p) {
    const bool occ_prev = fp.occluded.data()[p];
    const bool occ_next = fn.occluded.data()[p];
    if (occ_next && !occ_prev) t.merge.data()[p] = 1.0;
    if (occ_prev && !occ_next) t.merge.data()[p] = 0.0;
    t.covisible.data()[p] = (!occ_prev && !occ_next) ? 1 : 0;
  }
  t.to_prev = std::move(fp.flow);
  t.to_next = std::move(fn.flow);
  return t;
}

Bundle make_triplet(const Scene& scene, const Trajectory& trajectory, const Intrinsics& k,
                    int height, int width) {
  k.validate();
  Bundle b;
  b.height = height;
  b.width = width;
  b.k = k;
  b.poses = trajectory.poses;
  for (int i = 0; i < 5; ++i) {
    RenderedView v = render_view(scene, b.poses[i], k, height, width);
    b.images[i] = std::move(v.image);
    b.depths[i] = std::move(v.depth);
  }
  b.interpolations[0] = make_interpolation(scene, b, 0, 1, 2);
  b.interpolations[1] = make_interpolation(scene, b, 0, 2, 4);
  b.interpolations[2] = make_interpolation(scene, b, 2, 3, 4);
  return b;
}

}  // namespace vifi
