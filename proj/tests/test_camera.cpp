#include "support.hpp"

#include "vifi/camera.hpp"
#include "vifi/scene.hpp"

#include <doctest.h>

using namespace vifi;

namespace {

const Intrinsics kK{100.0, 100.0, 32.0, 24.0};

PoseSE3 random_rigid(Rng& rng) {
  const Eigen::Vector3d w(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
  return {rotation_from_axis_angle(Eigen::Vector3d(w.normalized() * uniform(rng, 0.0, 3.0))),
          Eigen::Vector3d(uniform(rng, -2, 2), uniform(rng, -2, 2), uniform(rng, -2, 2))};
}

}  // namespace

TEST_SUITE("camera") {

TEST_CASE("project examples") {
  CHECK(project(Eigen::Vector3d(0, 0, 5), kK) == Eigen::Vector2d(32, 24));
  CHECK(project(Eigen::Vector3d(1, 0, 5), kK) == Eigen::Vector2d(52, 24));
  CHECK(project(Eigen::Vector3d(0.5, -0.25, 2), kK) == Eigen::Vector2d(57, 11.5));
  CHECK_THROWS_AS(project(Eigen::Vector3d(0, 0, 0), kK), std::domain_error);
  CHECK_THROWS_AS(project(Eigen::Vector3d(1, 0, -2), kK), std::domain_error);
}

TEST_CASE("backproject examples and round trip") {
  CHECK(backproject(Eigen::Vector2d(32, 24), 5.0, kK) == Eigen::Vector3d(0, 0, 5));
  CHECK(backproject(Eigen::Vector2d(52, 24), 5.0, kK) == Eigen::Vector3d(1, 0, 5));
  CHECK_THROWS_AS(backproject(Eigen::Vector2d(1, 1), 0.0, kK), std::invalid_argument);

  Rng rng(11);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Intrinsics k{uniform(rng, 30, 300), uniform(rng, 30, 300), uniform(rng, 0, 64),
                       uniform(rng, 0, 48)};
    const Eigen::Vector2d px(uniform(rng, -10, 74), uniform(rng, -10, 58));
    const double d = uniform(rng, 0.1, 100.0);
    const Eigen::Vector2d back = project(backproject(px, d, k), k);
    worst = std::max(worst, (back - px).cwiseAbs().maxCoeff() / std::max(1.0, px.cwiseAbs().maxCoeff()));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("transform_point and the pose group") {
  const Eigen::Vector3d p(0, 0, 5);
  CHECK(transform_point(PoseSE3::identity(), p) == p);
  CHECK(transform_point(PoseSE3{Eigen::Matrix3d::Identity(), Eigen::Vector3d(1, 0, 0)}, p) ==
        Eigen::Vector3d(1, 0, 5));

  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const PoseSE3 t = random_rigid(rng);
    const Eigen::Vector3d q(uniform(rng, -5, 5), uniform(rng, -5, 5), uniform(rng, -5, 5));
    CHECK((transform_point(pose_compose(t, pose_inverse(t)), q) - q).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((transform_point(pose_compose(pose_inverse(t), t), q) - q).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("pose_from_params") {
  const PoseSE3 zero = pose_from_params(PoseParams{});
  CHECK(zero.rotation == Eigen::Matrix3d::Identity());
  const PoseSE3 quarter = pose_from_params(PoseParams{Eigen::Vector3d(0, 0, M_PI / 2), {}});
  CHECK((quarter.rotation * Eigen::Vector3d(1, 0, 0) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-15);
  CHECK_THROWS_AS(pose_from_params(PoseParams{Eigen::Vector3d(0, 0, 3.5), {}}), std::invalid_argument);

  Rng rng(13);
  for (int i = 0; i < 100; ++i) {
    const Eigen::Vector3d w = Eigen::Vector3d(uniform(rng, -1, 1), uniform(rng, -1, 1), uniform(rng, -1, 1));
    CHECK(pose_from_params(PoseParams{w, {}}).is_rigid(1e-12));
  }
}

TEST_CASE("reproject_map with identity pose returns the lattice") {
  Rng rng(14);
  const ImageGrid depth = test::random_grid(rng, 6, 8, 1, 1.0, 20.0);
  const Reprojection r = reproject_map(depth, LinearPose(PoseSE3::identity()), kK);
  CHECK(test::max_abs_diff(r.coords, pixel_lattice(6, 8)) < 1e-12);
  CHECK(mask_count(r.valid) == 48);
}

TEST_CASE("fronto-parallel plane gives uniform parallax") {
  const double z = 8.0, tx = 0.3;
  const Intrinsics k{58, 58, 31.5, 23.5};
  const ImageGrid depth(48, 64, 1, z);
  // Source camera displaced by +tx: target-frame points move by -tx.
  const PoseSE3 t{Eigen::Matrix3d::Identity(), Eigen::Vector3d(-tx, 0, 0)};
  const Reprojection r = reproject_map(depth, LinearPose(t), k);
  const CoordMap lattice = pixel_lattice(48, 64);
  for (Eigen::Index p = 0; p < r.coords.pixels(); ++p) {
    CHECK(r.coords.data()[2 * p] - lattice.data()[2 * p] == doctest::Approx(-k.fx * tx / z).epsilon(1e-12));
    CHECK(std::abs(r.coords.data()[2 * p + 1] - lattice.data()[2 * p + 1]) < 1e-12);
  }

  SceneConfig sc;
  sc.mode = SceneMode::kPlane;
  sc.plane_depth = z;
  const Scene scene = generate_scene(3, sc);
  const PoseSE3 a = PoseSE3::identity();
  const PoseSE3 b{Eigen::Matrix3d::Identity(), Eigen::Vector3d(-tx, 0, 0)};
  const GroundTruthFlow gt = ground_truth_flow(scene, a, b, k, 48, 64);
  for (Eigen::Index p = 0; p < gt.flow.pixels(); ++p) {
    if (gt.occluded.data()[p]) continue;
    CHECK(std::abs(gt.flow.data()[2 * p] - (r.coords.data()[2 * p] - lattice.data()[2 * p])) < 1e-9);
  }
}

TEST_CASE("points that end up behind the source camera are invalid") {
  const ImageGrid depth(4, 4, 1, 5.0);
  const PoseSE3 t{Eigen::Matrix3d::Identity(), Eigen::Vector3d(0, 0, -6)};
  CHECK(mask_count(reproject_map(depth, LinearPose(t), kK).valid) == 0);
  ImageGrid bad = depth;
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(reproject_map(bad, LinearPose(PoseSE3::identity()), kK), std::invalid_argument);
}

}
