#pragma once

#include "vifi/camera.hpp"
#include "vifi/imgrid.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <vector>

namespace vifi {

enum class SceneMode { kPlane, kTerrain };

struct SceneConfig {
  SceneMode mode = SceneMode::kTerrain;
  double plane_depth = 8.0;      ///< world z of the plane (plane mode)
  double base_depth = 10.0;      ///< mean world z of the terrain
  double relief_amplitude = 2.0; ///< total sinusoid amplitude of the terrain
  int relief_terms = 3;
  int texture_terms = 8;
  /// Texture angular frequencies (rad/m) at the reference depth; scaled by
  /// reference / (plane or base depth) so image-space detail is similar.
  double texture_freq_min = 0.5;
  double texture_freq_max = 2.0;
  double reference_depth = 8.0;
};

/// A sinusoid a * sin(w . (X, Y) + phase).
struct Wave {
  double amplitude;
  Eigen::Vector2d frequency;
  double phase;

  double operator()(double x, double y) const {
    return amplitude * std::sin(frequency.x() * x + frequency.y() * y + phase);
  }
};

/// Height-field world: the surface is z = height(x, y) in world
/// coordinates, viewed by cameras looking roughly along +z.
class Scene {
 public:
  Scene(SceneConfig config, std::vector<Wave> relief, std::vector<Wave> texture);

  const SceneConfig& config() const noexcept { return config_; }
  const std::vector<Wave>& relief() const noexcept { return relief_; }
  const std::vector<Wave>& texture() const noexcept { return texture_; }

  double height(double x, double y) const;
  double albedo(double x, double y) const;
  /// Procedural feature channel c at a surface point; channel 0 is albedo.
  double feature(double x, double y, int channel) const;

  static constexpr double kMinDepth = 1.0;
  static constexpr double kMaxDepth = 50.0;

 private:
  SceneConfig config_;
  std::vector<Wave> relief_;
  std::vector<Wave> texture_;
};

Scene generate_scene(std::uint64_t seed, const SceneConfig& config = {});

/// Surface hit of the ray through `pixel` of a camera with world->camera
/// pose `pose`. Returns the world point; throws if the ray misses.
Eigen::Vector3d cast_ray(const Scene& scene, const PoseSE3& pose, const Intrinsics& k,
                         const Eigen::Vector2d& pixel);

struct RenderedView {
  ImageGrid image;  ///< 1 channel albedo in [0, 1]
  ImageGrid depth;  ///< camera-frame z of the hit point
};

RenderedView render_view(const Scene& scene, const PoseSE3& pose, const Intrinsics& k, int height,
                         int width);

/// Oracle feature grid: `channels` procedural functions of the hit point.
ImageGrid render_features(const Scene& scene, const PoseSE3& pose, const Intrinsics& k,
                          int height, int width, int channels);

struct GroundTruthFlow {
  FlowField flow;          ///< position in b minus pixel in a
  ValidityMask occluded;   ///< 1 if hidden in b (z-test) or outside b's frame
};

/// Depth tolerance of the visibility z-test in meters.
inline constexpr double kOcclusionTolerance = 0.01;

GroundTruthFlow ground_truth_flow(const Scene& scene, const PoseSE3& pose_a,
                                  const PoseSE3& pose_b, const Intrinsics& k, int height,
                                  int width);

/// Per-step camera motion: camera i (offset k = i - 2) has center k * step
/// and camera-to-world rotation exp(k * step_rotation).
struct TrajectorySpec {
  Eigen::Vector3d step_translation{0.15, 0.02, 0.05};
  Eigen::Vector3d step_rotation{0.0, 0.003, 0.0};
};

/// World->camera poses at positions t-2 .. t+2.
struct Trajectory {
  std::array<PoseSE3, 5> poses;
};

Trajectory make_trajectory(const TrajectorySpec& spec);

/// Flow and blend mask for interpolating position `mid` from `prev`/`next`.
struct InterpolationTruth {
  int prev = 0;
  int mid = 0;
  int next = 0;
  FlowField to_prev;
  FlowField to_next;
  MergeMask merge;       ///< 1 occluded in next only, 0 occluded in prev only, else 0.5
  ValidityMask covisible;
};

/// Everything rendered for positions t-2 .. t+2 (indices 0..4).
struct Bundle {
  int height = 0;
  int width = 0;
  Intrinsics k;
  std::array<ImageGrid, 5> images;
  std::array<ImageGrid, 5> depths;
  std::array<PoseSE3, 5> poses;
  /// Middles 1, 2, 3 from (0, 2), (0, 4), (2, 4).
  std::array<InterpolationTruth, 3> interpolations;

  static constexpr std::array<int, 3> kTargets{1, 2, 3};
  static constexpr std::array<int, 2> kSources{0, 4};

  /// T_{target -> source} = pose_source ∘ pose_target^-1.
  PoseSE3 relative(int target, int source) const;
};

Bundle make_triplet(const Scene& scene, const Trajectory& trajectory, const Intrinsics& k,
                    int height, int width);

InterpolationTruth make_interpolation(const Scene& scene, const Bundle& bundle, int prev, int mid,
                                      int next);

}  // namespace vifi
