#pragma once

#include "vifi/affine.hpp"
#include "vifi/error.hpp"
#include "vifi/fusion.hpp"
#include "vifi/metrics.hpp"
#include "vifi/optim.hpp"
#include "vifi/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace vifi {

/// Flat run configuration. Parsed from "key = value" lines; '#' starts a
/// comment. Unknown keys are rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string scene_mode = "terrain";  ///< "terrain" or "plane"
  double plane_depth = 8.0;
  double base_depth = 10.0;
  double relief_amplitude = 2.0;
  double texture_freq_min = 0.5;
  double texture_freq_max = 2.0;

  int height = 48;
  int width = 64;
  double fx = 58.0;
  double fy = 58.0;
  double cx = 31.5;
  double cy = 23.5;

  double step_tx = 0.15;
  double step_ty = 0.02;
  double step_tz = 0.05;
  double step_rx = 0.0;
  double step_ry = 0.003;
  double step_rz = 0.0;

  double aug_scale_min = 1.2;
  double aug_scale_max = 2.0;
  double aug_theta_max_deg = 5.0;
  std::uint64_t aug_seed = 11;  ///< draws the per-target augmentations

  double alpha = 0.85;
  double gamma = 0.001;
  double beta = 0.5;
  double lambda = 0.2;
  int octaves = 10;
  int levels = 4;
  int feature_channels = 3;

  double min_depth = 0.1;
  double max_depth = 100.0;
  double eval_min_depth = 0.1;
  double eval_cap = 80.0;

  bool use_photometric = true;
  bool use_smoothness = true;
  bool use_multi_frame = true;
  bool use_augmentation = true;
  bool use_svdc = true;
  bool use_sadc = true;
  bool optimize_pose = false;

  int max_iters = 2000;
  double step_size = 0.05;
  double momentum = 0.9;
  double pose_step_size = 1e-4;
  double init_depth = 5.0;
  double init_multi_depth = 6.0;
  bool strict = false;

  int gradcheck_samples = 100;
  std::string out_dir = "out";

  void validate() const;

  SceneConfig scene() const;
  Intrinsics intrinsics() const;
  TrajectorySpec trajectory() const;
  AugmentationRanges augmentation() const;
  FusionConfig fusion() const;
  EvalConfig eval() const;
  OptimConfig optim() const;
};

/// Applies every "key = value" line of `text` on top of `base`.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
/// Applies one "key=value" override.
void apply_override(RunConfig& cfg, std::string_view assignment);
/// Every key in a stable order, formatted so parse_config reads it back.
std::string format_config(const RunConfig& cfg);
std::vector<std::string> config_keys();

}  // namespace vifi
