#pragma once

#include "vifi/affine.hpp"
#include "vifi/config.hpp"
#include "vifi/metrics.hpp"
#include "vifi/optim.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace vifi {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitNumeric = 2, kExitIo = 3 };

/// Parses argv, runs one subcommand and maps failures to exit codes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct EvalFlags {
  bool median_scale = false;
  double cap = 80.0;
  double min_depth = 0.1;
};

struct AugcheckFlags {
  double scale = 2.0;
  double theta_deg = 0.0;
  std::optional<double> crop_x;  ///< defaults to the image center
  std::optional<double> crop_y;
};

int cmd_synth(const RunConfig& cfg, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, bool inject_sign_flip, std::ostream& out);
/// Optimizes on `bundle_dir` when given, otherwise on a bundle rendered from cfg.
int cmd_optimize(const RunConfig& cfg, const std::optional<std::filesystem::path>& bundle_dir,
                 std::ostream& out);
int cmd_eval(const std::filesystem::path& pred, const std::filesystem::path& gt,
             const EvalFlags& flags, std::ostream& out);
int cmd_fuse_demo(const RunConfig& cfg, std::ostream& out);
int cmd_augcheck(const RunConfig& cfg, const AugcheckFlags& flags, std::ostream& out);

Bundle synthesize_bundle(const RunConfig& cfg);

/// Seven metrics, one "name value" line each, in the order
/// abs_rel sq_rel rmse rmse_log delta1 delta2 delta3.
std::string format_metrics(const DepthMetrics& m, int decimals = 3);

/// Header "iter,total,pe,sm,sv,sa,sa_m" then one %.17g row per entry.
std::string format_loss_csv(const std::vector<ObjectiveValue>& curve);

/// PSNR over masked pixels for signals in [0, 1]; +inf when they match exactly.
double masked_psnr(const ImageGrid& a, const ImageGrid& b, const ValidityMask& mask);

/// PSNR reported for an exact match, or one within float rounding of it.
inline constexpr double kPsnrSentinel = 99.0;

}  // namespace vifi
