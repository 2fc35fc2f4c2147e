#include "vifi/config.hpp"

#include "vifi/io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <variant>

namespace vifi {

namespace {

using Field = std::variant<double RunConfig::*, int RunConfig::*, bool RunConfig::*,
                           std::string RunConfig::*, std::uint64_t RunConfig::*>;

struct Entry {
  const char* key;
  Field field;
};

const std::vector<Entry>& entries() {
  static const std::vector<Entry> table = {
      {"seed", &RunConfig::seed},
      {"scene_mode", &RunConfig::scene_mode},
      {"plane_depth", &RunConfig::plane_depth},
      {"base_depth", &RunConfig::base_depth},
      {"relief_amplitude", &RunConfig::relief_amplitude},
      {"texture_freq_min", &RunConfig::texture_freq_min},
      {"texture_freq_max", &RunConfig::texture_freq_max},
      {"height", &RunConfig::height},
      {"width", &RunConfig::width},
      {"fx", &RunConfig::fx},
      {"fy", &RunConfig::fy},
      {"cx", &RunConfig::cx},
      {"cy", &RunConfig::cy},
      {"step_tx", &RunConfig::step_tx},
      {"step_ty", &RunConfig::step_ty},
      {"step_tz", &RunConfig::step_tz},
      {"step_rx", &RunConfig::step_rx},
      {"step_ry", &RunConfig::step_ry},
      {"step_rz", &RunConfig::step_rz},
      {"aug_scale_min", &RunConfig::aug_scale_min},
      {"aug_scale_max", &RunConfig::aug_scale_max},
      {"aug_theta_max_deg", &RunConfig::aug_theta_max_deg},
      {"aug_seed", &RunConfig::aug_seed},
      {"alpha", &RunConfig::alpha},
      {"gamma", &RunConfig::gamma},
      {"beta", &RunConfig::beta},
      {"lambda", &RunConfig::lambda},
      {"octaves", &RunConfig::octaves},
      {"levels", &RunConfig::levels},
      {"feature_channels", &RunConfig::feature_channels},
      {"min_depth", &RunConfig::min_depth},
      {"max_depth", &RunConfig::max_depth},
      {"eval_min_depth", &RunConfig::eval_min_depth},
      {"eval_cap", &RunConfig::eval_cap},
      {"use_photometric", &RunConfig::use_photometric},
      {"use_smoothness", &RunConfig::use_smoothness},
      {"use_multi_frame", &RunConfig::use_multi_frame},
      {"use_augmentation", &RunConfig::use_augmentation},
      {"use_svdc", &RunConfig::use_svdc},
      {"use_sadc", &RunConfig::use_sadc},
      {"optimize_pose", &RunConfig::optimize_pose},
      {"max_iters", &RunConfig::max_iters},
      {"step_size", &RunConfig::step_size},
      {"momentum", &RunConfig::momentum},
      {"pose_step_size", &RunConfig::pose_step_size},
      {"init_depth", &RunConfig::init_depth},
      {"init_multi_depth", &RunConfig::init_multi_depth},
      {"strict", &RunConfig::strict},
      {"gradcheck_samples", &RunConfig::gradcheck_samples},
      {"out_dir", &RunConfig::out_dir},
  };
  return table;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* kind) {
  throw ConfigError("config key '" + key + "': '" + value + "' is not " + kind);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* kind) {
  T v{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, v);
  if (ec != std::errc() || ptr != end) bad_value(key, value, kind);
  return v;
}

void assign(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const Entry& e : entries()) {
    if (key != e.key) continue;
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          if constexpr (std::is_same_v<T, double>) {
            const double v = parse_number<double>(key, value, "a number");
            if (!std::isfinite(v)) bad_value(key, value, "a finite number");
            cfg.*member = v;
          } else if constexpr (std::is_same_v<T, int>) {
            cfg.*member = parse_number<int>(key, value, "an integer");
          } else if constexpr (std::is_same_v<T, std::uint64_t>) {
            cfg.*member = parse_number<std::uint64_t>(key, value, "an unsigned integer");
          } else if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") {
              cfg.*member = true;
            } else if (value == "false" || value == "0") {
              cfg.*member = false;
            } else {
              bad_value(key, value, "a boolean");
            }
          } else {
            cfg.*member = value;
          }
        },
        e.field);
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

std::string format_field(const RunConfig& cfg, const Field& field) {
  return std::visit(
      [&](auto member) -> std::string {
        using T = std::remove_cvref_t<decltype(cfg.*member)>;
        if constexpr (std::is_same_v<T, double>) {
          return format_double(cfg.*member);
        } else if constexpr (std::is_same_v<T, bool>) {
          return cfg.*member ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return cfg.*member;
        } else {
          return std::to_string(cfg.*member);
        }
      },
      field);
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

void RunConfig::validate() const {
  require(scene_mode == "terrain" || scene_mode == "plane", "scene_mode must be 'terrain' or 'plane'");
  require(height >= 8 && width >= 8, "height and width must be at least 8");
  require(fx > 0.0 && fy > 0.0, "fx and fy must be positive");
  require(aug_scale_min >= 1.0 && aug_scale_max >= aug_scale_min, "need 1 <= aug_scale_min <= aug_scale_max");
  require(aug_theta_max_deg >= 0.0 && aug_theta_max_deg < 90.0, "aug_theta_max_deg must lie in [0, 90)");
  require(alpha >= 0.0 && alpha <= 1.0, "alpha must lie in [0, 1]");
  require(gamma >= 0.0, "gamma must be nonnegative");
  require(beta >= 0.0 && beta <= 1.0, "beta must lie in [0, 1]");
  require(lambda >= 0.0, "lambda must be nonnegative");
  require(octaves >= 1 && levels >= 1, "octaves and levels must be positive");
  require(feature_channels >= 1, "feature_channels must be positive");
  require(min_depth > 0.0 && max_depth > min_depth, "need 0 < min_depth < max_depth");
  require(eval_min_depth > 0.0 && eval_cap > eval_min_depth, "need 0 < eval_min_depth < eval_cap");
  require(init_depth > min_depth && init_depth < max_depth, "init_depth must lie inside (min_depth, max_depth)");
  require(init_multi_depth > min_depth && init_multi_depth < max_depth,
          "init_multi_depth must lie inside (min_depth, max_depth)");
  require(max_iters >= 0, "max_iters must be nonnegative");
  require(step_size > 0.0 && pose_step_size > 0.0, "step sizes must be positive");
  require(momentum >= 0.0 && momentum < 1.0, "momentum must lie in [0, 1)");
  require(gradcheck_samples >= 1, "gradcheck_samples must be positive");
  require(!out_dir.empty(), "out_dir must not be empty");
}

SceneConfig RunConfig::scene() const {
  SceneConfig s;
  s.mode = scene_mode == "plane" ? SceneMode::kPlane : SceneMode::kTerrain;
  s.plane_depth = plane_depth;
  s.base_depth = base_depth;
  s.relief_amplitude = relief_amplitude;
  s.texture_freq_min = texture_freq_min;
  s.texture_freq_max = texture_freq_max;
  return s;
}

Intrinsics RunConfig::intrinsics() const { return {fx, fy, cx, cy}; }

TrajectorySpec RunConfig::trajectory() const {
  return {{step_tx, step_ty, step_tz}, {step_rx, step_ry, step_rz}};
}

AugmentationRanges RunConfig::augmentation() const {
  return {aug_scale_min, aug_scale_max, aug_theta_max_deg};
}

FusionConfig RunConfig::fusion() const {
  FusionConfig f;
  f.levels = levels;
  f.octaves = octaves;
  return f;
}

EvalConfig RunConfig::eval() const { return {eval_min_depth, eval_cap}; }

OptimConfig RunConfig::optim() const {
  OptimConfig o;
  o.max_iters = max_iters;
  o.step_size = step_size;
  o.momentum = momentum;
  o.pose_step_size = pose_step_size;
  o.objective.photo.alpha = alpha;
  o.objective.photo.gamma = gamma;
  o.objective.consistency.beta = beta;
  o.objective.consistency.lambda = lambda;
  o.objective.toggles = {use_photometric, use_smoothness, use_multi_frame,
                         use_augmentation, use_svdc,      use_sadc};
  o.objective.optimize_pose = optimize_pose;
  return o;
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(number) + ": empty key or value");
    }
    assign(base, key, value);
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  return parse_config(read_text(path), std::move(base));
}

void apply_override(RunConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(assignment) + "' must look like key=value");
  }
  const std::string key = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (key.empty() || value.empty()) {
    throw ConfigError("override '" + std::string(assignment) + "' has an empty key or value");
  }
  assign(cfg, key, value);
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const Entry& e : entries()) out += std::string(e.key) + " = " + format_field(cfg, e.field) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const Entry& e : entries()) keys.emplace_back(e.key);
  return keys;
}

}  // namespace vifi
