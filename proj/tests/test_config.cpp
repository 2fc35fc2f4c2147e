#include "vifi/config.hpp"

#include <doctest.h>

using namespace vifi;

TEST_SUITE("config") {

TEST_CASE("defaults carry the published constants") {
  const RunConfig cfg;
  CHECK(cfg.alpha == 0.85);
  CHECK(cfg.gamma == 0.001);
  CHECK(cfg.beta == 0.5);
  CHECK(cfg.lambda == 0.2);
  CHECK(cfg.octaves == 10);
  CHECK(cfg.aug_scale_min == 1.2);
  CHECK(cfg.aug_scale_max == 2.0);
  CHECK(cfg.aug_theta_max_deg == 5.0);
  CHECK(cfg.min_depth == 0.1);
  CHECK(cfg.max_depth == 100.0);
  CHECK(cfg.eval_cap == 80.0);
  CHECK_NOTHROW(cfg.validate());

  const OptimConfig o = cfg.optim();
  CHECK(o.objective.photo.alpha == 0.85);
  CHECK(o.objective.consistency.lambda == 0.2);
  CHECK(o.objective.toggles.multi_frame);
  CHECK(o.objective.toggles.augmentation);
}

TEST_CASE("parsing") {
  const RunConfig cfg = parse_config(
      "# experiment\n"
      "seed = 42\n"
      "scene_mode = plane   # flat\n"
      "\n"
      "lambda=0.5\n"
      "use_svdc = false\n");
  CHECK(cfg.seed == 42);
  CHECK(cfg.scene_mode == "plane");
  CHECK(cfg.lambda == 0.5);
  CHECK_FALSE(cfg.use_svdc);
  CHECK(cfg.scene().mode == SceneMode::kPlane);
}

TEST_CASE("unknown keys are rejected by name") {
  try {
    parse_config("lamda = 0.3\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("'lamda'") != std::string::npos);
  }
  RunConfig cfg;
  CHECK_THROWS_AS(apply_override(cfg, "gama=0.1"), ConfigError);
}

TEST_CASE("malformed values and lines") {
  CHECK_THROWS_AS(parse_config("seed = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = 0.8x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("alpha = nan\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("use_sadc = maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("just words\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("seed =\n"), ConfigError);
  RunConfig cfg;
  CHECK_THROWS_AS(apply_override(cfg, "seed"), ConfigError);
}

TEST_CASE("validation") {
  RunConfig cfg;
  cfg.scene_mode = "cave";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.aug_scale_min = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = RunConfig{};
  cfg.init_depth = 200.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("formatting round trips every key") {
  RunConfig cfg;
  cfg.seed = 9;
  cfg.step_size = 0.1234567890123;
  cfg.out_dir = "runs/a";
  cfg.use_sadc = false;
  const std::string text = format_config(cfg);
  const RunConfig back = parse_config(text);
  CHECK(format_config(back) == text);
  CHECK(back.step_size == cfg.step_size);
  CHECK(back.out_dir == "runs/a");
  CHECK(config_keys().size() == static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')));
}

}
