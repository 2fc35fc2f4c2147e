#include "vifi/gradcheck.hpp"

#include <doctest.h>

#include <cmath>

using namespace vifi;

TEST_SUITE("gradcheck") {

TEST_CASE("registry covers every differentiable operation") {
  const auto& ops = gradcheck_registry();
  REQUIRE(ops.size() == 15);
  const char* names[] = {"bilinear_sample.coords", "bilinear_sample.grid", "reproject_map.depth",
                         "reproject_map.pose",     "pose_from_params",     "ssim_map",
                         "photometric_error",      "smoothness_loss",      "scale_invariant_error",
                         "svdc",                   "sadc",                 "affine_inverse_depth",
                         "decode_depth",           "self_supervised_loss", "objective"};
  for (std::size_t i = 0; i < ops.size(); ++i) {
    CHECK(ops[i].name == names[i]);
    CHECK(ops[i].threshold <= 1e-4);
  }
}

TEST_CASE("a known gradient passes and a wrong one fails") {
  const GradcheckOp cube{"cube", 1e-6, [](Rng& rng) {
                           GradcheckCase c;
                           c.x = Eigen::VectorXd::NullaryExpr(6, [&] { return uniform(rng, -2, 2); });
                           c.f = [](const Eigen::VectorXd& x) { return x.array().cube().sum(); };
                           c.gradient = 3.0 * c.x.array().square();
                           return c;
                         }};
  GradcheckOptions opts;
  opts.samples = 40;
  const GradcheckRow ok = run_gradcheck(cube, opts);
  CHECK(ok.passed);
  CHECK(ok.samples == 40);
  CHECK(ok.max_rel_error < 1e-8);

  GradcheckOp off = cube;
  off.make = [&](Rng& rng) {
    GradcheckCase c = cube.make(rng);
    c.gradient *= 1.01;
    return c;
  };
  const GradcheckRow bad = run_gradcheck(off, opts);
  CHECK_FALSE(bad.passed);
  CHECK(bad.max_rel_error == doctest::Approx(0.01 / 1.01).epsilon(1e-4));
}

TEST_CASE("kinks are skipped rather than failed") {
  const GradcheckOp abs_op{"abs", 1e-6, [](Rng& rng) {
                             GradcheckCase c;
                             // Half the coordinates sit on the kink at zero.
                             c.x = Eigen::VectorXd::NullaryExpr(8, [&] { return uniform01(rng) < 0.5 ? 0.0 : uniform(rng, 0.5, 1); });
                             c.f = [](const Eigen::VectorXd& x) { return x.cwiseAbs().sum(); };
                             c.gradient = c.x.unaryExpr([](double v) { return v > 0 ? 1.0 : 0.0; });
                             return c;
                           }};
  GradcheckOptions opts;
  opts.samples = 30;
  const GradcheckRow row = run_gradcheck(abs_op, opts);
  CHECK(row.passed);
  CHECK(row.skipped > 0);
}

TEST_CASE("suite passes and the sign-flip self test fails everywhere") {
  GradcheckOptions opts;
  opts.samples = 20;
  for (const GradcheckRow& row : run_gradcheck_suite(opts)) {
    INFO(row.name, " rel ", row.max_rel_error);
    CHECK(row.passed);
    CHECK(row.max_rel_error <= row.threshold);
  }
  opts.inject_sign_flip = true;
  for (const GradcheckRow& row : run_gradcheck_suite(opts)) {
    INFO(row.name);
    CHECK_FALSE(row.passed);
    CHECK(row.max_rel_error == doctest::Approx(2.0));
  }
}

TEST_CASE("results depend only on the seed") {
  GradcheckOptions opts;
  opts.samples = 10;
  const GradcheckOp& op = gradcheck_registry()[5];
  const GradcheckRow a = run_gradcheck(op, opts);
  const GradcheckRow b = run_gradcheck(op, opts);
  CHECK(a.max_rel_error == b.max_rel_error);
  CHECK(a.skipped == b.skipped);
  CHECK(format_gradcheck_table({a}).find("ssim_map") != std::string::npos);
}

}
