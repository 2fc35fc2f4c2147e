#include "support.hpp"

#include "vifi/imgrid.hpp"
#include "vifi/parallel.hpp"

#include <doctest.h>

using namespace vifi;

TEST_SUITE("imgrid") {

TEST_CASE("sampling the integer lattice reproduces the grid") {
  Rng rng(3);
  const ImageGrid g = test::random_grid(rng, 5, 7, 3, 0.0, 1.0);
  const SampleResult s = bilinear_sample(g, pixel_lattice(5, 7));
  CHECK(s.values.data() == g.data());
  CHECK(mask_count(s.valid) == 35);
}

TEST_CASE("half-pixel shift on a ramp is exact in the interior") {
  const int h = 4, w = 6;
  ImageGrid ramp(h, w, 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) ramp(y, x) = x;
  CoordMap coords = pixel_lattice(h, w);
  for (Eigen::Index p = 0; p < coords.pixels(); ++p) coords.data()[2 * p] += 0.5;
  const SampleResult s = bilinear_sample(ramp, coords);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x + 1 < w; ++x) {
      CHECK(s.values(y, x) == doctest::Approx(x + 0.5).epsilon(1e-15));
      CHECK(s.valid(y, x) == 1);
    }
    CHECK(s.valid(y, w - 1) == 0);
  }
}

TEST_CASE("coordinates far outside clamp to the corner and are invalid") {
  Rng rng(4);
  const ImageGrid g = test::random_grid(rng, 4, 5, 2, 0.0, 1.0);
  CoordMap coords(3, 3, 2, Eigen::VectorXd::Constant(18, -3.0));
  const SampleResult s = bilinear_sample(g, coords);
  for (Eigen::Index p = 0; p < s.values.pixels(); ++p) {
    CHECK(s.values.data()[2 * p] == g(0, 0, 0));
    CHECK(s.values.data()[2 * p + 1] == g(0, 0, 1));
    CHECK(s.valid.data()[p] == 0);
  }
}

TEST_CASE("sampling an empty grid is rejected") {
  CHECK_THROWS_AS(bilinear_sample(ImageGrid(0, 0, 1), pixel_lattice(2, 2)), std::invalid_argument);
}

TEST_CASE("spatial gradients") {
  SUBCASE("constant grid") {
    const auto [gx, gy] = spatial_gradients(ImageGrid(4, 5, 2, 0.7));
    CHECK(gx.data().cwiseAbs().maxCoeff() == 0.0);
    CHECK(gy.data().cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("ramp 2x") {
    ImageGrid g(3, 5, 1);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 5; ++x) g(y, x) = 2.0 * x;
    const auto [gx, gy] = spatial_gradients(g);
    for (int y = 0; y < 3; ++y) {
      for (int x = 0; x + 1 < 5; ++x) CHECK(gx(y, x) == 2.0);
      for (int x = 0; x < 5; ++x) CHECK(gy(y, x) == 0.0);
    }
  }
  SUBCASE("2x2 direct differencing") {
    ImageGrid g(2, 2, 1);
    g(0, 0) = 0; g(0, 1) = 1; g(1, 0) = 2; g(1, 1) = 4;
    const auto [gx, gy] = spatial_gradients(g);
    CHECK(gx(0, 0) == 1); CHECK(gx(0, 1) == 0); CHECK(gx(1, 0) == 2); CHECK(gx(1, 1) == 0);
    CHECK(gy(0, 0) == 2); CHECK(gy(0, 1) == 3); CHECK(gy(1, 0) == 0); CHECK(gy(1, 1) == 0);
  }
  SUBCASE("degenerate grid") {
    CHECK_THROWS_AS(spatial_gradients(ImageGrid(1, 6, 1)), std::invalid_argument);
  }
}

TEST_CASE("resample_scale") {
  Rng rng(5);
  const ImageGrid g = test::random_grid(rng, 6, 8, 2, 0.0, 1.0);
  CHECK(resample_scale(g, 1.0).data() == g.data());

  const ImageGrid c = resample_scale(ImageGrid(6, 8, 1, 0.25), 0.37);
  CHECK(c.data().cwiseAbs().maxCoeff() == 0.25);
  CHECK(c.data().minCoeff() == 0.25);

  CHECK_THROWS_AS(resample_scale(g, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(resample_scale(g, -1.0), std::invalid_argument);
}

TEST_CASE("downsampled ramp matches inverse mapping of each output pixel") {
  ImageGrid ramp(4, 4, 1);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) ramp(y, x) = 3.0 * x - 1.5 * y + 0.25;
  const ImageGrid out = resample_scale(ramp, 0.5);
  REQUIRE(out.height() == 2);
  REQUIRE(out.width() == 2);
  for (int y = 0; y < 2; ++y) {
    for (int x = 0; x < 2; ++x) {
      // Output pixel centers map back to (x + 0.5) / 0.5 - 0.5 in the source;
      // a linear field is reproduced exactly by bilinear interpolation.
      const double sx = (x + 0.5) * 2.0 - 0.5;
      const double sy = (y + 0.5) * 2.0 - 0.5;
      CHECK(std::abs(out(y, x) - (3.0 * sx - 1.5 * sy + 0.25)) < 1e-12);
    }
  }
}

TEST_CASE("backward warp with an integer flow shifts the grid") {
  Rng rng(6);
  const ImageGrid g = test::random_grid(rng, 5, 6, 1, 0.0, 1.0);
  FlowField f(5, 6, 2);
  for (Eigen::Index p = 0; p < f.pixels(); ++p) f.data()[2 * p] = 2.0;
  const ImageGrid w = backward_warp(g, f);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x + 2 < 6; ++x) CHECK(w(y, x) == g(y, x + 2));
}

TEST_CASE("bilinear sampling is independent of the job count") {
  Rng rng(8);
  const ImageGrid g = test::random_grid(rng, 20, 30, 3, 0.0, 1.0);
  CoordMap coords(20, 30, 2);
  for (Eigen::Index p = 0; p < coords.pixels(); ++p) {
    coords.data()[2 * p] = uniform(rng, -2.0, 32.0);
    coords.data()[2 * p + 1] = uniform(rng, -2.0, 22.0);
  }
  const ImageGrid one = bilinear_sample(g, coords).values;
  set_jobs(3);
  const ImageGrid three = bilinear_sample(g, coords).values;
  set_jobs(1);
  CHECK(one.data() == three.data());
}

}
