#include "support.hpp"

#include "vifi/consistency.hpp"
#include "vifi/gradcheck.hpp"

#include <doctest.h>

#include <array>

using namespace vifi;

TEST_SUITE("consistency") {

TEST_CASE("scale-invariant error closed forms") {
  Rng rng(51);
  const ImageGrid d = test::random_grid(rng, 6, 7, 1, 0.5, 20.0);
  const ValidityMask all = full_mask(6, 7);
  CHECK(scale_invariant_error(d, d, all, 0.5) == 0.0);
  for (double c : {0.5, 2.0, 10.0}) {
    ImageGrid cd = d;
    cd.data() *= c;
    for (double beta : {0.0, 0.5, 1.0}) {
      const double expected = (1.0 - beta) * std::log(c) * std::log(c);
      CHECK(std::abs(scale_invariant_error(d, cd, all, beta) - expected) < 1e-12);
    }
  }
  ImageGrid twice = d;
  twice.data() *= 2.0;
  CHECK(scale_invariant_error(d, twice, all, 0.5) == doctest::Approx(0.24023).epsilon(1e-5));

  CHECK(scale_invariant_error(ImageGrid(1, 1, 1, std::exp(1.0)), ImageGrid(1, 1, 1, 1.0),
                              full_mask(1, 1), 0.5) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("scale-invariant error is symmetric") {
  Rng rng(52);
  for (int i = 0; i < 20; ++i) {
    const ImageGrid a = test::random_grid(rng, 5, 6, 1, 0.5, 20.0);
    const ImageGrid b = test::random_grid(rng, 5, 6, 1, 0.5, 20.0);
    ValidityMask m(5, 6);
    for (Eigen::Index p = 0; p < m.size(); ++p) m.data()[p] = uniform01(rng) < 0.8;
    m.data()[0] = 1;
    for (double beta : {0.0, 0.5, 1.0}) {
      CHECK(std::abs(scale_invariant_error(a, b, m, beta) - scale_invariant_error(b, a, m, beta)) < 1e-12);
    }
  }
}

TEST_CASE("scale-invariant error rejects bad input") {
  const ImageGrid d(3, 3, 1, 2.0);
  CHECK_THROWS_AS(scale_invariant_error(d, d, full_mask(3, 3, false), 0.5), std::invalid_argument);
  ImageGrid bad = d;
  bad(1, 1) = 0.0;
  CHECK_THROWS_AS(scale_invariant_error(bad, d, full_mask(3, 3), 0.5), std::invalid_argument);
}

TEST_CASE("svdc and sadc") {
  Rng rng(53);
  const ImageGrid d = test::random_grid(rng, 6, 7, 1, 0.5, 20.0);
  CHECK(svdc(d, d) == 0.0);
  ImageGrid twice = d;
  twice.data() *= 2.0;
  CHECK(svdc(twice, d) == doctest::Approx(0.5 * std::log(2.0) * std::log(2.0)).epsilon(1e-12));

  ImageGrid restored = d;
  restored.data() /= 1.6;
  CHECK(std::abs(sadc(d, restored, 1.6, full_mask(6, 7))) < 1e-15);
  CHECK(sadc(d, d, 1.0, full_mask(6, 7)) == 0.0);
  CHECK_THROWS_AS(sadc(d, d, 1.0, full_mask(6, 7, false)), std::invalid_argument);
}

TEST_CASE("triplet consistency vanishes on consistent depths") {
  Rng rng(54);
  const ImageGrid d = test::random_grid(rng, 6, 7, 1, 0.5, 20.0);
  ImageGrid restored = d;
  restored.data() /= 1.25;
  ValidityMask m = full_mask(6, 7);
  m(0, 0) = 0;
  const TripletLosses t = triplet_consistency(d, d, restored, 1.25, m, ConsistencyConfig{});
  CHECK(std::abs(t.l_sv) < 1e-15);
  CHECK(std::abs(t.l_sa) < 1e-15);
  CHECK(std::abs(t.l_sa_m) < 1e-15);
  CHECK(std::abs(t.l_tc) < 1e-15);
}

TEST_CASE("triplet consistency gradient against finite differences") {
  const GradcheckOp op{"triplet_consistency", 1e-6, [](Rng& rng) {
    const int h = 5, w = 6;
    const ImageGrid multi = test::random_grid(rng, h, w, 1, 1.0, 10.0);
    const ImageGrid restored = test::random_grid(rng, h, w, 1, 0.5, 8.0);
    const double scale = uniform(rng, 1.2, 2.0);
    ValidityMask m(h, w);
    for (Eigen::Index p = 0; p < m.size(); ++p) m.data()[p] = uniform01(rng) < 0.8;
    m.data()[0] = 1;
    const ConsistencyConfig cfg;
    GradcheckCase c;
    c.x = test::random_grid(rng, h, w, 1, 1.0, 10.0).data();
    c.f = [=](const Eigen::VectorXd& x) {
      return triplet_consistency(ImageGrid(h, w, 1, x), multi, restored, scale, m, cfg).l_tc;
    };
    c.gradient =
        triplet_consistency_gradient(ImageGrid(h, w, 1, c.x), multi, restored, scale, m, cfg).d_depth.data();
    return c;
  }};
  const GradcheckRow row = run_gradcheck(op, GradcheckOptions{});
  CHECK(row.samples == 100);
  CHECK(row.max_rel_error < 1e-6);
}

TEST_CASE("total objective arithmetic") {
  const ConsistencyConfig cfg;
  std::array<TripletLosses, 3> zero{};
  CHECK(total_objective(zero, cfg) == 0.0);

  std::array<TripletLosses, 3> unit{};
  for (auto& t : unit) {
    t.l_ss = t.l_ss_m = t.l_ss_tilde = 1.0;
    t.l_sv = t.l_sa = t.l_sa_m = 1.0;
    t.finalize(cfg.lambda);
  }
  CHECK(total_objective(unit, cfg) == doctest::Approx(3 * (3.0 + 0.2 * 3.0)).epsilon(1e-15));
  CHECK(total_objective(unit, ConsistencyConfig{0.5, 0.0}) == doctest::Approx(9.0).epsilon(1e-15));
}

}
