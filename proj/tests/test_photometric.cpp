#include "support.hpp"

#include "vifi/photometric.hpp"
#include "vifi/scene.hpp"

#include <doctest.h>

#include <array>
#include <vector>

using namespace vifi;

namespace {

// Direct windowed SSIM: 3x3 box window with replicated borders, averaged
// over channels.
double naive_ssim(const ImageGrid& a, const ImageGrid& b, int y, int x, const PhotoConfig& cfg) {
  const int r = cfg.ssim_window / 2;
  double acc = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> va, vb;
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const int yy = std::clamp(y + dy, 0, a.height() - 1);
        const int xx = std::clamp(x + dx, 0, a.width() - 1);
        va.push_back(a(yy, xx, c));
        vb.push_back(b(yy, xx, c));
      }
    }
    const double n = static_cast<double>(va.size());
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < va.size(); ++i) { ma += va[i]; mb += vb[i]; }
    ma /= n;
    mb /= n;
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < va.size(); ++i) {
      saa += (va[i] - ma) * (va[i] - ma);
      sbb += (vb[i] - mb) * (vb[i] - mb);
      sab += (va[i] - ma) * (vb[i] - mb);
    }
    saa /= n; sbb /= n; sab /= n;
    acc += (2 * ma * mb + cfg.c1) * (2 * sab + cfg.c2) /
           ((ma * ma + mb * mb + cfg.c1) * (saa + sbb + cfg.c2));
  }
  return acc / a.channels();
}

}  // namespace

TEST_SUITE("photometric") {

TEST_CASE("SSIM of two constants is the luminance term") {
  const PhotoConfig cfg;
  const ImageGrid s = ssim_map(ImageGrid(5, 6, 1, 0.3), ImageGrid(5, 6, 1, 0.5), cfg);
  const double expected = 0.3001 / 0.3401;
  for (Eigen::Index p = 0; p < s.size(); ++p) CHECK(s.data()[p] == doctest::Approx(expected).epsilon(1e-13));
  CHECK(expected == doctest::Approx(0.88239).epsilon(1e-5));
}

TEST_CASE("SSIM map matches direct windowed evaluation") {
  Rng rng(21);
  const PhotoConfig cfg;
  const ImageGrid a = test::random_grid(rng, 8, 8, 3, 0.0, 1.0);
  const ImageGrid b = test::random_grid(rng, 8, 8, 3, 0.0, 1.0);
  const ImageGrid s = ssim_map(a, b, cfg);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) CHECK(std::abs(s(y, x) - naive_ssim(a, b, y, x, cfg)) < 1e-12);
  CHECK_THROWS_AS(ssim_map(a, ImageGrid(8, 7, 3), cfg), std::invalid_argument);
}

TEST_CASE("photometric error closed forms") {
  const PhotoConfig cfg;
  Rng rng(22);
  const ImageGrid a = test::random_grid(rng, 6, 7, 3, 0.0, 1.0);
  CHECK(photometric_error(a, a, cfg).data().cwiseAbs().maxCoeff() < 1e-15);

  const ImageGrid e = photometric_error(ImageGrid(4, 4, 1, 0.3), ImageGrid(4, 4, 1, 0.5), cfg);
  const double expected = 0.425 * (1.0 - 0.3001 / 0.3401) + 0.15 * 0.2;
  for (Eigen::Index p = 0; p < e.size(); ++p) CHECK(e.data()[p] == doctest::Approx(expected).epsilon(1e-13));
  CHECK(expected == doctest::Approx(0.07998).epsilon(1e-4));
}

TEST_CASE("min reprojection") {
  const PhotoConfig cfg;
  Rng rng(23);
  const ImageGrid t = test::random_grid(rng, 6, 7, 1, 0.0, 1.0);
  std::vector<Reconstruction> recs;
  for (int i = 0; i < 3; ++i) {
    ValidityMask v(6, 7);
    for (Eigen::Index p = 0; p < v.size(); ++p) v.data()[p] = uniform01(rng) < 0.7;
    recs.push_back({test::random_grid(rng, 6, 7, 1, 0.0, 1.0), v});
  }

  SUBCASE("single source") {
    const MinReprojection m = min_reprojection(t, std::span(recs.data(), 1), cfg);
    const ImageGrid e = photometric_error(t, recs[0].image, cfg);
    for (Eigen::Index p = 0; p < e.size(); ++p) {
      if (recs[0].valid.data()[p]) CHECK(m.error.data()[p] == e.data()[p]);
      CHECK(m.valid.data()[p] == recs[0].valid.data()[p]);
    }
  }
  SUBCASE("exact reconstruction wins") {
    const std::array<Reconstruction, 2> two{recs[1], Reconstruction{t, full_mask(6, 7)}};
    CHECK(min_reprojection(t, two, cfg).error.data().cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("per-pixel scan") {
    const MinReprojection m = min_reprojection(t, recs, cfg);
    std::vector<ImageGrid> errs;
    for (const auto& r : recs) errs.push_back(photometric_error(t, r.image, cfg));
    for (Eigen::Index p = 0; p < t.pixels(); ++p) {
      double best = 0.0;
      int arg = -1;
      for (int i = 0; i < 3; ++i) {
        if (!recs[i].valid.data()[p]) continue;
        if (arg < 0 || errs[i].data()[p] < best) { best = errs[i].data()[p]; arg = i; }
      }
      CHECK(m.source.data()[p] == arg);
      CHECK(m.valid.data()[p] == (arg >= 0 ? 1 : 0));
      if (arg >= 0) CHECK(std::abs(m.error.data()[p] - best) < 1e-12);
    }
  }
  SUBCASE("empty list") {
    CHECK_THROWS_AS(min_reprojection(t, std::span<const Reconstruction>(), cfg), std::invalid_argument);
  }
}

TEST_CASE("auto mask") {
  const PhotoConfig cfg;
  Rng rng(24);
  const ImageGrid t = test::random_grid(rng, 6, 7, 1, 0.0, 1.0);
  const std::vector<Reconstruction> noisy{{test::random_grid(rng, 6, 7, 1, 0.0, 1.0), full_mask(6, 7)},
                                          {test::random_grid(rng, 6, 7, 1, 0.0, 1.0), full_mask(6, 7)}};
  const std::vector<Reconstruction> perfect{{t, full_mask(6, 7)}, {t, full_mask(6, 7)}};

  SUBCASE("static camera") {
    const std::vector<ImageGrid> sources{t, t};
    CHECK(mask_count(auto_mask(t, sources, noisy, cfg)) == 0);
  }
  SUBCASE("perfect reconstructions") {
    const std::vector<ImageGrid> sources{test::random_grid(rng, 6, 7, 1, 0.0, 1.0),
                                         test::random_grid(rng, 6, 7, 1, 0.0, 1.0)};
    CHECK(mask_count(auto_mask(t, sources, perfect, cfg)) == 42);
  }
  SUBCASE("per-pixel comparison") {
    const std::vector<ImageGrid> sources{test::random_grid(rng, 6, 7, 1, 0.0, 1.0),
                                         test::random_grid(rng, 6, 7, 1, 0.0, 1.0)};
    const ValidityMask mu = auto_mask(t, sources, noisy, cfg);
    const ImageGrid r0 = photometric_error(t, noisy[0].image, cfg);
    const ImageGrid r1 = photometric_error(t, noisy[1].image, cfg);
    const ImageGrid s0 = photometric_error(t, sources[0], cfg);
    const ImageGrid s1 = photometric_error(t, sources[1], cfg);
    for (Eigen::Index p = 0; p < t.pixels(); ++p) {
      const bool expected =
          std::min(r0.data()[p], r1.data()[p]) < std::min(s0.data()[p], s1.data()[p]);
      CHECK(mu.data()[p] == (expected ? 1 : 0));
    }
  }
  SUBCASE("length mismatch") {
    const std::vector<ImageGrid> sources{t};
    CHECK_THROWS_AS(auto_mask(t, sources, noisy, cfg), std::invalid_argument);
  }
}

TEST_CASE("smoothness") {
  Rng rng(25);
  const ImageGrid img = test::random_grid(rng, 6, 8, 3, 0.0, 1.0);
  CHECK(smoothness_loss(ImageGrid(6, 8, 1, 4.0), img) == 0.0);
  CHECK(smoothness_gradient(ImageGrid(6, 8, 1, 4.0), img).data().cwiseAbs().maxCoeff() == 0.0);

  ImageGrid bad(6, 8, 1, 1.0);
  bad(2, 2) = -1.0;
  CHECK_THROWS_AS(smoothness_loss(bad, img), std::invalid_argument);
}

TEST_CASE("a depth edge on an image edge is attenuated by exp(-g)") {
  const int h = 5, w = 8, edge = 4;
  const double g = 0.6;
  ImageGrid depth(h, w, 1), image(h, w, 1), flat(h, w, 1, 0.2);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      depth(y, x) = x < edge ? 2.0 : 4.0;
      image(y, x) = x < edge ? 0.2 : 0.2 + g;
    }
  }
  // Only the column left of the edge has a nonzero horizontal difference.
  const double mean_inv = (0.5 * edge + 0.25 * (w - edge)) / w;
  const double jump = std::abs(0.25 - 0.5) / mean_inv;
  const double direct = h * jump / (h * w);
  CHECK(smoothness_loss(depth, flat) == doctest::Approx(direct).epsilon(1e-14));
  CHECK(smoothness_loss(depth, image) == doctest::Approx(direct * std::exp(-g)).epsilon(1e-14));
}

TEST_CASE("self-supervised loss") {
  const PhotoConfig cfg;
  SUBCASE("identity poses and sources equal to the target") {
    Rng rng(26);
    const ImageGrid t = test::random_grid(rng, 8, 10, 1, 0.0, 1.0);
    const ImageGrid d = test::random_grid(rng, 8, 10, 1, 2.0, 9.0);
    const std::array<LinearPose, 2> poses{LinearPose(PoseSE3::identity()), LinearPose(PoseSE3::identity())};
    const std::array<ImageGrid, 2> sources{t, t};
    const SelfSupervisedResult r =
        self_supervised_loss(d, poses, t, sources, Intrinsics{9, 9, 4.5, 3.5}, cfg);
    CHECK(std::abs(r.loss.photometric) < 1e-15);
    CHECK(r.loss.total == doctest::Approx(cfg.gamma * smoothness_loss(d, t)).epsilon(1e-12));
  }
  SUBCASE("ground truth on a rendered triplet") {
    const Scene scene = generate_scene(5);
    const Intrinsics k{58, 58, 31.5, 23.5};
    const Bundle b = make_triplet(scene, make_trajectory({}), k, 48, 64);
    for (int t : Bundle::kTargets) {
      const std::array<LinearPose, 2> poses{LinearPose(b.relative(t, 0)), LinearPose(b.relative(t, 4))};
      const std::array<ImageGrid, 2> sources{b.images[0], b.images[4]};
      const SelfSupervisedResult r = self_supervised_loss(b.depths[t], poses, b.images[t], sources, k, cfg);
      CHECK(r.loss.photometric < 0.01);
    }
  }
}

}
