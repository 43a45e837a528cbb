#include <doctest.h>

#include "oracles.hpp"
#include "pointlm/geometry.hpp"
#include "pointlm/rng.hpp"

using namespace pointlm;

namespace {

Matd random_cloud(Rng& rng, int n, int d = 6) {
  Matd c(n, d);
  fill_normal(c, rng, 0.0, 1.0);
  return c;
}

}  // namespace

TEST_CASE("normalize centers xyz, scales to the unit sphere, keeps colors") {
  Rng rng(31);
  Matd c = random_cloud(rng, 40);
  c.leftCols(3).array() *= 7.0;
  c.leftCols(3).array() += 3.0;
  const Matd colors = c.rightCols(3);

  const Matd out = normalize_cloud(c);
  CHECK(out.leftCols(3).colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
  const auto norms = out.leftCols(3).rowwise().norm();
  CHECK(norms.maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((out.rightCols(3) - colors).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalize maps a degenerate cloud to the origin") {
  Matd c = Matd::Zero(5, 6);
  c.leftCols(3).rowwise() = Eigen::Matrix<double, 1, 3>(2.0, -1.0, 4.0);
  const Matd out = normalize_cloud(c);
  CHECK(out.leftCols(3).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("normalize rejects malformed clouds") {
  const Matd thin = Matd::Zero(3, 2);
  CHECK_THROWS_AS((void)normalize_cloud(thin), shape_error);
  Matd bad = Matd::Zero(3, 3);
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS((void)normalize_cloud(bad), numeric_error);
}

TEST_CASE("farthest point sampling agrees with the brute-force reference") {
  Rng rng(32);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + int(rng.uniform_index(63));
    Matd c = random_cloud(rng, n);
    const int m = 1 + int(rng.uniform_index(std::uint64_t(n)));
    const int start = int(rng.uniform_index(std::uint64_t(n)));
    const auto got = farthest_point_sample(c, m, start);
    const auto want = oracles::fps_reference(c, m, start);
    REQUIRE(got == want);
  }
}

TEST_CASE("farthest point sampling handles duplicate points like the oracle") {
  Rng rng(33);
  Matd c = random_cloud(rng, 12);
  c.row(3) = c.row(7);
  c.row(0) = c.row(9);
  const auto got = farthest_point_sample(c, 12, 2);
  const auto want = oracles::fps_reference(c, 12, 2);
  CHECK(got == want);
  // Without-replacement: all indices distinct when m <= n.
  auto sorted = got;
  std::sort(sorted.begin(), sorted.end());
  CHECK(std::unique(sorted.begin(), sorted.end()) == sorted.end());
}

TEST_CASE("farthest point sampling: start point first, min-distance shrinks") {
  Rng rng(34);
  Matd c = random_cloud(rng, 50);
  const auto sel = farthest_point_sample(c, 20, 13);
  CHECK(sel[0] == 13);

  // The greedy max-min radius is non-increasing in the selection order.
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k < sel.size(); ++k) {
    double d = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < k; ++j)
      d = std::min(d, sq_dist_xyz(c, sel[k], sel[j]));
    CHECK(d <= prev + 1e-12);
    prev = d;
  }
}

TEST_CASE("asking for more samples than points repeats the selection") {
  Rng rng(35);
  Matd c = random_cloud(rng, 5);
  const auto sel = farthest_point_sample(c, 12, 1);
  REQUIRE(sel.size() == 12);
  for (int i = 5; i < 12; ++i) CHECK(sel[std::size_t(i)] == sel[std::size_t(i % 5)]);
  CHECK(sel == oracles::fps_reference(c, 12, 1));
}

TEST_CASE("seeded sampling start is reproducible") {
  Rng rng_cloud(36);
  Matd c = random_cloud(rng_cloud, 30);
  Rng a(99), b(99);
  CHECK(farthest_point_sample(c, 8, a) == farthest_point_sample(c, 8, b));
}

TEST_CASE("knn grouping agrees with the brute-force reference") {
  Rng rng(37);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + int(rng.uniform_index(127));
    Matd c = random_cloud(rng, n);
    const int k = 1 + int(rng.uniform_index(16));
    const int n_centers = 1 + int(rng.uniform_index(8));
    std::vector<int> centers;
    for (int i = 0; i < n_centers; ++i)
      centers.push_back(int(rng.uniform_index(std::uint64_t(n))));
    const auto got = knn_group(c, centers, k);
    const auto want = oracles::knn_reference(c, centers, k);
    REQUIRE(got.members == want);
  }
}

TEST_CASE("each group starts at its center and pads when points run out") {
  Rng rng(38);
  Matd c = random_cloud(rng, 4);
  const auto gs = knn_group(c, {2, 0}, 7);
  for (std::size_t g = 0; g < gs.centers.size(); ++g) {
    REQUIRE(gs.members[g].size() == 7);
    CHECK(gs.members[g][0] == gs.centers[g]);
    // Pad slots repeat the center.
    CHECK(gs.members[g][4] == gs.centers[g]);
    CHECK(gs.members[g][6] == gs.centers[g]);
  }
}

TEST_CASE("grouped features stack neighbor rows with relative coordinates") {
  Rng rng(39);
  Matd c = random_cloud(rng, 20);
  const auto centers = farthest_point_sample(c, 4, 0);
  const auto gs = knn_group(c, centers, 5);
  const auto gf = gather_groups(c, gs, 5);
  REQUIRE(gf.features.rows() == 20);
  REQUIRE(gf.rel_xyz.rows() == 20);
  // First row of every group is the center: zero offset, raw row preserved.
  for (int g = 0; g < 4; ++g) {
    CHECK(gf.rel_xyz.row(g * 5).cwiseAbs().maxCoeff() == 0.0);
    CHECK((gf.features.row(g * 5) - c.row(centers[std::size_t(g)]))
              .cwiseAbs()
              .maxCoeff() == 0.0);
  }
  // Spot-check one non-center member.
  const int p = gs.members[1][3];
  CHECK((gf.rel_xyz.row(5 + 3) -
         (c.row(p).head(3) - c.row(centers[1]).head(3)))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("resample: identity at same size, ordered subset when shrinking") {
  Rng rng(40);
  Matd c = random_cloud(rng, 24);
  Rng r1(7);
  const Matd same = resample_cloud(c, 24, r1);
  CHECK((same - c).cwiseAbs().maxCoeff() == 0.0);

  const Matd down = resample_cloud(c, 9, r1);
  REQUIRE(down.rows() == 9);
  // Every kept row appears in the original, in original order.
  Eigen::Index cursor = 0;
  for (Eigen::Index i = 0; i < down.rows(); ++i) {
    bool found = false;
    for (; cursor < c.rows(); ++cursor) {
      if ((down.row(i) - c.row(cursor)).cwiseAbs().maxCoeff() == 0.0) {
        found = true;
        ++cursor;
        break;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("resample upsampling keeps originals and appends duplicates") {
  Rng rng(41);
  Matd c = random_cloud(rng, 6);
  Rng r1(8);
  const Matd up = resample_cloud(c, 15, r1);
  REQUIRE(up.rows() == 15);
  CHECK((up.topRows(6) - c).cwiseAbs().maxCoeff() == 0.0);
  for (Eigen::Index i = 6; i < 15; ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < 6; ++j)
      if ((up.row(i) - c.row(j)).cwiseAbs().maxCoeff() == 0.0) found = true;
    CHECK(found);
  }
  // Same seed, same result.
  Rng r2(8);
  CHECK((resample_cloud(c, 15, r2) - up).cwiseAbs().maxCoeff() == 0.0);
}
