#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "sgr/graph_resampling.hpp"
#include "sgr/normals.hpp"
#include "support/graph_oracle.hpp"
#include "support/synthetic.hpp"

using namespace sgr;
using sgr::testing::dense_shift;
using sgr::testing::eigen_filter_response;
using sgr::testing::polynomial_filter_response;

TEST(Graph, TwoPointsSingleUnitWeight) {
  const KdTree t(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}});
  const GraphShift g = build_graph(t, 1);
  EXPECT_EQ(g.weights, (std::vector<double>{1.0, 1.0}));
  EXPECT_EQ(g.neighbors, (std::vector<std::size_t>{1, 0}));
}

TEST(Graph, EquilateralTriangleHalfWeights) {
  const double h = std::sqrt(3.0) / 2.0;
  const KdTree t(std::vector<Vec3>{{0, 0, 0}, {1, 0, 0}, {0.5, h, 0}});
  const GraphShift g = build_graph(t, 2);
  for (double w : g.weights) EXPECT_NEAR(w, 0.5, 1e-12);
}

TEST(Graph, RowsMatchDenseConstruction) {
  const auto pts = sgr::testing::positions(sgr::testing::random_cloud(50, 4));
  const KdTree t(pts);
  const std::size_t k = 6;
  const GraphShift g = build_graph(t, k);
  // Independent dense construction straight from the definition.
  double sigma = 0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (const auto& nb : sgr::testing::brute_knn(pts, pts[i], k, i))
      sigma += nb.distance;
  sigma /= double(pts.size() * k);
  EXPECT_NEAR(g.sigma, sigma, 1e-12);
  const Eigen::MatrixXd a = dense_shift(g);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto nbs = sgr::testing::brute_knn(pts, pts[i], k, i);
    double sum = 0;
    for (const auto& nb : nbs) sum += std::exp(-nb.distance * nb.distance / (sigma * sigma));
    for (const auto& nb : nbs)
      EXPECT_NEAR(a(i, nb.index),
                  std::exp(-nb.distance * nb.distance / (sigma * sigma)) / sum,
                  1e-12);
    EXPECT_NEAR(a.row(i).sum(), 1.0, 1e-9);
    EXPECT_EQ(a(i, i), 0.0);
  }
}

TEST(Graph, DegenerateGeometry) {
  const KdTree t(std::vector<Vec3>{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  EXPECT_THROW(build_graph(t, 2), Error);
  EXPECT_THROW(build_graph(t, 3), Error);
}

TEST(Filter, HaarLikeCoefficients) {
  EXPECT_EQ(FilterSpec::haar_like(4).coefficients,
            (std::vector<double>{1, -3, 3, -1}));
  EXPECT_EQ(FilterSpec::haar_like(2).coefficients, (std::vector<double>{1, -1}));
  for (std::size_t k = 2; k < 9; ++k) EXPECT_TRUE(FilterSpec::haar_like(k).is_highpass());
  EXPECT_FALSE((FilterSpec{{1, 1}}.is_highpass()));
}

TEST(Highpass, ConstantSignalIsExactlyZero) {
  const PointCloud c = sgr::testing::random_cloud(300, 2);
  const KdTree t(c);
  const GraphShift g = build_graph(t, 10);
  const std::vector<Vec3> constant(c.size(), Vec3{0, 0, 1});
  for (double r : highpass_response(g, constant, FilterSpec::haar_like()))
    EXPECT_EQ(r, 0.0);
  // A non-binomial high-pass with the same zero-sum property.
  for (double r : highpass_response(g, constant, FilterSpec{{2, -1, 0.5, -1.5}}))
    EXPECT_EQ(r, 0.0);
  EXPECT_THROW(highpass_response(g, constant, FilterSpec{{1, 0.5}}), Error);
}

TEST(Highpass, PathGraphMatchesHandExpansion) {
  // Path 0-1-2-3 with a hand-built row-stochastic shift.
  GraphShift g;
  g.nodes = 4;
  g.k = 2;
  g.neighbors = {1, 1, 0, 2, 1, 3, 2, 2};
  g.weights = {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5};
  Eigen::Matrix4d a;
  a << 0, 1, 0, 0, 0.5, 0, 0.5, 0, 0, 0.5, 0, 0.5, 0, 0, 1, 0;
  const Eigen::Matrix4d i = Eigen::Matrix4d::Identity();
  const Eigen::Vector4d phi(1, 0, 0, 0);
  const Eigen::Vector4d expect = (i - 3 * a + 3 * a * a - a * a * a) * phi;
  std::vector<Vec3> signal{{1, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
  const auto r = highpass_response(g, signal, FilterSpec::haar_like());
  for (int n = 0; n < 4; ++n) EXPECT_NEAR(r[n], std::abs(expect(n)), 1e-14);
}

TEST(Highpass, ElevatedPointStandsOut) {
  PointCloud c;
  for (int x = 0; x < 10; ++x)
    for (int y = 0; y < 10; ++y) {
      c.geometry.push_back({float(x), float(y), (x == 5 && y == 5) ? 1.5f : 0.0f});
      c.color.push_back({0, 0, 0});
    }
  const KdTree t(c);
  const auto normals = estimate_normals(c, t, 8).normals;
  const GraphShift g = build_graph(t, 8);
  const auto r = highpass_response(g, normals, FilterSpec::haar_like());
  const auto dense = eigen_filter_response(g, normals, FilterSpec::haar_like());
  for (std::size_t i = 0; i < r.size(); ++i) EXPECT_NEAR(r[i], dense[i], 1e-6);
  std::vector<double> sorted = r;
  std::nth_element(sorted.begin(), sorted.begin() + 50, sorted.end());
  EXPECT_GT(r[55], sorted[50]);
}

TEST(Highpass, MatchesEigendecompositionOnSmallGraphs) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t m = 20 + rng.below(180);
    const PointCloud c = sgr::testing::random_cloud(m, 500 + trial);
    const KdTree t(c);
    // k <= 3 graphs are numerically defective; no eigenbasis exists to compare against.
    const GraphShift g = build_graph(t, 4 + rng.below(9));
    std::vector<Vec3> signal(m);
    for (auto& s : signal) s = {rng.normal(), rng.normal(), rng.normal()};
    const auto r = highpass_response(g, signal, FilterSpec::haar_like());
    const auto poly = polynomial_filter_response(g, signal, FilterSpec::haar_like());
    const auto eig = eigen_filter_response(g, signal, FilterSpec::haar_like());
    for (std::size_t i = 0; i < m; ++i) {
      EXPECT_NEAR(r[i], poly[i], 1e-9);
      EXPECT_NEAR(r[i], eig[i], 1e-6);
    }
  }
}

TEST(Keypoints, CountRule) {
  EXPECT_EQ(keypoint_count(1), 1u);
  EXPECT_EQ(keypoint_count(5000), 1u);
  EXPECT_EQ(keypoint_count(14999), 1u);
  EXPECT_EQ(keypoint_count(15000), 2u);
  EXPECT_EQ(keypoint_count(2486566), 249u);
  for (std::size_t m = 1; m < 100000; m += 337)
    EXPECT_EQ(keypoint_count(m),
              std::max<std::size_t>(1, std::size_t(std::floor(m / 10000.0 + 0.5))));
}

TEST(Keypoints, TiesBrokenByIndex) {
  const auto ks = select_keypoints({0.5, 0.9, 0.9, 0.1}, 2);
  EXPECT_EQ(ks.indices, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(ks.scores, (std::vector<double>{0.9, 0.9}));
  EXPECT_THROW(select_keypoints({0.5, 0.9}, 3), Error);
  EXPECT_EQ(select_keypoints(std::vector<double>(5000, 1.0)).size(), 1u);
}

TEST(Keypoints, ScoresNonIncreasing) {
  Rng rng(3);
  std::vector<double> r(40000);
  for (double& v : r) v = double(rng.below(50));
  const auto ks = select_keypoints(r);
  ASSERT_EQ(ks.size(), 4u);
  for (std::size_t i = 1; i < ks.size(); ++i) {
    EXPECT_GE(ks.scores[i - 1], ks.scores[i]);
    if (ks.scores[i - 1] == ks.scores[i]) {
      EXPECT_LT(ks.indices[i - 1], ks.indices[i]);
    }
  }
}

TEST(Regions, AlphaFromMinimumRange) {
  PointCloud c;
  c.geometry = {{0, 0, 0}, {10, 20, 40}};
  c.color.resize(2);
  EXPECT_DOUBLE_EQ(region_alpha(bounding_ranges(c)), 0.5);
}

TEST(Regions, IsolatedKeypointIsSparse) {
  PointCloud c = sgr::testing::random_cloud(100, 1);
  c.geometry.push_back({50, 50, 50});
  c.color.push_back({0, 0, 0});
  const KdTree t(c);
  KeypointSet ks;
  ks.indices = {100};
  ks.scores = {1.0};
  const RegionSet rs = construct_regions(c, t, ks);
  ASSERT_EQ(rs.regions.size(), 1u);
  EXPECT_EQ(rs.regions[0].members, (std::vector<std::size_t>{100}));
  EXPECT_TRUE(rs.regions[0].sparse);
  EXPECT_EQ(rs.usable(), 0u);
}

TEST(Regions, MembershipMatchesBruteForce) {
  const PointCloud c = sgr::testing::random_cloud(500, 12, 2.0);
  const KdTree t(c);
  KeypointSet ks;
  for (std::size_t i = 0; i < 500; i += 50) {
    ks.indices.push_back(i);
    ks.scores.push_back(0);
  }
  for (auto mode : {AlphaMode::literal, AlphaMode::squared}) {
    const RegionSet rs = construct_regions(c, t, ks, mode);
    const double alpha = bounding_ranges(c).min_range() / 20.0;
    const double thr = mode == AlphaMode::literal ? alpha : alpha * alpha;
    for (const auto& reg : rs.regions) {
      std::vector<std::size_t> expect;
      for (std::size_t i = 0; i < c.size(); ++i)
        if (squared_distance(c.position(i), c.position(reg.center)) <= thr)
          expect.push_back(i);
      EXPECT_EQ(reg.members, expect);
      EXPECT_EQ(reg.sparse, expect.size() < 8);
    }
  }
}
