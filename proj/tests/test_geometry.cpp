#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "physdoa/geometry.hpp"

using namespace physdoa;

namespace {

MicArray random_array(std::size_t m, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.1);
  std::vector<Vec3> pos;
  for (std::size_t i = 0; i < m; ++i) pos.emplace_back(n(rng), n(rng), n(rng));
  return MicArray(pos);
}

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

}  // namespace

TEST(Geometry, PairCounts) {
  EXPECT_EQ(enumerate_pairs(icosahedral_array()).size(), 66u);
  std::mt19937_64 rng(1);
  for (std::size_t m = 2; m <= 16; ++m) EXPECT_EQ(enumerate_pairs(random_array(m, rng)).size(), m * (m - 1) / 2);
}

TEST(Geometry, PairOrderIsLexicographic) {
  const MicArray two({Vec3(0, 0, 0), Vec3(1, 0, 0)});
  const auto p2 = enumerate_pairs(two);
  ASSERT_EQ(p2.size(), 1u);
  EXPECT_EQ(p2[0].i, 0u);
  EXPECT_EQ(p2[0].j, 1u);

  const MicArray four({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)});
  const auto p4 = enumerate_pairs(four);
  const std::vector<std::pair<std::size_t, std::size_t>> want{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  ASSERT_EQ(p4.size(), want.size());
  for (std::size_t k = 0; k < want.size(); ++k) {
    EXPECT_EQ(p4[k].i, want[k].first);
    EXPECT_EQ(p4[k].j, want[k].second);
  }
}

TEST(Geometry, PairMetadataIsCentroidRelative) {
  const MicArray a({Vec3(1, 1, 1), Vec3(3, 1, 1)});
  const auto p = enumerate_pairs(a);
  EXPECT_TRUE(p[0].rel_i.isApprox(Vec3(-1, 0, 0)));
  EXPECT_TRUE(p[0].rel_j.isApprox(Vec3(1, 0, 0)));
  EXPECT_TRUE(p[0].baseline.isApprox(Vec3(-2, 0, 0)));
  const auto md = p[0].metadata();
  EXPECT_DOUBLE_EQ(md[0], -1.0);
  EXPECT_DOUBLE_EQ(md[3], 1.0);
}

TEST(Geometry, InvalidArrays) {
  EXPECT_THROW(MicArray({Vec3(0, 0, 0)}), InvalidArrayError);
  EXPECT_THROW(MicArray({Vec3(0, 0, 0), Vec3(0, 0, 0)}), InvalidArrayError);
  EXPECT_THROW(MicArray({Vec3(0, 0, 0), Vec3(std::nan(""), 0, 0)}), InvalidArrayError);
}

TEST(Geometry, MaxDelayExamples) {
  EXPECT_NEAR(max_delay_samples(MicArray({Vec3(0, 0, 0), Vec3(0.343, 0, 0)}, 343.0, 16000.0)), 16.0, 1e-12);
  EXPECT_NEAR(max_delay_samples(MicArray({Vec3(0, 0, 0), Vec3(0.1, 0, 0)}, 343.0, 16000.0)), 1600.0 / 343.0, 1e-12);
  EXPECT_NEAR(max_delay_samples(MicArray({Vec3(0, 0, 0), Vec3(0.1, 0, 0)}, 343.0, 16000.0)), 4.664, 1e-3);
}

TEST(Geometry, InteriorMicNeverIncreasesMaxDelay) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    MicArray base = random_array(3, rng);
    const double before = max_delay_samples(base);
    // Convex combination lies inside the hull.
    double a = u(rng), b = u(rng) * (1 - a);
    const auto& p = base.positions();
    std::vector<Vec3> pos = p;
    pos.push_back(a * p[0] + b * p[1] + (1 - a - b) * p[2]);
    EXPECT_LE(max_delay_samples(MicArray(pos)), before * (1 + 1e-12));
  }
}

TEST(Geometry, MaxDelayRigidInvariance) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    const MicArray a = random_array(6, rng);
    const MicArray b = a.transformed(random_rotation(rng), Vec3(n(rng), n(rng), n(rng)));
    const double da = max_delay_samples(a);
    EXPECT_NEAR(max_delay_samples(b), da, 1e-9 * da);
  }
}

TEST(Geometry, CorruptionZeroIsIdentity) {
  const MicArray a = icosahedral_array();
  EXPECT_EQ(corrupt_positions(a, 0.0, 42), a);
}

TEST(Geometry, CorruptionNegativeThrows) {
  EXPECT_THROW(corrupt_positions(icosahedral_array(), -0.1, 1), ArgumentError);
}

TEST(Geometry, CorruptionSeeds) {
  const MicArray a = icosahedral_array();
  EXPECT_EQ(corrupt_positions(a, 0.1, 7), corrupt_positions(a, 0.1, 7));
  EXPECT_NE(corrupt_positions(a, 0.1, 7), corrupt_positions(a, 0.1, 8));
}

TEST(Geometry, CorruptionStdMatchesScale) {
  const MicArray a = icosahedral_array();
  double max_abs = 0.0;
  for (const auto& p : a.positions()) max_abs = std::max(max_abs, p.cwiseAbs().maxCoeff());
  const int seeds = 10000;
  Eigen::ArrayXXd sum = Eigen::ArrayXXd::Zero(12, 3), sum2 = Eigen::ArrayXXd::Zero(12, 3);
  for (int s = 0; s < seeds; ++s) {
    const MicArray c = corrupt_positions(a, 0.10, static_cast<std::uint64_t>(s));
    for (int m = 0; m < 12; ++m)
      for (int k = 0; k < 3; ++k) {
        const double d = c.positions()[static_cast<std::size_t>(m)][k] - a.positions()[static_cast<std::size_t>(m)][k];
        sum(m, k) += d;
        sum2(m, k) += d * d;
      }
  }
  const Eigen::ArrayXXd mean = sum / seeds;
  const Eigen::ArrayXXd sd = (sum2 / seeds - mean.square()).sqrt();
  const double want = 0.10 * max_abs;
  // Standard error of a sample std at n=1e4 is about 0.7%.
  EXPECT_LT(((sd - want).abs() / want).maxCoeff(), 0.04);
  EXPECT_LT(mean.abs().maxCoeff(), 0.05 * want);
}

TEST(Geometry, IcosahedronAperture) {
  const MicArray a = icosahedral_array(0.05);
  EXPECT_EQ(a.size(), 12u);
  EXPECT_NEAR(a.aperture(), 0.1, 1e-12);
  for (const auto& p : a.positions()) EXPECT_NEAR(p.norm(), 0.05, 1e-12);
}

TEST(Geometry, JsonRoundTrip) {
  const MicArray a = icosahedral_array(0.07, 340.0, 48000.0);
  const nlohmann::json j = a;
  const MicArray b = mic_array_from_json(j);
  EXPECT_EQ(a, b);
}
