#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include "physdoa/evaluate.hpp"
#include "physdoa/physdec.hpp"
#include "physdoa/srp.hpp"

using namespace physdoa;

namespace {

Vec3 random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  return Vec3(n(rng), n(rng), n(rng)).normalized();
}

// Grid distance in cells with azimuth wrap-around.
int cell_distance(const SrpGrid& g, std::size_t a, std::size_t b) {
  const int ia = static_cast<int>(a) / g.n_el, ja = static_cast<int>(a) % g.n_el;
  const int ib = static_cast<int>(b) / g.n_el, jb = static_cast<int>(b) % g.n_el;
  int di = std::abs(ia - ib);
  di = std::min(di, g.n_az - di);
  return std::max(di, std::abs(ja - jb));
}

std::size_t nearest_cell(const SrpGrid& g, const Vec3& d) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < g.size(); ++c)
    if (g.directions[c].dot(d) > g.directions[best].dot(d)) best = c;
  return best;
}

// Synthetic GCC: Gaussian bump at each pair's geometric TDOA plus noise.
Tensor3<double> synthetic_gcc(const MicArray& a, const LagGrid& grid, const Vec3& d, double noise, std::mt19937_64& rng) {
  const auto pairs = enumerate_pairs(a);
  std::normal_distribution<double> n(0.0, noise);
  Tensor3<double> g(pairs.size(), 1, grid.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const double tau = pairwise_delay(d, pairs[k], a.speed_of_sound(), a.sample_rate());
    for (std::size_t l = 0; l < grid.size(); ++l) g(k, 0, l) = std::exp(-std::pow(grid.lags[l] - tau, 2) / 0.5) + n(rng);
  }
  return g;
}

}  // namespace

TEST(SrpGrid, Layout) {
  const SrpGrid g = SrpGrid::make();
  ASSERT_EQ(g.size(), 2048u);
  for (const auto& d : g.directions) EXPECT_NEAR(d.norm(), 1.0, 1e-12);
  for (double az : g.azimuths) {
    EXPECT_GT(az, -kPi);
    EXPECT_LE(az, kPi);
  }
  for (double el : g.elevations) {
    EXPECT_GE(el, -kPi / 2);
    EXPECT_LE(el, kPi / 2);
  }
  EXPECT_EQ(g.index(1, 0), 32u);
}

TEST(SrpMap, UniformInputGivesEqualScores) {
  const MicArray a = icosahedral_array();
  const LagGrid grid = make_lag_grid(max_delay_samples(a), 64, 4096);
  Tensor3<float> g(66, 2, 64, 0.25f);
  const auto m = srp_phat_map(g, grid, enumerate_pairs(a), 343.0, 16000.0, SrpGrid::make());
  EXPECT_NEAR(m.maxCoeff() - m.minCoeff(), 0.0, 1e-9);
}

TEST(SrpMap, OneHotAtTdoaRecoversDirection) {
  const MicArray a = icosahedral_array();
  const auto pairs = enumerate_pairs(a);
  const LagGrid grid = make_lag_grid(max_delay_samples(a), 64, 4096);
  const SrpGrid sg = SrpGrid::make();
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 d = random_unit(rng);
    Tensor3<float> g(pairs.size(), 1, 64);
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double tau = pairwise_delay(d, pairs[k], 343.0, 16000.0);
      std::size_t best = 0;
      for (std::size_t l = 1; l < 64; ++l)
        if (std::abs(grid.lags[l] - tau) < std::abs(grid.lags[best] - tau)) best = l;
      g(k, 0, best) = 1.0f;
    }
    const auto m = srp_phat_map(g, grid, pairs, 343.0, 16000.0, sg);
    const auto tr = srp_argmax(m, {1.0}, sg);
    EXPECT_LE(cell_distance(sg, tr.cells[0], nearest_cell(sg, d)), 1);
  }
}

TEST(SrpMap, SinglePairArgmaxLiesOnTheTrueCone) {
  // One pair only resolves the cone of equal delay; the argmax must lie on
  // it and the true cell must score at least as much as linear interpolation
  // of a one-hot allows.
  const MicArray a({Vec3(0.05, 0, 0), Vec3(-0.05, 0, 0)});
  const auto pairs = enumerate_pairs(a);
  const LagGrid grid = make_lag_grid(max_delay_samples(a), 64, 4096);
  const SrpGrid sg = SrpGrid::make();
  for (std::size_t cell : {100u, 777u, 1500u}) {
    const double tau = pairwise_delay(sg.directions[cell], pairs[0], 343.0, 16000.0);
    Tensor3<float> g(1, 1, 64);
    std::size_t best = 0;
    for (std::size_t l = 1; l < 64; ++l)
      if (std::abs(grid.lags[l] - tau) < std::abs(grid.lags[best] - tau)) best = l;
    g(0, 0, best) = 1.0f;
    const auto m = srp_phat_map(g, grid, pairs, 343.0, 16000.0, sg);
    const auto tr = srp_argmax(m, {1.0}, sg);
    EXPECT_LE(std::abs(pairwise_delay(tr.directions[0], pairs[0], 343.0, 16000.0) - tau), grid.spacing());
    EXPECT_GE(m(0, static_cast<Eigen::Index>(cell)), 0.5);
  }
}

TEST(SrpArgmax, TieBreakAndCarry) {
  const SrpGrid sg = SrpGrid::make();
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(4, 2048);
  m(0, 500) = 2.0;
  m(1, 600) = 3.0;
  m(3, 700) = 1.0;
  // Frame 2 is all equal.
  auto tr = srp_argmax(m, {1, 1, 1, 1}, sg);
  EXPECT_EQ(tr.cells[0], 500u);
  EXPECT_EQ(tr.cells[1], 600u);
  EXPECT_EQ(tr.cells[2], 0u);
  EXPECT_EQ(tr.cells[3], 700u);
  EXPECT_TRUE(tr.directions[0].isApprox(sg.directions[500]));

  tr = srp_argmax(m, {0, 1, 0, 1}, sg);
  EXPECT_EQ(tr.cells[0], 500u);  // leading inactive frame keeps its own argmax
  EXPECT_EQ(tr.cells[1], 600u);
  EXPECT_EQ(tr.cells[2], 600u);  // carried
  EXPECT_EQ(tr.cells[3], 700u);
}

TEST(SrpMap, NearestInterpolationOption) {
  const MicArray a = icosahedral_array();
  const auto pairs = enumerate_pairs(a);
  const LagGrid grid = make_lag_grid(max_delay_samples(a), 64, 4096);
  const SrpGrid sg = SrpGrid::make();
  std::mt19937_64 rng(2);
  const Vec3 d = random_unit(rng);
  const auto gd = synthetic_gcc(a, grid, d, 0.0, rng);
  const auto lin = srp_argmax(srp_phat_map(gd, grid, pairs, 343.0, 16000.0, sg, SrpInterp::Linear), {1.0}, sg);
  const auto nn = srp_argmax(srp_phat_map(gd, grid, pairs, 343.0, 16000.0, sg, SrpInterp::Nearest), {1.0}, sg);
  EXPECT_LE(cell_distance(sg, lin.cells[0], nn.cells[0]), 1);
}

TEST(SrpMap, RotationConsistency) {
  const MicArray a = icosahedral_array();
  const LagGrid grid = make_lag_grid(max_delay_samples(a), 64, 4096);
  const SrpGrid sg = SrpGrid::make();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n;
  const Eigen::Matrix3d R = Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
  const MicArray b = a.transformed(R, Vec3::Zero());
  auto errors = [&](const MicArray& arr, const Eigen::Matrix3d& rot, std::uint64_t seed) {
    std::mt19937_64 r(seed);
    std::vector<double> e;
    for (int i = 0; i < 300; ++i) {
      const Vec3 d = rot * random_unit(r);
      const auto g = synthetic_gcc(arr, grid, d, 0.05, r);
      const auto tr = srp_argmax(srp_phat_map(g, grid, enumerate_pairs(arr), 343.0, 16000.0, sg), {1.0}, sg);
      e.push_back(angular_error_deg(tr.directions[0], d));
    }
    return e;
  };
  const auto ea = errors(a, Eigen::Matrix3d::Identity(), 10), eb = errors(b, R, 10);
  const double ma = std::accumulate(ea.begin(), ea.end(), 0.0) / 300, mb = std::accumulate(eb.begin(), eb.end(), 0.0) / 300;
  // Grid quantization dominates; both sit near half a cell and agree closely.
  EXPECT_LT(ma, 5.0);
  EXPECT_LT(mb, 5.0);
  EXPECT_NEAR(ma, mb, 1.0);
}

TEST(PhysicsLikelihood, SharpSigmaMatchesSrpOnSharpenedInputs) {
  const MicArray a = icosahedral_array();
  const auto pairs = enumerate_pairs(a);
  const LagGrid grid = make_lag_grid(max_delay_samples(a), 64, 4096);
  const SrpGrid sg = SrpGrid::make();
  std::mt19937_64 rng(4);
  int agree = 0;
  const int N = 100;
  for (int i = 0; i < N; ++i) {
    const auto g = synthetic_gcc(a, grid, random_unit(rng), 0.02, rng);
    const auto sharp = sharpen_to_argmax(g);
    const Eigen::MatrixXd srp = srp_phat_map(sharp, grid, pairs, 343.0, 16000.0, sg, SrpInterp::Nearest);
    const auto phys = srp_argmax(physics_likelihood_map(sharp, grid, pairs, 343.0, 16000.0, sg, 0.05 * grid.spacing()), {1.0}, sg);
    // Nearest-lag SRP scores are pair counts and tie often; the physics pick
    // must be one of the maximizers.
    agree += srp(0, static_cast<Eigen::Index>(phys.cells[0])) >= srp.maxCoeff() - 1e-9;
  }
  EXPECT_EQ(agree, N);
}
