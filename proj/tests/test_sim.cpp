#include <cmath>
#include <random>

#include <Eigen/Geometry>
#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "physdoa/physdec.hpp"
#include "physdoa/sim.hpp"
#include "physdoa/srp.hpp"
#include "physdoa/evaluate.hpp"

using namespace physdoa;

namespace {

SceneConfig short_config(double duration = 2.0) {
  SceneConfig c;
  c.duration_s = duration;
  return c;
}

std::vector<double> white(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> x(n);
  for (auto& v : x) v = d(rng);
  return x;
}

AcousticScene static_scene(const Vec3& source, double rt60, int order, double seconds, std::uint64_t seed) {
  AcousticScene s;
  s.seed = seed;
  s.room = Vec3(6, 5, 3);
  s.rt60 = rt60;
  s.snr_db = std::numeric_limits<double>::infinity();
  s.array = icosahedral_array();
  s.array_center = Vec3(3, 2.5, 1.5);
  s.trajectory.start = s.trajectory.end = source;
  s.trajectory.duration = seconds;
  s.trajectory.room = s.room;
  s.trajectory.margin = 0.1;
  s.max_reflection_order = order;
  s.excitation = white(static_cast<std::size_t>(seconds * 16000), seed);
  return s;
}

std::size_t argmax(const float* p, std::size_t n) { return static_cast<std::size_t>(std::max_element(p, p + n) - p); }

}  // namespace

TEST(SampleScene, DefaultRangesHold) {
  const SceneConfig c = short_config();
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const AcousticScene s = sample_scene(c, seed);
    EXPECT_GE(s.rt60, 0.2);
    EXPECT_LE(s.rt60, 1.0);
    EXPECT_GE(s.snr_db, 5.0);
    EXPECT_LE(s.snr_db, 30.0);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(s.trajectory.oscillations[a], 0);
      EXPECT_LE(s.trajectory.oscillations[a], 2);
      EXPECT_GE(s.trajectory.amplitude[a], 0.0);
      EXPECT_LE(s.trajectory.amplitude[a], 1.0);
    }
    for (const Vec3& m : s.mic_positions())
      for (int a = 0; a < 3; ++a) {
        EXPECT_GT(m[a], 0.0);
        EXPECT_LT(m[a], s.room[a]);
      }
    for (int k = 0; k <= 50; ++k) {
      const Vec3 p = s.trajectory.position(c.duration_s * k / 50.0);
      for (int a = 0; a < 3; ++a) {
        EXPECT_GT(p[a], 0.0);
        EXPECT_LT(p[a], s.room[a]);
      }
    }
  }
}

TEST(SampleScene, DegenerateRangesAndDeterminism) {
  SceneConfig c = short_config();
  c.rt60 = {0.5, 0.5};
  const AcousticScene a = sample_scene(c, 9), b = sample_scene(c, 9);
  EXPECT_EQ(a.rt60, 0.5);
  EXPECT_EQ(a.excitation, b.excitation);
  EXPECT_EQ(a.trajectory.start, b.trajectory.start);
  EXPECT_NE(sample_scene(c, 10).trajectory.start, a.trajectory.start);
}

TEST(SampleScene, StraightTrajectoryWithoutOscillation) {
  SceneConfig c = short_config();
  c.oscillation_amp = {0.0, 0.0};
  c.oscillations_max = 0;
  const AcousticScene s = sample_scene(c, 3);
  const Vec3 d = s.trajectory.end - s.trajectory.start;
  for (int k = 0; k <= 20; ++k) {
    const Vec3 p = s.trajectory.position(c.duration_s * k / 20.0);
    EXPECT_LT((Vec3(p - s.trajectory.start).cross(d)).norm(), 1e-9);
  }
}

TEST(SampleScene, RoomTooSmall) {
  SceneConfig c = short_config();
  c.room_x = {1.0, 1.0};
  EXPECT_THROW(sample_scene(c, 1), ConfigError);
  c = short_config();
  c.rt60 = {0.8, 0.3};
  EXPECT_THROW(sample_scene(c, 1), ConfigError);
}

TEST(SampleScene, DoaContinuity) {
  SceneConfig c = short_config(4.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const AcousticScene s = sample_scene(c, seed);
    EXPECT_LE(s.trajectory.max_speed(), c.v_max);
    // Angular step bound: v_max * dt / min distance.
    const double dt = c.frames.hop / 16000.0;
    std::vector<double> times;
    for (int t = 0; t < 20; ++t) times.push_back(t * dt);
    const Vec3 centroid = s.array_centroid();
    Vec3 prev = (s.trajectory.position(0) - centroid).normalized();
    for (double t : times) {
      const Vec3 cur = (s.trajectory.position(t) - centroid).normalized();
      EXPECT_LE(std::acos(std::clamp(prev.dot(cur), -1.0, 1.0)), c.v_max * dt / c.min_source_distance + 1e-9);
      prev = cur;
    }
  }
}

TEST(RenderIsm, AnechoicDelaysMatchGeometry) {
  const Vec3 src(5.5, 2.5, 1.5);  // on the +x axis of the array
  AcousticScene s = static_scene(src, 0.3, 0, 1.0, 1);
  s.excitation.assign(s.excitation.size(), 0.0);
  s.excitation[1000] = 1.0;
  const MicSignals sig = render_ism(s);
  const auto mics = s.mic_positions();
  // Impulse arrival: centroid of the two linear-interpolation taps.
  std::vector<double> arrival;
  for (Eigen::Index m = 0; m < sig.samples.rows(); ++m) {
    double w = 0.0, acc = 0.0;
    for (Eigen::Index t = 0; t < sig.samples.cols(); ++t) {
      w += sig.samples(m, t);
      acc += sig.samples(m, t) * static_cast<double>(t);
    }
    arrival.push_back(acc / w);
  }
  const Vec3 z = (src - s.array_centroid()).normalized();
  for (const MicPair& p : enumerate_pairs(s.array)) {
    const double measured = arrival[p.j] - arrival[p.i];
    EXPECT_NEAR(measured, pairwise_delay(z, p, 343.0, 16000.0), 0.5);
  }
}

TEST(RenderIsm, SilentExcitation) {
  AcousticScene s = static_scene(Vec3(1, 1, 1), 0.3, 3, 1.0, 2);
  s.excitation.assign(s.excitation.size(), 0.0);
  const MicSignals sig = render_ism(s);
  EXPECT_EQ(sig.samples.cwiseAbs().maxCoeff(), 0.0);
  for (double m : sig.mask) EXPECT_EQ(m, 0.0);
}

TEST(RenderIsm, ReverberantGccPeaksAtGeometricTdoa) {
  const Vec3 src(4.6, 3.9, 1.8);
  const AcousticScene s = static_scene(src, 0.2, 10, 4.0, 3);
  const MicSignals sig = render_ism(s);
  const LagGrid grid = make_lag_grid(max_delay_samples(s.array), 64, 4096);
  const auto pairs = enumerate_pairs(s.array);
  const GccFeatures f = extract_gcc(sig.samples, pairs, grid, s.frames, 16000.0);
  const Vec3 z = (src - s.array_centroid()).normalized();
  std::size_t hits = 0, total = 0;
  for (std::size_t t = 0; t < f.frames(); ++t) {
    if (sig.mask[t] == 0.0) continue;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      const double tau = pairwise_delay(z, pairs[k], 343.0, 16000.0);
      const double peak = grid.lags[argmax(f.values.row(k, t), 64)];
      ++total;
      if (std::abs(peak - tau) <= 0.5) ++hits;
    }
  }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.9);
}

TEST(RenderIsm, SrpFindsAnechoicStaticSource) {
  const Vec3 src(1.2, 4.1, 2.2);
  const AcousticScene s = static_scene(src, 0.3, 0, 6.0, 4);
  const MicSignals sig = render_ism(s);
  const LagGrid grid = make_lag_grid(max_delay_samples(s.array), 64, 4096);
  const auto pairs = enumerate_pairs(s.array);
  const GccFeatures f = extract_gcc(sig.samples, pairs, grid, s.frames, 16000.0);
  const SrpGrid sg = SrpGrid::make();
  const auto tr = srp_argmax(srp_phat_map(f.values, grid, pairs, 343.0, 16000.0, sg), sig.mask, sg);
  const Vec3 z = (src - s.array_centroid()).normalized();
  // Two cells is about 11 degrees in azimuth at the equator.
  const double cell = 2.0 * kPi / sg.n_az;
  std::size_t ok = 0, n = 0;
  for (std::size_t t = 0; t < f.frames(); ++t) {
    if (sig.mask[t] == 0.0) continue;
    ++n;
    if (std::acos(std::clamp(tr.directions[t].dot(z), -1.0, 1.0)) <= 2.0 * cell) ++ok;
  }
  EXPECT_GE(static_cast<double>(ok) / static_cast<double>(n), 0.95);
}

TEST(RenderIsm, ImpulseResponseDecaysSixtyDbWithinRt60) {
  for (double rt60 : {0.3, 0.5}) {
    AcousticScene s = static_scene(Vec3(1.1, 1.3, 0.9), rt60, 200, 1.5, 11);
    s.room = Vec3(3, 3, 2.5);
    s.trajectory.room = s.room;
    s.array_center = Vec3(2.0, 1.8, 1.4);
    s.excitation.assign(s.excitation.size(), 0.0);
    s.excitation[0] = 1.0;
    const MicSignals sig = render_ism(s);
    for (Eigen::Index m = 0; m < sig.samples.rows(); m += 5) {
      // Backward-integrated energy, -60 dB crossing relative to the excitation offset.
      std::vector<double> edc(static_cast<std::size_t>(sig.samples.cols()));
      double acc = 0.0;
      for (std::size_t i = edc.size(); i-- > 0;) edc[i] = acc += std::pow(sig.samples(m, static_cast<Eigen::Index>(i)), 2);
      std::size_t i60 = 0;
      while (i60 < edc.size() && edc[i60] > 1e-6 * edc[0]) ++i60;
      const double t60 = static_cast<double>(i60 - 1) / 16000.0;
      EXPECT_NEAR(t60, rt60, 0.2 * rt60) << "rt60 " << rt60 << " mic " << m;
    }
  }
}

TEST(RenderIsm, UnrealizableReverberation) {
  EXPECT_THROW(reflection_coefficient(Vec3(4, 5, 3), 0.01), SimulationError);
  EXPECT_THROW(reflection_coefficient(Vec3(4, 5, 3), 0.0), SimulationError);
}

TEST(RenderIsm, FarFieldLabelsMatchTdoa) {
  // Source >= 10 apertures away: plane-wave TDOA at the label direction
  // matches the spherical-wave TDOA within 5% of tau_max.
  const MicArray a = icosahedral_array();
  const double tau_max = max_delay_samples(a);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const Vec3 centre(3, 3, 1.5);
  for (int i = 0; i < 200; ++i) {
    const Vec3 dir = Vec3(n(rng), n(rng), n(rng)).normalized();
    const Vec3 src = centre + (10.0 * a.aperture() + 0.5 * std::abs(n(rng))) * dir;
    for (const MicPair& p : enumerate_pairs(a)) {
      const double ti = (src - (centre + a.positions()[p.i])).norm(), tj = (src - (centre + a.positions()[p.j])).norm();
      const double spherical = (tj - ti) / 343.0 * 16000.0;
      EXPECT_NEAR(pairwise_delay(dir, p, 343.0, 16000.0), spherical, 0.05 * tau_max);
    }
  }
}

TEST(RenderIsm, Determinism) {
  SceneConfig c = short_config(1.0);
  c.max_reflection_order = 3;
  const MicSignals a = simulate(sample_scene(c, 21)), b = simulate(sample_scene(c, 21));
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.mask, b.mask);
  for (const Vec3& d : a.doa) EXPECT_NEAR(d.norm(), 1.0, 1e-6);
  EXPECT_EQ(a.mask.size(), a.doa.size());
}

TEST(AddNoise, InfiniteSnrIsIdentity) {
  AcousticScene s = static_scene(Vec3(1, 1, 1), 0.3, 2, 1.0, 6);
  const MicSignals clean = render_ism(s);
  EXPECT_EQ(add_noise(clean, s).samples, clean.samples);
}

TEST(AddNoise, AuralizedSnr) {
  AcousticScene s = static_scene(Vec3(1, 1, 1), 0.3, 2, 2.0, 7);
  s.snr_db = 0.0;
  const MicSignals clean = render_ism(s);
  const MicSignals noisy = add_noise(clean, s);
  for (Eigen::Index m = 0; m < clean.samples.rows(); ++m) {
    // Every frame is active for white excitation.
    const double ps = clean.samples.row(m).squaredNorm();
    const double pn = (noisy.samples.row(m) - clean.samples.row(m)).squaredNorm();
    EXPECT_NEAR(10.0 * std::log10(ps / pn), 0.0, 0.5);
  }
}

TEST(AddNoise, ZeroPowerThrows) {
  AcousticScene s = static_scene(Vec3(1, 1, 1), 0.3, 0, 1.0, 8);
  s.snr_db = 10.0;
  MicSignals clean;
  clean.samples = Eigen::MatrixXd::Zero(12, 16000);
  clean.mask.assign(stft_frame_count(16000, 4096, 3072), 1.0);
  EXPECT_THROW(add_noise(clean, s), SimulationError);
}

TEST(AddNoise, DirectionalNoiseIsAPointSource) {
  AcousticScene s = static_scene(Vec3(1, 1, 1), 0.3, 0, 3.0, 9);
  s.noise_mode = NoiseMode::Directional;
  s.noise_position = Vec3(5.2, 1.1, 2.4);
  s.snr_db = 0.0;
  const MicSignals clean = render_ism(s);
  const MicSignals noisy = add_noise(clean, s);
  const Eigen::MatrixXd noise = noisy.samples - clean.samples;
  const LagGrid grid = make_lag_grid(max_delay_samples(s.array), 64, 4096);
  const auto pairs = enumerate_pairs(s.array);
  const GccFeatures f = extract_gcc(noise, pairs, grid, s.frames, 16000.0);
  const Vec3 z = (s.noise_position - s.array_centroid()).normalized();
  std::size_t hits = 0, total = 0;
  for (std::size_t t = 0; t < f.frames(); ++t)
    for (std::size_t k = 0; k < pairs.size(); ++k) {
      ++total;
      hits += std::abs(grid.lags[argmax(f.values.row(k, t), 64)] - pairwise_delay(z, pairs[k], 343.0, 16000.0)) <= 0.5;
    }
  EXPECT_GE(static_cast<double>(hits) / static_cast<double>(total), 0.9);
}

TEST(Excitation, BurstsProduceInactiveFrames) {
  ExcitationConfig e;
  const auto x = generate_excitation(e, 16000 * 10, 16000.0, 3);
  const auto mask = activity_mask(x, StftConfig{}, -40.0);
  const double active = std::accumulate(mask.begin(), mask.end(), 0.0);
  EXPECT_GT(active, 0.0);
  EXPECT_LE(active, static_cast<double>(mask.size()));
  EXPECT_EQ(generate_excitation(e, 1000, 16000.0, 3), generate_excitation(e, 1000, 16000.0, 3));
}
