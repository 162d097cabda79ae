#include <random>

#include <gtest/gtest.h>

#include "physdoa/encoder.hpp"
#include "physdoa/geometry.hpp"

using namespace physdoa;

namespace {

EncoderConfig tiny() {
  EncoderConfig c;
  c.lags = 16;
  c.channels = 4;
  c.hidden = 6;
  c.mlp_width = 5;
  c.head_width = 5;
  return c;
}

Tensor3<float> random_g(std::size_t P, std::size_t T, std::size_t G, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 0.3f);
  Tensor3<float> g(P, T, G);
  for (float& v : g.data()) v = n(rng);
  return g;
}

std::vector<PairMetadata> random_meta(std::size_t P, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.05);
  std::vector<PairMetadata> m(P);
  for (auto& a : m)
    for (double& v : a) v = n(rng);
  return m;
}

}  // namespace

TEST(Encoder, PaperPresetParameterCount) {
  const Encoder e(EncoderConfig::paper());
  const double n = static_cast<double>(e.param_count());
  EXPECT_NEAR(n / 0.89e6, 1.0, 0.15) << n;
}

TEST(Encoder, ConvBlockZeroInputGivesZero) {
  Encoder e(tiny(), 1);
  for (std::size_t l = 0; l < 3; ++l) {
    auto& b = e.block(l);
    b.conv.bias.value.setZero();
    b.meta.bias.value.setZero();
  }
  nn::MapShape s{2, 10, 16, 1};
  const nn::MatF x = nn::MatF::Zero(s.rows(), 1);
  const std::vector<PairMetadata> meta(2, PairMetadata{});
  const nn::MatF y = e.conv_block(0, x, s, meta);
  EXPECT_EQ(s.h, 2);
  EXPECT_EQ(s.w, 8);
  EXPECT_EQ(y.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Encoder, ConvBlockPoolingShapes) {
  EncoderConfig c = tiny();
  c.lags = 64;
  Encoder e(c, 2);
  std::mt19937_64 rng(2);
  nn::MapShape s{1, 100, 64, 1};
  nn::MatF x = nn::MatF::Random(s.rows(), 1);
  e.conv_block(0, x, s, random_meta(1, rng));
  EXPECT_EQ(s.h, 20);
  EXPECT_EQ(s.w, 32);
  nn::MapShape small{1, 3, 64, 1};
  EXPECT_THROW(e.conv_block(0, nn::MatF::Zero(small.rows(), 1), small, random_meta(1, rng)), ShapeError);
}

TEST(Encoder, MetadataSwapChangesBlockOutput) {
  Encoder e(tiny(), 3);
  std::mt19937_64 rng(3);
  nn::MapShape s{1, 10, 16, 1};
  const nn::MatF x = nn::MatF::Random(s.rows(), 1);
  PairMetadata m{0.05, 0.01, -0.02, -0.05, -0.01, 0.02};
  PairMetadata swapped{m[3], m[4], m[5], m[0], m[1], m[2]};
  nn::MapShape s1 = s, s2 = s;
  const nn::MatF a = e.conv_block(0, x, s1, {m});
  const nn::MatF b = e.conv_block(0, x, s2, {swapped});
  EXPECT_GT((a - b).cwiseAbs().maxCoeff(), 1e-6f);
}

TEST(Encoder, OutputShapesAndValidity) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    const Encoder e(tiny(), static_cast<std::uint64_t>(trial));
    const std::size_t P = 1 + trial % 4, T = 1 + static_cast<std::size_t>(trial % 13);
    const auto q = e.forward(random_g(P, T, 16, rng), random_meta(P, rng));
    ASSERT_EQ(q.size(), (T + 4) / 5);
    for (const auto& v : q) {
      EXPECT_NEAR(v.mu.norm(), 1.0, 1e-6);
      EXPECT_GT(v.kappa, 0.0);
    }
  }
}

TEST(Encoder, ShapeErrors) {
  const Encoder e(tiny());
  std::mt19937_64 rng(5);
  EXPECT_THROW(e.forward(random_g(3, 10, 16, rng), random_meta(2, rng)), ShapeError);
  EXPECT_THROW(e.forward(random_g(2, 10, 12, rng), random_meta(2, rng)), ShapeError);
}

TEST(Encoder, PairPermutationInvariance) {
  const Encoder e(tiny(), 6);
  std::mt19937_64 rng(6);
  const std::size_t P = 6;
  const auto g = random_g(P, 15, 16, rng);
  const auto meta = random_meta(P, rng);
  std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
  Tensor3<float> gp(P, 15, 16);
  std::vector<PairMetadata> mp(P);
  for (std::size_t p = 0; p < P; ++p) {
    std::copy(g.row(perm[p], 0), g.row(perm[p], 0) + 15 * 16, gp.row(p, 0));
    mp[p] = meta[perm[p]];
  }
  const auto a = e.forward(g, meta), b = e.forward(gp, mp);
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_LT((a[t].mu - b[t].mu).norm(), 1e-5);
    EXPECT_NEAR(a[t].kappa, b[t].kappa, 1e-5 * std::max(1.0, a[t].kappa));
  }
}

TEST(Encoder, DuplicatedPairsDoubleTheSum) {
  const Encoder e(tiny(), 7);
  std::mt19937_64 rng(7);
  const auto g = random_g(3, 10, 16, rng);
  const auto meta = random_meta(3, rng);
  Tensor3<float> g2(6, 10, 16);
  std::vector<PairMetadata> m2(6);
  for (std::size_t p = 0; p < 6; ++p) {
    std::copy(g.row(p % 3, 0), g.row(p % 3, 0) + 160, g2.row(p, 0));
    m2[p] = meta[p % 3];
  }
  const nn::MatF s1 = e.pair_sum(g, meta), s2 = e.pair_sum(g2, m2);
  EXPECT_LT((s2 - 2.0f * s1).cwiseAbs().maxCoeff(), 1e-4f * std::max(1.0f, s1.cwiseAbs().maxCoeff()));
  for (const auto& v : e.forward(g2, m2)) {
    EXPECT_NEAR(v.mu.norm(), 1.0, 1e-6);
    EXPECT_TRUE(std::isfinite(v.kappa));
  }
}

TEST(Encoder, GradientsReachEveryParameter) {
  Encoder e(tiny(), 8);
  std::mt19937_64 rng(8);
  const auto g = random_g(3, 12, 16, rng);
  const auto meta = random_meta(3, rng);
  Encoder::Cache cache;
  const auto q = e.forward(g, meta, &cache);
  std::vector<Vec3> dmu(q.size());
  std::vector<double> dk(q.size());
  std::normal_distribution<double> n;
  for (std::size_t t = 0; t < q.size(); ++t) {
    dmu[t] = Vec3(n(rng), n(rng), n(rng));
    dk[t] = n(rng);
  }
  e.zero_grad();
  e.backward(cache, dmu, dk);
  for (const nn::Param* p : e.params()) EXPECT_GT(p->grad.norm(), 0.0f) << p->name;
}

TEST(Encoder, BackwardMatchesFiniteDifferences) {
  Encoder e(tiny(), 9);
  std::mt19937_64 rng(9);
  const auto g = random_g(2, 10, 16, rng);
  const auto meta = random_meta(2, rng);
  std::normal_distribution<double> n;
  std::vector<Vec3> a(2);
  std::vector<double> b(2);
  for (std::size_t t = 0; t < 2; ++t) {
    a[t] = Vec3(n(rng), n(rng), n(rng));
    b[t] = n(rng);
  }
  auto loss = [&] {
    const auto q = e.forward(g, meta);
    double l = 0.0;
    for (std::size_t t = 0; t < q.size(); ++t) l += a[t].dot(q[t].mu) + b[t] * q[t].kappa;
    return l;
  };
  Encoder::Cache cache;
  e.forward(g, meta, &cache);
  e.zero_grad();
  e.backward(cache, a, b);
  std::size_t checked = 0, agreed = 0;
  for (nn::Param* p : e.params()) {
    std::uniform_int_distribution<Eigen::Index> pick(0, p->value.size() - 1);
    for (int s = 0; s < 3; ++s) {
      const Eigen::Index i = pick(rng);
      const float keep = p->value.data()[i];
      const float h = 1e-2f * std::max(1.0f, std::abs(keep));
      p->value.data()[i] = keep + h;
      const double lp = loss();
      p->value.data()[i] = keep - h;
      const double lm = loss();
      p->value.data()[i] = keep;
      const double fd = (lp - lm) / (2.0 * h);
      ++checked;
      // Max-pool and PReLU kinks can be crossed by a finite step.
      if (std::abs(p->grad.data()[i] - fd) <= 2e-3 + 5e-2 * std::abs(fd)) ++agreed;
      else ADD_FAILURE() << p->name << "[" << i << "] analytic " << p->grad.data()[i] << " fd " << fd;
    }
  }
  EXPECT_EQ(agreed, checked);
}

TEST(Encoder, MacsScaleWithLags) {
  EncoderConfig a = EncoderConfig::paper(), b = a;
  b.lags = 128;
  auto conv_macs = [](const EncoderConfig& c) {
    EncoderConfig z = c;
    z.gru_layers = 1;
    z.hidden = 1;
    z.mlp_width = 1;
    z.head_width = 1;
    return static_cast<double>(Encoder::macs(z, 66, 100));
  };
  EXPECT_NEAR(conv_macs(b) / conv_macs(a), 2.0, 0.05);
}

TEST(Encoder, InputScaleEqualsScaledFeatures) {
  std::mt19937_64 rng(11);
  EncoderConfig cfg = tiny();
  const auto g = random_g(3, 10, cfg.lags, rng);
  const auto meta = random_meta(3, rng);
  Tensor3<float> g3 = g;
  for (float& v : g3.data()) v *= 3.0f;
  const Encoder plain(cfg, 5);
  cfg.input_scale = 3.0;
  const Encoder scaled(cfg, 5);
  const auto a = scaled.forward(g, meta);
  const auto b = plain.forward(g3, meta);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_NEAR((a[t].mu - b[t].mu).norm(), 0.0, 1e-5);
    EXPECT_NEAR(a[t].kappa, b[t].kappa, 1e-4 * b[t].kappa);
  }
  cfg.input_scale = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
}

TEST(Encoder, LatentFrames) {
  const EncoderConfig c;
  EXPECT_EQ(c.latent_frames(25), 5u);
  EXPECT_EQ(c.latent_frames(26), 6u);
  EXPECT_EQ(c.latent_frames(1), 1u);
  EncoderConfig bad;
  bad.lags = 60;
  EXPECT_THROW(bad.validate(), ConfigError);
}
