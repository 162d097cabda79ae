#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "physdoa/nn.hpp"

using namespace physdoa;
using namespace physdoa::nn;

namespace {

MatF random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, float scale = 1.0f) {
  std::normal_distribution<float> n(0.0f, scale);
  MatF m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

double dot(const MatF& a, const MatF& b) { return a.cast<double>().cwiseProduct(b.cast<double>()).sum(); }

// Central differences on up to `samples` entries of `value`, compared with
// the analytic gradient. Float forward passes limit the attainable accuracy.
void expect_grad(MatF& value, const MatF& grad, const std::function<double()>& loss, std::mt19937_64& rng,
                 const std::string& what, int samples = 24, float h = 1e-2f) {
  ASSERT_EQ(value.rows(), grad.rows());
  ASSERT_EQ(value.cols(), grad.cols());
  std::uniform_int_distribution<Eigen::Index> pick(0, value.size() - 1);
  for (int s = 0; s < std::min<int>(samples, static_cast<int>(value.size())); ++s) {
    const Eigen::Index i = value.size() <= samples ? s : pick(rng);
    const float keep = value.data()[i];
    value.data()[i] = keep + h;
    const double lp = loss();
    value.data()[i] = keep - h;
    const double lm = loss();
    value.data()[i] = keep;
    const double fd = (lp - lm) / (2.0 * h);
    EXPECT_NEAR(grad.data()[i], fd, 5e-3 + 2e-2 * std::abs(fd)) << what << " entry " << i;
  }
}

}  // namespace

TEST(Nn, LinearGradients) {
  std::mt19937_64 rng(1);
  Linear l("l", 5, 3);
  l.reset(rng);
  MatF x = random_mat(4, 5, rng);
  const MatF c = random_mat(4, 3, rng);
  auto loss = [&] { return dot(l.forward(x, nullptr), c); };
  Linear::Cache cache;
  l.forward(x, &cache);
  const MatF dx = l.backward(cache, c);
  expect_grad(l.weight.value, l.weight.grad, loss, rng, "weight");
  expect_grad(l.bias.value, l.bias.grad, loss, rng, "bias");
  expect_grad(x, dx, loss, rng, "input");
}

TEST(Nn, LinearParamCountIsClosedForm) {
  Linear l("toy", 7, 3);
  EXPECT_EQ(l.weight.size() + l.bias.size(), 7 * 3 + 3);
}

TEST(Nn, PReluGradients) {
  std::mt19937_64 rng(2);
  PRelu a("a");
  MatF x = random_mat(6, 4, rng);
  const MatF c = random_mat(6, 4, rng);
  auto loss = [&] { return dot(a.forward(x, nullptr), c); };
  PRelu::Cache cache;
  EXPECT_FLOAT_EQ(a.forward(MatF::Constant(1, 1, -2.0f), nullptr)(0, 0), -0.5f);
  a.forward(x, &cache);
  const MatF dx = a.backward(cache, c);
  expect_grad(a.alpha.value, a.alpha.grad, loss, rng, "alpha");
  expect_grad(x, dx, loss, rng, "input", 24, 1e-3f);
}

TEST(Nn, Conv2dGradients) {
  std::mt19937_64 rng(3);
  Conv2d conv("c", 2, 3);
  conv.reset(rng);
  const MapShape s{2, 5, 4, 2};
  MatF x = random_mat(s.rows(), 2, rng);
  const MatF c = random_mat(s.rows(), 3, rng);
  auto loss = [&] { return dot(conv.forward(x, s, nullptr), c); };
  Conv2d::Cache cache;
  conv.forward(x, s, &cache);
  const MatF dx = conv.backward(cache, c, true);
  expect_grad(conv.weight.value, conv.weight.grad, loss, rng, "weight");
  expect_grad(conv.bias.value, conv.bias.grad, loss, rng, "bias");
  expect_grad(x, dx, loss, rng, "input");
}

TEST(Nn, Conv2dMatchesDirectConvolution) {
  std::mt19937_64 rng(4);
  Conv2d conv("c", 2, 2);
  conv.reset(rng);
  const MapShape s{1, 4, 5, 2};
  const MatF x = random_mat(s.rows(), 2, rng);
  const MatF y = conv.forward(x, s, nullptr);
  for (int oy = 0; oy < 4; ++oy)
    for (int ox = 0; ox < 5; ++ox)
      for (int co = 0; co < 2; ++co) {
        double acc = conv.bias.value(0, co);
        for (int ky = 0; ky < 3; ++ky)
          for (int kx = 0; kx < 3; ++kx)
            for (int ci = 0; ci < 2; ++ci) {
              const int iy = oy + ky - 1, ix = ox + kx - 1;
              if (iy < 0 || iy >= 4 || ix < 0 || ix >= 5) continue;
              acc += conv.weight.value(co, (ky * 3 + kx) * 2 + ci) * x(iy * 5 + ix, ci);
            }
        EXPECT_NEAR(y(oy * 5 + ox, co), acc, 1e-5);
      }
}

TEST(Nn, GroupNormGradients) {
  std::mt19937_64 rng(5);
  GroupNorm1 gn("g", 3);
  gn.gamma.value = random_mat(1, 3, rng, 0.5f).array() + 1.0f;
  gn.beta.value = random_mat(1, 3, rng, 0.5f);
  const MapShape s{2, 3, 4, 3};
  MatF x = random_mat(s.rows(), 3, rng, 2.0f);
  const MatF c = random_mat(s.rows(), 3, rng);
  auto loss = [&] { return dot(gn.forward(x, s, nullptr), c); };
  GroupNorm1::Cache cache;
  const MatF y = gn.forward(x, s, &cache);
  const MatF dx = gn.backward(cache, c);
  expect_grad(gn.gamma.value, gn.gamma.grad, loss, rng, "gamma");
  expect_grad(gn.beta.value, gn.beta.grad, loss, rng, "beta");
  expect_grad(x, dx, loss, rng, "input", 24, 2e-3f);

  // Unit gamma, zero beta: per-sample zero mean, unit variance.
  GroupNorm1 plain("p", 3);
  const MatF z = plain.forward(x, s, nullptr);
  const Eigen::Index per = 3 * 4;
  for (int n = 0; n < 2; ++n) {
    const MatF blk = z.middleRows(n * per, per);
    EXPECT_NEAR(blk.mean(), 0.0, 1e-5);
    EXPECT_NEAR((blk.array() - blk.mean()).square().mean(), 1.0, 1e-3);
  }
}

TEST(Nn, MaxPool) {
  std::mt19937_64 rng(6);
  MaxPool2d pool(5, 2);
  const MapShape s{1, 100, 64, 1};
  EXPECT_EQ(pool.output_shape(s).h, 20);
  EXPECT_EQ(pool.output_shape(s).w, 32);
  EXPECT_THROW(pool.output_shape({1, 4, 64, 1}), ShapeError);

  const MapShape t{2, 4, 4, 2};
  MaxPool2d p2(2, 2);
  MatF x = random_mat(t.rows(), 2, rng);
  const MatF c = random_mat(p2.output_shape(t).rows(), 2, rng);
  auto loss = [&] { return dot(p2.forward(x, t, nullptr), c); };
  MaxPool2d::Cache cache;
  p2.forward(x, t, &cache);
  const MatF dx = p2.backward(cache, c);
  expect_grad(x, dx, loss, rng, "input", 64, 1e-4f);
}

TEST(Nn, GruGradients) {
  std::mt19937_64 rng(7);
  Gru gru("gru", 4, 3);
  gru.reset(rng);
  const int batch = 2, steps = 5;
  MatF x = random_mat(batch * steps, 4, rng);
  const MatF c = random_mat(batch * steps, 3, rng);
  auto loss = [&] { return dot(gru.forward(x, batch, steps, nullptr), c); };
  Gru::Cache cache;
  gru.forward(x, batch, steps, &cache);
  const MatF dx = gru.backward(cache, c);
  for (Param* p : gru.params()) expect_grad(p->value, p->grad, loss, rng, p->name);
  expect_grad(x, dx, loss, rng, "input");
}

TEST(Nn, GruMatchesReferenceStep) {
  // One step from zero state: h = (1 - z) * n with n = tanh(W_in x + b_in + r * b_hn).
  std::mt19937_64 rng(8);
  Gru gru("gru", 2, 2);
  gru.reset(rng);
  const MatF x = random_mat(1, 2, rng);
  const MatF h = gru.forward(x, 1, 1, nullptr);
  const Eigen::VectorXf gi = gru.w_ih.value * x.transpose() + gru.b_ih.value.transpose();
  const Eigen::VectorXf gh = gru.b_hh.value.transpose();
  for (int k = 0; k < 2; ++k) {
    const float r = 1.0f / (1.0f + std::exp(-(gi(k) + gh(k))));
    const float z = 1.0f / (1.0f + std::exp(-(gi(2 + k) + gh(2 + k))));
    const float n = std::tanh(gi(4 + k) + r * gh(4 + k));
    EXPECT_NEAR(h(0, k), (1 - z) * n, 1e-6);
  }
}

TEST(Nn, AdamFirstStepIsSignedLearningRate) {
  Param p("p", 1, 3);
  p.value << 1.0f, 2.0f, 3.0f;
  p.grad << 0.5f, -2.0f, 1e-3f;
  Adam adam;
  adam.step({&p}, 0.1);
  EXPECT_NEAR(p.value(0, 0), 0.9f, 1e-5);
  EXPECT_NEAR(p.value(0, 1), 2.1f, 1e-5);
  EXPECT_NEAR(p.value(0, 2), 2.9f, 1e-4);
  EXPECT_EQ(adam.steps(), 1);
}
