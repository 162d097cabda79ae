#include "physdoa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

namespace physdoa::nn {

Param::Param(std::string n, Eigen::Index rows, Eigen::Index cols)
    : name(std::move(n)),
      value(MatF::Zero(rows, cols)),
      grad(MatF::Zero(rows, cols)),
      m(MatF::Zero(rows, cols)),
      v(MatF::Zero(rows, cols)) {}

void init_uniform(Param& p, float bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(-bound, bound);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = u(rng);
}

// ---------------------------------------------------------------- Linear

Linear::Linear(std::string name, int in, int out)
    : weight(name + ".weight", out, in), bias(name + ".bias", 1, out) {}

void Linear::reset(std::mt19937_64& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(weight.value.cols()));
  init_uniform(weight, bound, rng);
  init_uniform(bias, bound, rng);
}

MatF Linear::forward(const MatF& x, Cache* cache) const {
  if (x.cols() != weight.value.cols()) throw ShapeError(weight.name + ": input width mismatch");
  MatF y = x * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  if (cache) cache->x = x;
  return y;
}

MatF Linear::backward(const Cache& cache, const MatF& dy, bool want_input_grad) {
  weight.grad.noalias() += dy.transpose() * cache.x;
  bias.grad.row(0) += dy.colwise().sum();
  if (!want_input_grad) return {};
  return dy * weight.value;
}

// ---------------------------------------------------------------- PReLU

PRelu::PRelu(std::string name) : alpha(name + ".alpha", 1, 1) { alpha.value(0, 0) = 0.25f; }

MatF PRelu::forward(const MatF& x, Cache* cache) const {
  const float a = alpha.value(0, 0);
  MatF y = x.unaryExpr([a](float v) { return v > 0.0f ? v : a * v; });
  if (cache) cache->x = x;
  return y;
}

MatF PRelu::backward(const Cache& cache, const MatF& dy) {
  const float a = alpha.value(0, 0);
  double da = 0.0;
  MatF dx(dy.rows(), dy.cols());
  const float* x = cache.x.data();
  const float* g = dy.data();
  float* o = dx.data();
  for (Eigen::Index i = 0; i < dy.size(); ++i) {
    if (x[i] > 0.0f) {
      o[i] = g[i];
    } else {
      o[i] = a * g[i];
      da += static_cast<double>(g[i]) * x[i];
    }
  }
  alpha.grad(0, 0) += static_cast<float>(da);
  return dx;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_channels, int out_channels)
    : weight(name + ".weight", out_channels, 9 * in_channels), bias(name + ".bias", 1, out_channels) {}

void Conv2d::reset(std::mt19937_64& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(weight.value.cols()));
  init_uniform(weight, bound, rng);
  init_uniform(bias, bound, rng);
}

MatF Conv2d::forward(const MatF& x, const MapShape& s, Cache* cache) const {
  const int cin = in_channels();
  if (s.c != cin || x.cols() != cin || x.rows() != s.rows()) throw ShapeError(weight.name + ": input shape mismatch");
  MatF col = MatF::Zero(s.rows(), 9 * cin);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int xx = 0; xx < s.w; ++xx) {
        float* dst = col.data() + (((static_cast<Eigen::Index>(n) * s.h + y) * s.w + xx) * 9 * cin);
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= s.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = xx + kx - 1;
            if (ix < 0 || ix >= s.w) continue;
            const float* src = x.data() + ((static_cast<Eigen::Index>(n) * s.h + iy) * s.w + ix) * cin;
            std::memcpy(dst + (ky * 3 + kx) * cin, src, sizeof(float) * static_cast<std::size_t>(cin));
          }
        }
      }
  MatF y = col * weight.value.transpose();
  y.rowwise() += bias.value.row(0);
  if (cache) {
    cache->col = std::move(col);
    cache->in = s;
  }
  return y;
}

MatF Conv2d::backward(const Cache& cache, const MatF& dy, bool want_input_grad) {
  weight.grad.noalias() += dy.transpose() * cache.col;
  bias.grad.row(0) += dy.colwise().sum();
  if (!want_input_grad) return {};
  const MapShape& s = cache.in;
  const int cin = s.c;
  const MatF dcol = dy * weight.value;
  MatF dx = MatF::Zero(s.rows(), cin);
  for (int n = 0; n < s.n; ++n)
    for (int y = 0; y < s.h; ++y)
      for (int xx = 0; xx < s.w; ++xx) {
        const float* src = dcol.data() + (((static_cast<Eigen::Index>(n) * s.h + y) * s.w + xx) * 9 * cin);
        for (int ky = 0; ky < 3; ++ky) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= s.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int ix = xx + kx - 1;
            if (ix < 0 || ix >= s.w) continue;
            float* dst = dx.data() + ((static_cast<Eigen::Index>(n) * s.h + iy) * s.w + ix) * cin;
            const float* g = src + (ky * 3 + kx) * cin;
            for (int c = 0; c < cin; ++c) dst[c] += g[c];
          }
        }
      }
  return dx;
}

// ---------------------------------------------------------------- GroupNorm

GroupNorm1::GroupNorm1(std::string name, int channels, float e)
    : gamma(name + ".gamma", 1, channels), beta(name + ".beta", 1, channels), eps(e) {
  gamma.value.setOnes();
}

MatF GroupNorm1::forward(const MatF& x, const MapShape& s, Cache* cache) const {
  const Eigen::Index per = static_cast<Eigen::Index>(s.h) * s.w;
  MatF y(x.rows(), x.cols());
  MatF xhat(x.rows(), x.cols());
  std::vector<float> inv(static_cast<std::size_t>(s.n));
  for (int n = 0; n < s.n; ++n) {
    const auto blk = x.middleRows(n * per, per);
    const double count = static_cast<double>(blk.size());
    const double mean = blk.cast<double>().sum() / count;
    const double var = (blk.cast<double>().array() - mean).square().sum() / count;
    const float is = static_cast<float>(1.0 / std::sqrt(var + eps));
    inv[static_cast<std::size_t>(n)] = is;
    xhat.middleRows(n * per, per) = (blk.array() - static_cast<float>(mean)) * is;
  }
  y = xhat;
  y.array().rowwise() *= gamma.value.row(0).array();
  y.rowwise() += beta.value.row(0);
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv);
    cache->shape = s;
  }
  return y;
}

MatF GroupNorm1::backward(const Cache& cache, const MatF& dy) {
  const MapShape& s = cache.shape;
  const Eigen::Index per = static_cast<Eigen::Index>(s.h) * s.w;
  gamma.grad.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  beta.grad.row(0) += dy.colwise().sum();
  MatF dxhat = dy;
  dxhat.array().rowwise() *= gamma.value.row(0).array();
  MatF dx(dy.rows(), dy.cols());
  for (int n = 0; n < s.n; ++n) {
    const auto g = dxhat.middleRows(n * per, per);
    const auto xh = cache.xhat.middleRows(n * per, per);
    const double count = static_cast<double>(g.size());
    const float mean_g = static_cast<float>(g.cast<double>().sum() / count);
    const float mean_gx = static_cast<float>((g.cast<double>().array() * xh.cast<double>().array()).sum() / count);
    dx.middleRows(n * per, per) =
        (g.array() - mean_g - xh.array() * mean_gx) * cache.inv_std[static_cast<std::size_t>(n)];
  }
  return dx;
}

// ---------------------------------------------------------------- MaxPool

MapShape MaxPool2d::output_shape(const MapShape& in) const {
  if (in.h < ph || in.w < pw) throw ShapeError("input smaller than the pooling window");
  return {in.n, in.h / ph, in.w / pw, in.c};
}

MatF MaxPool2d::forward(const MatF& x, const MapShape& s, Cache* cache) const {
  const MapShape o = output_shape(s);
  MatF y(o.rows(), s.c);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(y.size()));
  for (int n = 0; n < o.n; ++n)
    for (int oy = 0; oy < o.h; ++oy)
      for (int ox = 0; ox < o.w; ++ox) {
        const Eigen::Index orow = (static_cast<Eigen::Index>(n) * o.h + oy) * o.w + ox;
        for (int c = 0; c < s.c; ++c) {
          float best = -std::numeric_limits<float>::infinity();
          Eigen::Index best_i = 0;
          for (int dy = 0; dy < ph; ++dy)
            for (int dx = 0; dx < pw; ++dx) {
              const Eigen::Index irow = (static_cast<Eigen::Index>(n) * s.h + oy * ph + dy) * s.w + ox * pw + dx;
              const float v = x(irow, c);
              if (v > best) {
                best = v;
                best_i = irow * s.c + c;
              }
            }
          y(orow, c) = best;
          arg[static_cast<std::size_t>(orow * s.c + c)] = best_i;
        }
      }
  if (cache) {
    cache->argmax = std::move(arg);
    cache->in = s;
  }
  return y;
}

MatF MaxPool2d::backward(const Cache& cache, const MatF& dy) const {
  MatF dx = MatF::Zero(cache.in.rows(), cache.in.c);
  for (Eigen::Index i = 0; i < dy.size(); ++i) dx.data()[cache.argmax[static_cast<std::size_t>(i)]] += dy.data()[i];
  return dx;
}

// ---------------------------------------------------------------- GRU

Gru::Gru(std::string name, int input, int hidden)
    : w_ih(name + ".weight_ih", 3 * hidden, input),
      w_hh(name + ".weight_hh", 3 * hidden, hidden),
      b_ih(name + ".bias_ih", 1, 3 * hidden),
      b_hh(name + ".bias_hh", 1, 3 * hidden) {}

void Gru::reset(std::mt19937_64& rng) {
  const float bound = 1.0f / std::sqrt(static_cast<float>(hidden()));
  for (Param* p : params()) init_uniform(*p, bound, rng);
}

namespace {
float sigm(float x) { return 1.0f / (1.0f + std::exp(-x)); }
}  // namespace

MatF Gru::forward(const MatF& x, int batch, int steps, Cache* cache) const {
  const int H = hidden();
  if (x.cols() != input() || x.rows() != static_cast<Eigen::Index>(batch) * steps)
    throw ShapeError(w_ih.name + ": input shape mismatch");
  MatF gi = x * w_ih.value.transpose();
  gi.rowwise() += b_ih.value.row(0);
  MatF out(x.rows(), H);
  MatF h = MatF::Zero(batch, H);
  if (cache) {
    cache->x = x;
    cache->batch = batch;
    cache->steps = steps;
    for (auto* v : {&cache->r, &cache->z, &cache->n, &cache->hn, &cache->h_prev}) v->assign(static_cast<std::size_t>(steps), MatF());
  }
  MatF gt(batch, 3 * H);
  for (int t = 0; t < steps; ++t) {
    for (int b = 0; b < batch; ++b) gt.row(b) = gi.row(static_cast<Eigen::Index>(b) * steps + t);
    MatF gh = h * w_hh.value.transpose();
    gh.rowwise() += b_hh.value.row(0);
    MatF r = (gt.leftCols(H) + gh.leftCols(H)).unaryExpr(&sigm);
    MatF z = (gt.middleCols(H, H) + gh.middleCols(H, H)).unaryExpr(&sigm);
    MatF hn = gh.rightCols(H);
    MatF n = (gt.rightCols(H).array() + r.array() * hn.array()).tanh().matrix();
    MatF hnew = ((1.0f - z.array()) * n.array() + z.array() * h.array()).matrix();
    for (int b = 0; b < batch; ++b) out.row(static_cast<Eigen::Index>(b) * steps + t) = hnew.row(b);
    if (cache) {
      const auto k = static_cast<std::size_t>(t);
      cache->r[k] = std::move(r);
      cache->z[k] = std::move(z);
      cache->n[k] = std::move(n);
      cache->hn[k] = std::move(hn);
      cache->h_prev[k] = h;
    }
    h = std::move(hnew);
  }
  return out;
}

MatF Gru::backward(const Cache& c, const MatF& dy) {
  const int H = hidden();
  const int B = c.batch, T = c.steps;
  MatF dgi(static_cast<Eigen::Index>(B) * T, 3 * H);
  MatF dh_next = MatF::Zero(B, H);
  MatF dh(B, H), dgh(B, 3 * H);
  for (int t = T - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    for (int b = 0; b < B; ++b) dh.row(b) = dy.row(static_cast<Eigen::Index>(b) * T + t);
    dh += dh_next;
    const auto& r = c.r[k].array();
    const auto& z = c.z[k].array();
    const auto& n = c.n[k].array();
    const auto& hp = c.h_prev[k].array();
    const MatF dn = (dh.array() * (1.0f - z)).matrix();
    const MatF dz = (dh.array() * (hp - n)).matrix();
    const MatF dan = (dn.array() * (1.0f - n * n)).matrix();
    const MatF dr = (dan.array() * c.hn[k].array()).matrix();
    const MatF dar = (dr.array() * r * (1.0f - r)).matrix();
    const MatF daz = (dz.array() * z * (1.0f - z)).matrix();
    dgh.leftCols(H) = dar;
    dgh.middleCols(H, H) = daz;
    dgh.rightCols(H) = (dan.array() * r).matrix();
    w_hh.grad.noalias() += dgh.transpose() * c.h_prev[k];
    b_hh.grad.row(0) += dgh.colwise().sum();
    dh_next = (dh.array() * z).matrix() + dgh * w_hh.value;
    for (int b = 0; b < B; ++b) {
      const Eigen::Index row = static_cast<Eigen::Index>(b) * T + t;
      dgi.row(row).leftCols(H) = dar.row(b);
      dgi.row(row).middleCols(H, H) = daz.row(b);
      dgi.row(row).rightCols(H) = dan.row(b);
    }
  }
  w_ih.grad.noalias() += dgi.transpose() * c.x;
  b_ih.grad.row(0) += dgi.colwise().sum();
  return dgi * w_ih.value;
}

// ---------------------------------------------------------------- Adam

void Adam::step(const std::vector<Param*>& params, double lr) {
  ++t_;
  const double c1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  const auto b1 = static_cast<float>(b1_), b2 = static_cast<float>(b2_);
  const auto step = static_cast<float>(lr / c1);
  const auto sc2 = static_cast<float>(std::sqrt(c2));
  const auto eps = static_cast<float>(eps_);
  for (Param* p : params) {
    p->m = b1 * p->m + (1.0f - b1) * p->grad;
    p->v = b2 * p->v + (1.0f - b2) * p->grad.cwiseAbs2();
    p->value.array() -= step * p->m.array() / (p->v.array().sqrt() / sc2 + eps);
  }
}

}  // namespace physdoa::nn
