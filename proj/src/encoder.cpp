#include "physdoa/encoder.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

namespace physdoa {

using nn::MatF;
using nn::MapShape;

EncoderConfig EncoderConfig::paper() { return {}; }

EncoderConfig EncoderConfig::desk() {
  EncoderConfig c;
  c.channels = 32;
  c.hidden = 64;
  c.mlp_width = 64;
  c.head_width = 64;
  return c;
}

EncoderConfig EncoderConfig::preset(const std::string& name) {
  if (name == "paper") return paper();
  if (name == "desk") return desk();
  throw ConfigError("unknown encoder preset: " + name);
}

std::size_t EncoderConfig::latent_frames(std::size_t input_frames) const {
  const auto f = static_cast<std::size_t>(time_factor());
  return (input_frames + f - 1) / f;
}

void EncoderConfig::validate() const {
  if (lags < 1 || channels < 1 || hidden < 1 || gru_layers < 1 || mlp_width < 1 || head_width < 1)
    throw ConfigError("encoder sizes must be positive");
  for (int i = 0; i < 3; ++i)
    if (pool_time[static_cast<std::size_t>(i)] < 1 || pool_lag[static_cast<std::size_t>(i)] < 1)
      throw ConfigError("pool sizes must be positive");
  if (!(metadata_scale > 0.0) || !std::isfinite(metadata_scale)) throw ConfigError("metadata_scale must be positive");
  if (!(input_scale > 0.0) || !std::isfinite(input_scale)) throw ConfigError("input_scale must be positive");
  if (lags % lag_factor() != 0) throw ConfigError("lag count must be divisible by the lag pooling product");
}

void to_json(nlohmann::json& j, const EncoderConfig& c) {
  j = {{"lags", c.lags},         {"channels", c.channels},     {"hidden", c.hidden},
       {"gru_layers", c.gru_layers}, {"mlp_width", c.mlp_width}, {"head_width", c.head_width},
       {"pool_time", c.pool_time}, {"pool_lag", c.pool_lag}, {"metadata_scale", c.metadata_scale},
       {"input_scale", c.input_scale}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.lags = j.at("lags").get<int>();
  c.channels = j.at("channels").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.gru_layers = j.at("gru_layers").get<int>();
  c.mlp_width = j.at("mlp_width").get<int>();
  c.head_width = j.at("head_width").get<int>();
  c.pool_time = j.at("pool_time").get<std::array<int, 3>>();
  c.pool_lag = j.at("pool_lag").get<std::array<int, 3>>();
  c.metadata_scale = j.value("metadata_scale", c.metadata_scale);
  c.input_scale = j.value("input_scale", c.input_scale);
  c.validate();
  return c;
}

Encoder::Encoder(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  int cin = 1;
  for (std::size_t l = 0; l < 3; ++l) {
    const std::string p = "block" + std::to_string(l + 1);
    Block& b = blocks_[l];
    b.conv = nn::Conv2d(p + ".conv", cin, cfg_.channels);
    b.meta = nn::Linear(p + ".meta", 6, cfg_.channels);
    b.norm = nn::GroupNorm1(p + ".norm", cfg_.channels);
    b.act = nn::PRelu(p + ".prelu");
    b.pool = nn::MaxPool2d(cfg_.pool_time[l], cfg_.pool_lag[l]);
    b.conv.reset(rng);
    b.meta.reset(rng);
    cin = cfg_.channels;
  }
  int d = cfg_.lags / cfg_.lag_factor() * cfg_.channels;
  for (int l = 0; l < cfg_.gru_layers; ++l) {
    gru_.emplace_back("gru" + std::to_string(l + 1), d, cfg_.hidden);
    gru_.back().reset(rng);
    d = cfg_.hidden;
  }
  mlp1_ = nn::Linear("pair_mlp1", cfg_.hidden, cfg_.mlp_width);
  mlp2_ = nn::Linear("pair_mlp2", cfg_.mlp_width, cfg_.mlp_width);
  mlp_act1_ = nn::PRelu("pair_mlp1.prelu");
  mlp_act2_ = nn::PRelu("pair_mlp2.prelu");
  head1_ = nn::Linear("head1", cfg_.mlp_width, cfg_.head_width);
  head_act_ = nn::PRelu("head1.prelu");
  head2_ = nn::Linear("head2", cfg_.head_width, 4);
  for (auto* l : {&mlp1_, &mlp2_, &head1_, &head2_}) l->reset(rng);
}

std::vector<nn::Param*> Encoder::params() {
  std::vector<nn::Param*> out;
  auto add = [&out](std::vector<nn::Param*> ps) { out.insert(out.end(), ps.begin(), ps.end()); };
  for (Block& b : blocks_) {
    add(b.conv.params());
    add(b.meta.params());
    add(b.norm.params());
    add(b.act.params());
  }
  for (nn::Gru& g : gru_) add(g.params());
  add(mlp1_.params());
  add(mlp_act1_.params());
  add(mlp2_.params());
  add(mlp_act2_.params());
  add(head1_.params());
  add(head_act_.params());
  add(head2_.params());
  return out;
}

std::vector<const nn::Param*> Encoder::params() const {
  auto ps = const_cast<Encoder*>(this)->params();
  return {ps.begin(), ps.end()};
}

std::size_t Encoder::param_count() const {
  std::size_t n = 0;
  for (const nn::Param* p : params()) n += static_cast<std::size_t>(p->size());
  return n;
}

void Encoder::zero_grad() {
  for (nn::Param* p : params()) p->zero_grad();
}

namespace {

// (P, T, G) features to NHWC rows with edge-replicated time padding.
MatF pack_input(const Tensor3<float>& g, std::size_t padded, float scale) {
  const std::size_t P = g.dim0(), T = g.dim1(), G = g.dim2();
  MatF x(static_cast<Eigen::Index>(P * padded * G), 1);
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t t = 0; t < padded; ++t) {
      const float* src = g.row(p, std::min(t, T - 1));
      std::transform(src, src + G, x.data() + (p * padded + t) * G, [scale](float v) { return scale * v; });
    }
  return x;
}

MatF metadata_matrix(const std::vector<PairMetadata>& m, double scale) {
  MatF out(static_cast<Eigen::Index>(m.size()), 6);
  for (std::size_t p = 0; p < m.size(); ++p)
    for (int k = 0; k < 6; ++k)
      out(static_cast<Eigen::Index>(p), k) = static_cast<float>(scale * m[p][static_cast<std::size_t>(k)]);
  return out;
}

}  // namespace

MatF Encoder::conv_block(std::size_t level, const MatF& x, MapShape& s, const std::vector<PairMetadata>& metadata,
                         void* block_cache) const {
  const Block& b = blocks_.at(level);
  auto* bc = static_cast<Cache::BlockCache*>(block_cache);
  if (metadata.size() != static_cast<std::size_t>(s.n)) throw ShapeError("pair count does not match metadata");
  if (x.rows() != s.rows() || x.cols() != b.conv.in_channels()) throw ShapeError("conv block input has the wrong shape");
  const MapShape pooled = b.pool.output_shape({s.n, s.h, s.w, b.conv.out_channels()});
  if (bc) bc->in = s;
  MatF y = b.conv.forward(x, s, bc ? &bc->conv : nullptr);
  const MatF mb = b.meta.forward(metadata_matrix(metadata, cfg_.metadata_scale), bc ? &bc->meta : nullptr);
  s.c = b.conv.out_channels();
  const Eigen::Index per = static_cast<Eigen::Index>(s.h) * s.w;
  for (int p = 0; p < s.n; ++p) y.middleRows(p * per, per).rowwise() += mb.row(p);
  y = b.norm.forward(y, s, bc ? &bc->norm : nullptr);
  y = b.act.forward(y, bc ? &bc->act : nullptr);
  MatF out = b.pool.forward(y, s, bc ? &bc->pool : nullptr);
  s = pooled;
  return out;
}

PosteriorSequence Encoder::forward(const Tensor3<float>& g, const std::vector<PairMetadata>& metadata,
                                   Cache* cache) const {
  const std::size_t P = g.dim0(), T = g.dim1();
  if (P == 0 || T == 0) throw ShapeError("encoder input is empty");
  if (metadata.size() != P) throw ShapeError("pair count does not match metadata");
  if (g.dim2() != static_cast<std::size_t>(cfg_.lags)) throw ShapeError("lag count does not match encoder config");
  const std::size_t Tl = cfg_.latent_frames(T);
  const std::size_t padded = Tl * static_cast<std::size_t>(cfg_.time_factor());

  MatF x = pack_input(g, padded, static_cast<float>(cfg_.input_scale));
  MapShape s{static_cast<int>(P), static_cast<int>(padded), cfg_.lags, 1};
  if (cache) {
    cache->pairs = P;
    cache->frames = T;
    cache->padded = padded;
    cache->latent = Tl;
  }
  for (std::size_t l = 0; l < 3; ++l) x = conv_block(l, x, s, metadata, cache ? &cache->blocks[l] : nullptr);
  // (P*T'*W) x C is bitwise the same buffer as (P*T') x (W*C).
  MatF h = Eigen::Map<const MatF>(x.data(), static_cast<Eigen::Index>(P * Tl), static_cast<Eigen::Index>(s.w) * s.c);
  if (cache) cache->gru.assign(gru_.size(), {});
  for (std::size_t l = 0; l < gru_.size(); ++l)
    h = gru_[l].forward(h, static_cast<int>(P), static_cast<int>(Tl), cache ? &cache->gru[l] : nullptr);
  h = mlp1_.forward(h, cache ? &cache->mlp1 : nullptr);
  h = mlp_act1_.forward(h, cache ? &cache->mlp_act1 : nullptr);
  h = mlp2_.forward(h, cache ? &cache->mlp2 : nullptr);
  h = mlp_act2_.forward(h, cache ? &cache->mlp_act2 : nullptr);
  MatF sum = MatF::Zero(static_cast<Eigen::Index>(Tl), h.cols());
  for (std::size_t p = 0; p < P; ++p) sum += h.middleRows(static_cast<Eigen::Index>(p * Tl), static_cast<Eigen::Index>(Tl));
  MatF o = head1_.forward(sum, cache ? &cache->head1 : nullptr);
  o = head_act_.forward(o, cache ? &cache->head_act : nullptr);
  MatF raw = head2_.forward(o, cache ? &cache->head2 : nullptr);

  PosteriorSequence out(Tl);
  std::vector<bool> guarded(Tl, false);
  Vec3 prev = Vec3::UnitX();
  for (std::size_t t = 0; t < Tl; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    const Vec3 v(raw(r, 0), raw(r, 1), raw(r, 2));
    const double n = v.norm();
    if (n < 1e-8 || !std::isfinite(n)) {
      out[t].mu = prev;
      guarded[t] = true;
    } else {
      out[t].mu = v / n;
    }
    out[t].kappa = softplus(static_cast<double>(raw(r, 3))) + kKappaMin;
    prev = out[t].mu;
  }
  if (cache) {
    cache->raw = std::move(raw);
    cache->mu_guarded = std::move(guarded);
  }
  return out;
}

void Encoder::backward(const Cache& c, const std::vector<Vec3>& d_mu, const std::vector<double>& d_kappa) {
  const std::size_t Tl = c.latent, P = c.pairs;
  if (d_mu.size() != Tl || d_kappa.size() != Tl) throw ShapeError("gradient length does not match latent frames");
  MatF draw = MatF::Zero(static_cast<Eigen::Index>(Tl), 4);
  for (std::size_t t = 0; t < Tl; ++t) {
    const auto r = static_cast<Eigen::Index>(t);
    if (!c.mu_guarded[t]) {
      const Vec3 v(c.raw(r, 0), c.raw(r, 1), c.raw(r, 2));
      const double n = v.norm();
      const Vec3 mu = v / n;
      const Vec3 dv = (d_mu[t] - mu * mu.dot(d_mu[t])) / n;
      for (int k = 0; k < 3; ++k) draw(r, k) = static_cast<float>(dv[k]);
    }
    draw(r, 3) = static_cast<float>(d_kappa[t] * sigmoid(c.raw(r, 3)));
  }
  MatF d = head2_.backward(c.head2, draw);
  d = head_act_.backward(c.head_act, d);
  const MatF dsum = head1_.backward(c.head1, d);

  MatF dh(static_cast<Eigen::Index>(P * Tl), dsum.cols());
  for (std::size_t p = 0; p < P; ++p) dh.middleRows(static_cast<Eigen::Index>(p * Tl), static_cast<Eigen::Index>(Tl)) = dsum;
  dh = mlp_act2_.backward(c.mlp_act2, dh);
  dh = mlp2_.backward(c.mlp2, dh);
  dh = mlp_act1_.backward(c.mlp_act1, dh);
  dh = mlp1_.backward(c.mlp1, dh);
  for (std::size_t l = gru_.size(); l-- > 0;) dh = gru_[l].backward(c.gru[l], dh);

  MatF dx = Eigen::Map<const MatF>(dh.data(), dh.size() / cfg_.channels, cfg_.channels);
  for (std::size_t l = 3; l-- > 0;) {
    Block& b = blocks_[l];
    const Cache::BlockCache& bc = c.blocks[l];
    MatF dy = b.pool.backward(bc.pool, dx);
    dy = b.act.backward(bc.act, dy);
    dy = b.norm.backward(bc.norm, dy);
    const Eigen::Index per = static_cast<Eigen::Index>(bc.in.h) * bc.in.w;
    MatF dmeta(static_cast<Eigen::Index>(P), cfg_.channels);
    for (std::size_t p = 0; p < P; ++p)
      dmeta.row(static_cast<Eigen::Index>(p)) = dy.middleRows(static_cast<Eigen::Index>(p) * per, per).colwise().sum();
    b.meta.backward(bc.meta, dmeta, false);
    dx = b.conv.backward(bc.conv, dy, l > 0);
  }
}

nn::MatF Encoder::pair_sum(const Tensor3<float>& g, const std::vector<PairMetadata>& metadata) const {
  Cache c;
  forward(g, metadata, &c);
  return c.head1.x;
}

std::uint64_t Encoder::macs(const EncoderConfig& cfg, std::size_t pairs, std::size_t frames) {
  const std::uint64_t P = pairs;
  const std::uint64_t Tl = cfg.latent_frames(frames);
  std::uint64_t h = Tl * static_cast<std::uint64_t>(cfg.time_factor());
  std::uint64_t w = static_cast<std::uint64_t>(cfg.lags);
  std::uint64_t cin = 1;
  const std::uint64_t C = static_cast<std::uint64_t>(cfg.channels);
  std::uint64_t total = 0;
  for (std::size_t l = 0; l < 3; ++l) {
    total += P * h * w * 9 * cin * C;
    total += P * 6 * C;
    h /= static_cast<std::uint64_t>(cfg.pool_time[l]);
    w /= static_cast<std::uint64_t>(cfg.pool_lag[l]);
    cin = C;
  }
  std::uint64_t d = w * C;
  const std::uint64_t H = static_cast<std::uint64_t>(cfg.hidden);
  for (int l = 0; l < cfg.gru_layers; ++l) {
    total += P * Tl * 3 * H * (d + H);
    d = H;
  }
  const std::uint64_t W = static_cast<std::uint64_t>(cfg.mlp_width);
  const std::uint64_t Hd = static_cast<std::uint64_t>(cfg.head_width);
  total += P * Tl * (H * W + W * W);
  total += Tl * (W * Hd + Hd * 4);
  return total;
}

}  // namespace physdoa
