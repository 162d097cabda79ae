#include "physdoa/objective.hpp"

#include <cmath>

namespace physdoa {

double physics_loss(const DelayDistribution& p_in, const DelayDistribution& log_p_dec,
                    const std::vector<double>& mask) {
  if (!p_in.same_shape(log_p_dec)) throw ShapeError("input and decoder distributions differ in shape");
  if (mask.size() != p_in.dim1()) throw ShapeError("mask length does not match frames");
  double num = 0.0, den = 0.0;
  for (std::size_t t = 0; t < p_in.dim1(); ++t) {
    if (mask[t] < 0.0 || mask[t] > 1.0) throw ArgumentError("mask weights must lie in [0, 1]");
    den += mask[t];
    if (mask[t] == 0.0) continue;
    double ce = 0.0;
    for (std::size_t k = 0; k < p_in.dim0(); ++k) {
      const double* p = p_in.row(k, t);
      const double* lq = log_p_dec.row(k, t);
      for (std::size_t g = 0; g < p_in.dim2(); ++g) ce -= p[g] * lq[g];
    }
    num += mask[t] * ce;
  }
  return den > 0.0 ? num / den : 0.0;
}

double kl_term(const PosteriorSequence& q) {
  if (q.empty()) return 0.0;
  double s = 0.0;
  for (const auto& v : q) s += kl_vmf_uniform(v.kappa);
  return s / static_cast<double>(q.size());
}

BetaSchedule beta_schedule(int epoch, int total_epochs, double warmup_fraction) {
  if (total_epochs < 1 || epoch < 0 || epoch >= total_epochs) throw ArgumentError("epoch out of range");
  const int warm = static_cast<int>(std::ceil(warmup_fraction * total_epochs - 1e-9));
  if (epoch < warm) return {0.0, true};
  return {1.0, false};
}

DelayDistribution decoder_log_distribution(const PhysicsDecoder& decoder, const std::vector<Vec3>& z) {
  const std::size_t P = decoder.pairs().size(), G = decoder.grid().size();
  DelayDistribution out(P, z.size(), G);
  const double sigma = decoder.sigma();
  for (std::size_t t = 0; t < z.size(); ++t)
    for (std::size_t k = 0; k < P; ++k)
      delay_log_likelihood(decoder.delay(z[t], k), decoder.grid().lags, sigma, std::span<double>(out.row(k, t), G));
  return out;
}

ClipObjective clip_objective(const PosteriorSequence& q, const DelayDistribution& p_in,
                             const std::vector<double>& mask, const PhysicsDecoder& decoder,
                             const ObjectiveOptions& opt, const std::vector<std::array<double, 2>>& uniforms,
                             bool want_grad) {
  const std::size_t T = q.size(), P = decoder.pairs().size(), G = decoder.grid().size();
  if (p_in.dim0() != P || p_in.dim1() != T || p_in.dim2() != G) throw ShapeError("input distribution shape mismatch");
  if (mask.size() != T) throw ShapeError("mask length does not match latent frames");
  if (!opt.deterministic && uniforms.size() != T) throw ShapeError("one uniform pair per latent frame required");

  ClipObjective r;
  r.d_mu.assign(T, Vec3::Zero());
  r.d_kappa.assign(T, 0.0);
  r.z.resize(T);
  // Pair-major input copied to frame-major so each frame is contiguous.
  std::vector<double> frame(P * G);
  double active = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    const auto [u1, u2] = opt.deterministic ? std::array<double, 2>{0.0, 0.0} : uniforms[t];
    r.z[t] = opt.deterministic ? q[t].mu : sample_vmf(q[t], u1, u2);
    const double kl = kl_vmf_uniform(q[t].kappa);
    const double kl_w = opt.mask_kl ? mask[t] : 1.0;
    r.loss.kl += kl_w * kl / opt.kl_norm;
    if (want_grad && opt.beta != 0.0) r.d_kappa[t] += opt.beta * kl_w * kl_vmf_uniform_dkappa(q[t].kappa) / opt.kl_norm;
    active += mask[t];
    if (mask[t] == 0.0) continue;
    for (std::size_t k = 0; k < P; ++k) std::copy(p_in.row(k, t), p_in.row(k, t) + G, frame.data() + k * G);
    const auto fr = decoder.frame_cross_entropy(r.z[t], frame.data(), want_grad);
    const double w = mask[t] / opt.physics_norm;
    r.loss.physics += w * fr.loss;
    if (!want_grad) continue;
    const Vec3 dz = w * fr.d_z;
    if (!decoder.frozen()) r.d_sigma_raw += w * fr.d_sigma_raw;
    if (opt.deterministic) {
      r.d_mu[t] += dz;
    } else {
      const auto g = sample_vmf_backward(q[t], u1, u2, dz);
      r.d_mu[t] += g.d_mu;
      r.d_kappa[t] += g.d_kappa;
    }
  }
  r.loss.beta = opt.beta;
  r.loss.total = r.loss.physics + opt.beta * r.loss.kl;
  r.loss.mask_coverage = T ? active / static_cast<double>(T) : 0.0;
  return r;
}

}  // namespace physdoa
