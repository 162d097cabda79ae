#include "physdoa/physdec.hpp"

#include <algorithm>
#include <cmath>

namespace physdoa {

double pairwise_delay(const Vec3& z, const MicPair& pair, double speed_of_sound, double sample_rate) {
  return pair.baseline.dot(z) / speed_of_sound * sample_rate;
}

void delay_log_likelihood(double tau_hat, std::span<const double> lags, double sigma, std::span<double> out) {
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < lags.size(); ++g) {
    const double d = (lags[g] - tau_hat) / sigma;
    out[g] = -0.5 * d * d;
    mx = std::max(mx, out[g]);
  }
  double sum = 0.0;
  for (std::size_t g = 0; g < lags.size(); ++g) sum += std::exp(out[g] - mx);
  const double lse = mx + std::log(sum);
  for (std::size_t g = 0; g < lags.size(); ++g) out[g] -= lse;
}

std::vector<double> delay_likelihood(double tau_hat, std::span<const double> lags, double sigma) {
  std::vector<double> out(lags.size());
  delay_log_likelihood(tau_hat, lags, sigma, out);
  for (auto& v : out) v = std::exp(v);
  return out;
}

PhysicsDecoder::PhysicsDecoder(const MicArray& array, LagGrid grid, double sigma_init_bins)
    : pairs_(enumerate_pairs(array)),
      c_(array.speed_of_sound()),
      fs_(array.sample_rate()),
      grid_(std::move(grid)),
      sigma_raw_(softplus_inv(sigma_init_bins * grid_.spacing())) {}

double PhysicsDecoder::sigma() const { return softplus(sigma_raw_); }

void PhysicsDecoder::set_sigma(double sigma) {
  if (!(sigma > 0.0)) throw ArgumentError("sigma must be positive");
  sigma_raw_ = softplus_inv(sigma);
}

double PhysicsDecoder::delay(const Vec3& z, std::size_t pair) const {
  return pairwise_delay(z, pairs_[pair], c_, fs_);
}

PhysicsDecoder::FrameResult PhysicsDecoder::frame_cross_entropy(const Vec3& z, const double* p_in,
                                                                bool want_grad) const {
  const std::size_t G = grid_.size();
  const double sigma = this->sigma();
  std::vector<double> logp(G);
  FrameResult r;
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const double tau_hat = delay(z, k);
    delay_log_likelihood(tau_hat, grid_.lags, sigma, logp);
    const double* pk = p_in + k * G;
    double ce = 0.0;
    for (std::size_t g = 0; g < G; ++g) ce -= pk[g] * logp[g];
    r.loss += ce;
    if (!want_grad) continue;
    // dCE/dl_g = mass(p_in) * p_dec_g - p_in_g; l_g = -0.5 (tau_g - tau_hat)^2 / sigma^2
    double mass = 0.0;
    for (std::size_t g = 0; g < G; ++g) mass += pk[g];
    double d_tau = 0.0, d_sigma = 0.0;
    for (std::size_t g = 0; g < G; ++g) {
      const double dl = mass * std::exp(logp[g]) - pk[g];
      const double diff = grid_.lags[g] - tau_hat;
      d_tau += dl * diff / (sigma * sigma);
      d_sigma += dl * diff * diff / (sigma * sigma * sigma);
    }
    r.d_z += d_tau * pairs_[k].baseline / c_ * fs_;
    r.d_sigma_raw += d_sigma;
  }
  r.d_sigma_raw = frozen_ ? 0.0 : r.d_sigma_raw * sigmoid(sigma_raw_);
  return r;
}

}  // namespace physdoa
