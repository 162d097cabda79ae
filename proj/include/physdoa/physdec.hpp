#pragma once

#include <span>
#include <vector>

#include "physdoa/features.hpp"
#include "physdoa/geometry.hpp"

namespace physdoa {

/// Far-field TDOA in samples for a unit direction z: (v_i - v_j)^T z * F_s / c.
double pairwise_delay(const Vec3& z, const MicPair& pair, double speed_of_sound, double sample_rate);

/// log-softmax over lags of -0.5 * ((tau - tau_hat) / sigma)^2.
void delay_log_likelihood(double tau_hat, std::span<const double> lags, double sigma, std::span<double> out);
std::vector<double> delay_likelihood(double tau_hat, std::span<const double> lags, double sigma);

/// Gaussian-over-lags likelihood used only during training. sigma is
/// global across pairs and frames and kept positive through a softplus.
class PhysicsDecoder {
 public:
  PhysicsDecoder(const MicArray& array, LagGrid grid, double sigma_init_bins = 1.5);

  double sigma() const;
  double sigma_raw() const { return sigma_raw_; }
  void set_sigma_raw(double raw) { sigma_raw_ = raw; }
  void set_sigma(double sigma);
  bool frozen() const { return frozen_; }
  void set_frozen(bool f) { frozen_ = f; }

  const LagGrid& grid() const { return grid_; }
  const std::vector<MicPair>& pairs() const { return pairs_; }
  double delay(const Vec3& z, std::size_t pair) const;

  /// Cross-entropy sum_k sum_tau -p_in log p_dec for one latent frame.
  /// p_in is P x G row-major. Optionally accumulates dCE/dz and dCE/dsigma_raw.
  struct FrameResult {
    double loss = 0.0;
    Vec3 d_z = Vec3::Zero();
    double d_sigma_raw = 0.0;
  };
  FrameResult frame_cross_entropy(const Vec3& z, const double* p_in, bool want_grad) const;

 private:
  std::vector<MicPair> pairs_;
  double c_;
  double fs_;
  LagGrid grid_;
  double sigma_raw_;
  bool frozen_ = false;
};

}  // namespace physdoa
