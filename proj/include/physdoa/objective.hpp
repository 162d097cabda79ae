#pragma once

#include <array>
#include <vector>

#include "physdoa/encoder.hpp"
#include "physdoa/features.hpp"
#include "physdoa/physdec.hpp"

namespace physdoa {

struct LossBreakdown {
  double physics = 0.0;
  double kl = 0.0;
  double beta = 0.0;
  double total = 0.0;
  double mask_coverage = 0.0;  // active fraction of latent frames
};

/// Mask-weighted cross-entropy sum_k sum_tau -p_in log p_dec, normalized by
/// the total mask weight. Zero when the mask is all zero.
double physics_loss(const DelayDistribution& p_in, const DelayDistribution& log_p_dec,
                    const std::vector<double>& mask);

/// Mean of kl_vmf_uniform over latent frames.
double kl_term(const PosteriorSequence& q);

struct BetaSchedule {
  double beta = 1.0;
  bool deterministic = false;  // z = mu, no sampling
};
BetaSchedule beta_schedule(int epoch, int total_epochs, double warmup_fraction = 0.05);

/// Log decoder distribution for a sequence of latent directions, (P, T', G).
DelayDistribution decoder_log_distribution(const PhysicsDecoder& decoder, const std::vector<Vec3>& z);

struct ObjectiveOptions {
  double beta = 1.0;
  bool deterministic = false;
  bool mask_kl = false;
  // Batch-level normalizers: total mask weight (physics) and total latent
  // frames, or total mask weight when mask_kl (KL).
  double physics_norm = 1.0;
  double kl_norm = 1.0;
};

/// One clip's contribution to the batch objective, with gradients w.r.t.
/// the encoder outputs and the decoder's raw sigma.
struct ClipObjective {
  LossBreakdown loss;
  std::vector<Vec3> d_mu;
  std::vector<double> d_kappa;
  double d_sigma_raw = 0.0;
  std::vector<Vec3> z;
};

/// uniforms holds (u1, u2) per latent frame; ignored when deterministic.
ClipObjective clip_objective(const PosteriorSequence& q, const DelayDistribution& p_in,
                             const std::vector<double>& mask, const PhysicsDecoder& decoder,
                             const ObjectiveOptions& opt, const std::vector<std::array<double, 2>>& uniforms,
                             bool want_grad = true);

}  // namespace physdoa
