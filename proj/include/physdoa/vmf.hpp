#pragma once

#include "physdoa/common.hpp"

namespace physdoa {

/// von Mises-Fisher parameters on S^2.
struct VmfParams {
  Vec3 mu = Vec3::UnitX();
  double kappa = 0.0;
};

/// Azimuth in (-pi, pi], elevation in [-pi/2, pi/2]. At the poles the
/// azimuth is defined as 0.
struct DoaAngles {
  double azimuth = 0.0;
  double elevation = 0.0;
};

inline constexpr double kKappaFloor = 1e-8;
inline constexpr double kLog4Pi = 2.5310242469692907;

/// log(kappa / sinh(kappa)), finite for all kappa >= 0.
double log_kappa_over_sinh(double kappa);

double vmf_log_density(const Vec3& z, const VmfParams& params);

/// Inverse CDF of the canonical (north-pole) component w in [-1, 1].
double vmf_inverse_cdf(double kappa, double u1);
/// d w / d kappa of vmf_inverse_cdf at fixed u1.
double vmf_inverse_cdf_dkappa(double kappa, double u1);

/// Orthonormal tangent basis (e1, e2) of mu. The reference axis is the
/// canonical basis vector least aligned with mu.
struct TangentBasis {
  Vec3 e1;
  Vec3 e2;
  Vec3 reference;
};
TangentBasis tangent_basis(const Vec3& mu);

/// Reparameterized sample z = r cos(2 pi u2) e1 + r sin(2 pi u2) e2 + w mu.
Vec3 sample_vmf(const VmfParams& params, double u1, double u2);

/// Pathwise gradients of a sample: given dL/dz returns dL/dmu and dL/dkappa
/// for the same (u1, u2).
struct VmfSampleGrad {
  Vec3 d_mu;
  double d_kappa;
};
VmfSampleGrad sample_vmf_backward(const VmfParams& params, double u1, double u2, const Vec3& d_z);

/// KL(vMF(mu, kappa) || Uniform(S^2)) in closed form.
double kl_vmf_uniform(double kappa);
double kl_vmf_uniform_dkappa(double kappa);

/// Mean resultant length A(kappa) = coth(kappa) - 1/kappa.
double mean_resultant_length(double kappa);

DoaAngles to_angles(const Vec3& v);
Vec3 from_angles(const DoaAngles& a);

}  // namespace physdoa
