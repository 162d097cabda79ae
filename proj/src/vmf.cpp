#include "physdoa/vmf.hpp"

#include <cmath>

#include <Eigen/Geometry>

namespace physdoa {

namespace {

void check_kappa(double kappa) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa)) throw ArgumentError("kappa must be finite and >= 0");
}

// log(sinh(k)) for k > 0 without overflow.
double log_sinh(double k) {
  if (k > 20.0) return k - std::log(2.0) + std::log1p(-std::exp(-2.0 * k));
  return std::log(std::sinh(k));
}

Eigen::Matrix3d cross_matrix(const Vec3& a) {
  Eigen::Matrix3d m;
  m << 0.0, -a.z(), a.y(), a.z(), 0.0, -a.x(), -a.y(), a.x(), 0.0;
  return m;
}

}  // namespace

double log_kappa_over_sinh(double kappa) {
  check_kappa(kappa);
  if (kappa < 1e-4) {
    const double k2 = kappa * kappa;
    return -k2 / 6.0 + k2 * k2 / 180.0;
  }
  return std::log(kappa) - log_sinh(kappa);
}

double vmf_log_density(const Vec3& z, const VmfParams& params) {
  check_kappa(params.kappa);
  return log_kappa_over_sinh(params.kappa) - kLog4Pi + params.kappa * params.mu.dot(z);
}

double vmf_inverse_cdf(double kappa, double u1) {
  check_kappa(kappa);
  if (kappa < kKappaFloor) return 2.0 * u1 - 1.0;
  // w = (1/k) log((1-u) e^{-k} + u e^{k}) = 1 + log(u + (1-u) e^{-2k}) / k
  const double a = u1 + (1.0 - u1) * std::exp(-2.0 * kappa);
  const double w = 1.0 + std::log(a) / kappa;
  return std::clamp(w, -1.0, 1.0);
}

double vmf_inverse_cdf_dkappa(double kappa, double u1) {
  check_kappa(kappa);
  if (kappa < kKappaFloor) {
    // Limit of the derivative at kappa -> 0: 2 u (1-u).
    return 2.0 * u1 * (1.0 - u1);
  }
  const double e = std::exp(-2.0 * kappa);
  const double a = u1 + (1.0 - u1) * e;
  return -std::log(a) / (kappa * kappa) - 2.0 * (1.0 - u1) * e / (kappa * a);
}

TangentBasis tangent_basis(const Vec3& mu) {
  Eigen::Index axis = 0;
  mu.cwiseAbs().minCoeff(&axis);
  Vec3 ref = Vec3::Zero();
  ref[axis] = 1.0;
  const Vec3 e1 = ref.cross(mu).normalized();
  const Vec3 e2 = mu.cross(e1);
  return {e1, e2, ref};
}

Vec3 sample_vmf(const VmfParams& params, double u1, double u2) {
  const double w = vmf_inverse_cdf(params.kappa, u1);
  const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
  const double phi = 2.0 * kPi * u2;
  const auto b = tangent_basis(params.mu);
  return r * std::cos(phi) * b.e1 + r * std::sin(phi) * b.e2 + w * params.mu;
}

VmfSampleGrad sample_vmf_backward(const VmfParams& params, double u1, double u2, const Vec3& d_z) {
  const Vec3& mu = params.mu;
  const double w = vmf_inverse_cdf(params.kappa, u1);
  const double r = std::sqrt(std::max(0.0, 1.0 - w * w));
  const double c = std::cos(2.0 * kPi * u2);
  const double s = std::sin(2.0 * kPi * u2);
  const auto b = tangent_basis(mu);

  const Vec3 a = b.reference.cross(mu);
  const double an = a.norm();
  const Eigen::Matrix3d de1 =
      (Eigen::Matrix3d::Identity() - b.e1 * b.e1.transpose()) / an * cross_matrix(b.reference);
  const Eigen::Matrix3d de2 = cross_matrix(mu) * de1 - cross_matrix(b.e1);
  const Eigen::Matrix3d dz_dmu = r * c * de1 + r * s * de2 + w * Eigen::Matrix3d::Identity();

  VmfSampleGrad g;
  g.d_mu = dz_dmu.transpose() * d_z;
  // dr/dw = -w/r; at r == 0 the tangential term has no first-order effect.
  const Vec3 tangent = c * b.e1 + s * b.e2;
  const Vec3 dz_dw = (r > 1e-12 ? Vec3((-w / r) * tangent) : Vec3::Zero()) + mu;
  g.d_kappa = dz_dw.dot(d_z) * vmf_inverse_cdf_dkappa(params.kappa, u1);
  return g;
}

double kl_vmf_uniform(double kappa) {
  check_kappa(kappa);
  if (kappa < 1e-3) {
    const double k2 = kappa * kappa;
    return k2 / 6.0 - k2 * k2 / 60.0;
  }
  // kappa * coth(kappa) - 1 + log(kappa) - log(sinh(kappa))
  return kappa / std::tanh(kappa) - 1.0 + std::log(kappa) - log_sinh(kappa);
}

double kl_vmf_uniform_dkappa(double kappa) {
  check_kappa(kappa);
  if (kappa < 1e-3) return kappa / 3.0 - kappa * kappa * kappa / 15.0;
  if (kappa > 350.0) return 1.0 / kappa;
  const double sh = std::sinh(kappa);
  return 1.0 / kappa - kappa / (sh * sh);
}

double mean_resultant_length(double kappa) {
  check_kappa(kappa);
  if (kappa < 1e-4) return kappa / 3.0;
  return 1.0 / std::tanh(kappa) - 1.0 / kappa;
}

DoaAngles to_angles(const Vec3& v) {
  const double n = v.norm();
  if (!(n > 0.0)) throw ArgumentError("cannot convert a zero vector to angles");
  const Vec3 u = v / n;
  DoaAngles a;
  a.elevation = std::asin(std::clamp(u.z(), -1.0, 1.0));
  const double horiz = std::hypot(u.x(), u.y());
  a.azimuth = horiz < 1e-12 ? 0.0 : std::atan2(u.y(), u.x());
  if (a.azimuth == -kPi) a.azimuth = kPi;
  return a;
}

Vec3 from_angles(const DoaAngles& a) {
  const double ce = std::cos(a.elevation);
  return {ce * std::cos(a.azimuth), ce * std::sin(a.azimuth), std::sin(a.elevation)};
}

}  // namespace physdoa
