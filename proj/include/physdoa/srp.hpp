#pragma once

#include <vector>

#include <Eigen/Core>

#include "physdoa/features.hpp"
#include "physdoa/geometry.hpp"

namespace physdoa {

/// Rectangular azimuth x elevation grid of cell-centre directions. Flat
/// index is i_az * n_el + j_el.
struct SrpGrid {
  int n_az = 64;
  int n_el = 32;
  std::vector<double> azimuths;
  std::vector<double> elevations;
  std::vector<Vec3> directions;

  static SrpGrid make(int n_az = 64, int n_el = 32);
  std::size_t size() const { return directions.size(); }
  std::size_t index(int i_az, int j_el) const { return static_cast<std::size_t>(i_az * n_el + j_el); }
};

enum class SrpInterp { Linear, Nearest };

/// Scores (T x cells): sum over pairs of g_k(t, tau_k(d)). g is (P, T, G).
template <typename T>
Eigen::MatrixXd srp_phat_map(const Tensor3<T>& g, const LagGrid& lags, const std::vector<MicPair>& pairs,
                             double speed_of_sound, double sample_rate, const SrpGrid& grid,
                             SrpInterp interp = SrpInterp::Linear);

struct SrpTrack {
  std::vector<std::size_t> cells;
  std::vector<Vec3> directions;
};

/// Per active frame the max-score cell (lowest flat index on ties);
/// inactive frames repeat the previous estimate. Leading inactive frames use
/// their own argmax.
SrpTrack srp_argmax(const Eigen::MatrixXd& map, const std::vector<double>& mask, const SrpGrid& grid);

/// Physics-decoder alignment score of every grid direction at a fixed
/// sigma: sum_k sum_tau p_in(tau) p_dec(tau | d). As sigma -> 0 this is SRP
/// with nearest-lag lookup on p_in. Returns (T x cells).
Eigen::MatrixXd physics_likelihood_map(const DelayDistribution& p_in, const LagGrid& lags,
                                       const std::vector<MicPair>& pairs, double speed_of_sound,
                                       double sample_rate, const SrpGrid& grid, double sigma);

/// One-hot distribution at each (pair, frame) argmax: the lambda -> infinity
/// limit of the input distribution.
DelayDistribution sharpen_to_argmax(const DelayDistribution& p);

}  // namespace physdoa
