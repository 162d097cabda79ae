#include "physdoa/srp.hpp"

#include <algorithm>
#include <cmath>

#include "physdoa/physdec.hpp"
#include "physdoa/vmf.hpp"

namespace physdoa {

SrpGrid SrpGrid::make(int n_az, int n_el) {
  if (n_az < 1 || n_el < 1) throw ArgumentError("grid sizes must be positive");
  SrpGrid g;
  g.n_az = n_az;
  g.n_el = n_el;
  for (int i = 0; i < n_az; ++i) g.azimuths.push_back(-kPi + 2.0 * kPi * (i + 0.5) / n_az);
  for (int j = 0; j < n_el; ++j) g.elevations.push_back(-kPi / 2.0 + kPi * (j + 0.5) / n_el);
  for (int i = 0; i < n_az; ++i)
    for (int j = 0; j < n_el; ++j)
      g.directions.push_back(from_angles({g.azimuths[static_cast<std::size_t>(i)], g.elevations[static_cast<std::size_t>(j)]}));
  return g;
}

namespace {

struct Tap {
  std::size_t lo;
  double w;  // weight of lo + 1
};

Tap lag_tap(double tau, const LagGrid& lags, SrpInterp interp) {
  const std::size_t G = lags.size();
  const double pos = std::clamp((tau - lags.lags.front()) / lags.spacing(), 0.0, static_cast<double>(G - 1));
  if (interp == SrpInterp::Nearest) return {static_cast<std::size_t>(std::lround(pos)), 0.0};
  auto lo = static_cast<std::size_t>(std::floor(pos));
  if (lo >= G - 1) return {G - 1, 0.0};
  return {lo, pos - static_cast<double>(lo)};
}

}  // namespace

template <typename T>
Eigen::MatrixXd srp_phat_map(const Tensor3<T>& g, const LagGrid& lags, const std::vector<MicPair>& pairs,
                             double speed_of_sound, double sample_rate, const SrpGrid& grid, SrpInterp interp) {
  if (g.dim0() != pairs.size()) throw ShapeError("pair count does not match features");
  if (g.dim2() != lags.size()) throw ShapeError("lag grid does not match features");
  const std::size_t P = pairs.size(), F = g.dim1(), D = grid.size();
  std::vector<Tap> taps(D * P);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t k = 0; k < P; ++k)
      taps[d * P + k] = lag_tap(pairwise_delay(grid.directions[d], pairs[k], speed_of_sound, sample_rate), lags, interp);
  Eigen::MatrixXd map = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(D));
  for (std::size_t t = 0; t < F; ++t)
    for (std::size_t d = 0; d < D; ++d) {
      double s = 0.0;
      for (std::size_t k = 0; k < P; ++k) {
        const Tap& tp = taps[d * P + k];
        const T* row = g.row(k, t);
        s += (1.0 - tp.w) * row[tp.lo];
        if (tp.w > 0.0) s += tp.w * row[tp.lo + 1];
      }
      map(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = s;
    }
  return map;
}

template Eigen::MatrixXd srp_phat_map<float>(const Tensor3<float>&, const LagGrid&, const std::vector<MicPair>&,
                                             double, double, const SrpGrid&, SrpInterp);
template Eigen::MatrixXd srp_phat_map<double>(const Tensor3<double>&, const LagGrid&, const std::vector<MicPair>&,
                                              double, double, const SrpGrid&, SrpInterp);

SrpTrack srp_argmax(const Eigen::MatrixXd& map, const std::vector<double>& mask, const SrpGrid& grid) {
  if (mask.size() != static_cast<std::size_t>(map.rows())) throw ShapeError("mask length does not match map");
  if (static_cast<std::size_t>(map.cols()) != grid.size()) throw ShapeError("map width does not match grid");
  SrpTrack out;
  bool have = false;
  std::size_t prev = 0;
  for (Eigen::Index t = 0; t < map.rows(); ++t) {
    std::size_t cell = prev;
    if (mask[static_cast<std::size_t>(t)] > 0.0 || !have) {
      Eigen::Index best = 0;
      for (Eigen::Index d = 1; d < map.cols(); ++d)
        if (map(t, d) > map(t, best)) best = d;
      cell = static_cast<std::size_t>(best);
      if (mask[static_cast<std::size_t>(t)] > 0.0) have = true;
    }
    prev = cell;
    out.cells.push_back(cell);
    out.directions.push_back(grid.directions[cell]);
  }
  return out;
}

Eigen::MatrixXd physics_likelihood_map(const DelayDistribution& p_in, const LagGrid& lags,
                                       const std::vector<MicPair>& pairs, double speed_of_sound,
                                       double sample_rate, const SrpGrid& grid, double sigma) {
  if (p_in.dim0() != pairs.size() || p_in.dim2() != lags.size()) throw ShapeError("input distribution shape mismatch");
  const std::size_t P = pairs.size(), F = p_in.dim1(), G = lags.size(), D = grid.size();
  // p_dec depends only on (cell, pair); tabulate once.
  std::vector<double> pdec(D * P * G);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t k = 0; k < P; ++k) {
      const std::span<double> row(pdec.data() + (d * P + k) * G, G);
      delay_log_likelihood(pairwise_delay(grid.directions[d], pairs[k], speed_of_sound, sample_rate), lags.lags, sigma, row);
      for (double& v : row) v = std::exp(v);
    }
  Eigen::MatrixXd map(static_cast<Eigen::Index>(F), static_cast<Eigen::Index>(D));
  for (std::size_t t = 0; t < F; ++t)
    for (std::size_t d = 0; d < D; ++d) {
      double s = 0.0;
      for (std::size_t k = 0; k < P; ++k) {
        const double* p = p_in.row(k, t);
        const double* q = pdec.data() + (d * P + k) * G;
        for (std::size_t l = 0; l < G; ++l) s += p[l] * q[l];
      }
      map(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(d)) = s;
    }
  return map;
}

DelayDistribution sharpen_to_argmax(const DelayDistribution& p) {
  DelayDistribution out(p.dim0(), p.dim1(), p.dim2(), 0.0);
  for (std::size_t k = 0; k < p.dim0(); ++k)
    for (std::size_t t = 0; t < p.dim1(); ++t) {
      const double* r = p.row(k, t);
      out(k, t, static_cast<std::size_t>(std::max_element(r, r + p.dim2()) - r)) = 1.0;
    }
  return out;
}

}  // namespace physdoa
