#pragma once

#include <complex>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "physdoa/geometry.hpp"
#include "physdoa/tensor.hpp"

namespace physdoa {

using ComplexFrames = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// One T x (window/2 + 1) complex matrix per channel.
struct Spectrogram {
  std::vector<ComplexFrames> channels;
  int window = 0;
  int hop = 0;
  std::size_t frames() const { return channels.empty() ? 0 : static_cast<std::size_t>(channels[0].rows()); }
};

struct StftConfig {
  int window = 4096;
  int hop = 3072;  // 0.75 * window
};

std::size_t stft_frame_count(std::size_t length, int window, int hop);

/// Periodic Hann analysis window, real FFT per frame. x is channels x L.
Spectrogram stft(const Eigen::MatrixXd& x, int window, int hop);

/// G uniformly spaced lag centres spanning [-tau_max, tau_max] (samples).
struct LagGrid {
  std::vector<double> lags;
  double tau_max = 0.0;
  std::size_t size() const { return lags.size(); }
  double spacing() const { return lags.size() > 1 ? lags[1] - lags[0] : 0.0; }
  bool operator==(const LagGrid&) const = default;
};

LagGrid make_lag_grid(double tau_max, std::size_t bins, int window);

/// Evaluates the GCC-PHAT of a channel pair at arbitrary lags. Positive lag
/// means channel i leads channel j (j is a delayed copy of i).
class GccPhat {
 public:
  GccPhat(int window, LagGrid grid);
  /// T x G matrix for the pair (X_i, X_j).
  Eigen::MatrixXd operator()(const ComplexFrames& xi, const ComplexFrames& xj) const;
  const LagGrid& grid() const { return grid_; }

 private:
  int window_;
  LagGrid grid_;
  Eigen::MatrixXd basis_;  // (2 * bins) x G; rows interleave cos / sin terms
};

struct GccFeatures {
  Tensor3<float> values;  // pairs x frames x lags
  LagGrid grid;
  std::vector<double> frame_times;  // seconds, frame centres
  std::size_t pairs() const { return values.dim0(); }
  std::size_t frames() const { return values.dim1(); }
  std::size_t lags() const { return values.dim2(); }
};

GccFeatures extract_gcc(const Eigen::MatrixXd& signals, const std::vector<MicPair>& pairs,
                        const LagGrid& grid, const StftConfig& cfg, double sample_rate);

/// Per (pair, frame): subtract lag-mean, divide by lag-variance + eps.
Tensor3<double> normalize_gcc(const Tensor3<float>& g, double eps = 1e-5);
void normalize_gcc_slice(const double* in, double* out, std::size_t n, double eps);

/// Encoder input: the normalized features in single precision.
Tensor3<float> encoder_input(const Tensor3<float>& g, double eps = 1e-5);

/// Softmax over lags of lambda * normalized features.
using DelayDistribution = Tensor3<double>;
DelayDistribution input_delay_distribution(const Tensor3<double>& normalized, double lambda);
void softmax(const double* logits, double* out, std::size_t n);

/// Linear interpolation along rows onto target_rows points spanning the
/// same extent (first and last rows map onto each other).
Eigen::MatrixXd interpolate_time_axis(const Eigen::MatrixXd& x, std::size_t target_rows);
std::vector<double> interpolate_time_axis(const std::vector<double>& x, std::size_t target);
/// Unit vectors: interpolated then renormalized.
std::vector<Vec3> interpolate_directions(const std::vector<Vec3>& x, std::size_t target);
/// Interpolates each pair's (T x G) slice along time.
template <typename T>
Tensor3<T> interpolate_time_axis(const Tensor3<T>& x, std::size_t target);
/// Interpolates a DelayDistribution and renormalizes every row to sum 1.
DelayDistribution interpolate_distribution(const DelayDistribution& p, std::size_t target);

/// Input delay distribution on the latent time axis: GCC interpolated to
/// target frames, normalized, then softmax-weighted.
DelayDistribution latent_input_distribution(const Tensor3<float>& g, std::size_t target, double lambda,
                                            double eps = 1e-5);

void save_feature_cache(const GccFeatures& f, const std::filesystem::path& path);
GccFeatures load_feature_cache(const std::filesystem::path& path);

}  // namespace physdoa
