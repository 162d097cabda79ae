#include "physdoa/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <mutex>

#include <fftw3.h>

namespace physdoa {

namespace {

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

class RealFft {
 public:
  explicit RealFft(int n) : n_(n) {
    in_ = fftw_alloc_real(static_cast<std::size_t>(n));
    out_ = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    std::lock_guard lock(fftw_plan_mutex());
    plan_ = fftw_plan_dft_r2c_1d(n, in_, out_, FFTW_ESTIMATE);
  }
  ~RealFft() {
    std::lock_guard lock(fftw_plan_mutex());
    fftw_destroy_plan(plan_);
    fftw_free(in_);
    fftw_free(out_);
  }
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;

  double* input() { return in_; }
  const fftw_complex* output() const { return out_; }
  void run() { fftw_execute(plan_); }

 private:
  int n_;
  double* in_;
  fftw_complex* out_;
  fftw_plan plan_;
};

}  // namespace

std::size_t stft_frame_count(std::size_t length, int window, int hop) {
  if (hop <= 0) throw ArgumentError("hop must be positive");
  if (window <= 0) throw ArgumentError("window must be positive");
  if (length < static_cast<std::size_t>(window)) return 0;
  return (length - static_cast<std::size_t>(window)) / static_cast<std::size_t>(hop) + 1;
}

Spectrogram stft(const Eigen::MatrixXd& x, int window, int hop) {
  const std::size_t frames = stft_frame_count(static_cast<std::size_t>(x.cols()), window, hop);
  if (frames == 0) throw ArgumentError("signal shorter than the STFT window");
  const int bins = window / 2 + 1;

  std::vector<double> hann(static_cast<std::size_t>(window));
  for (int n = 0; n < window; ++n) hann[n] = 0.5 - 0.5 * std::cos(2.0 * kPi * n / window);

  Spectrogram s;
  s.window = window;
  s.hop = hop;
  RealFft fft(window);
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    ComplexFrames spec(static_cast<Eigen::Index>(frames), bins);
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t start = t * static_cast<std::size_t>(hop);
      double* in = fft.input();
      for (int n = 0; n < window; ++n) in[n] = hann[n] * x(c, static_cast<Eigen::Index>(start + n));
      fft.run();
      const fftw_complex* out = fft.output();
      for (int k = 0; k < bins; ++k) spec(static_cast<Eigen::Index>(t), k) = {out[k][0], out[k][1]};
    }
    s.channels.push_back(std::move(spec));
  }
  return s;
}

LagGrid make_lag_grid(double tau_max, std::size_t bins, int window) {
  if (!(tau_max > 0.0) || !std::isfinite(tau_max)) throw ConfigError("tau_max must be positive");
  if (bins < 2) throw ConfigError("lag grid needs at least 2 bins");
  if (tau_max >= window / 2.0) throw ConfigError("tau_max exceeds the circular lag range of the window");
  LagGrid g;
  g.tau_max = tau_max;
  g.lags.resize(bins);
  for (std::size_t l = 0; l < bins; ++l)
    g.lags[l] = -tau_max + 2.0 * tau_max * static_cast<double>(l) / static_cast<double>(bins - 1);
  return g;
}

GccPhat::GccPhat(int window, LagGrid grid) : window_(window), grid_(std::move(grid)) {
  const int bins = window / 2 + 1;
  const auto G = static_cast<Eigen::Index>(grid_.size());
  basis_.resize(2 * bins, G);
  for (int f = 0; f < bins; ++f) {
    const double weight = (f == 0 || f == window / 2) ? 1.0 : 2.0;
    for (Eigen::Index l = 0; l < G; ++l) {
      const double theta = 2.0 * kPi * f * grid_.lags[static_cast<std::size_t>(l)] / window;
      basis_(2 * f, l) = weight * std::cos(theta) / window;
      basis_(2 * f + 1, l) = weight * std::sin(theta) / window;
    }
  }
}

Eigen::MatrixXd GccPhat::operator()(const ComplexFrames& xi, const ComplexFrames& xj) const {
  if (xi.rows() != xj.rows() || xi.cols() != xj.cols()) throw ShapeError("GCC-PHAT spectra shapes differ");
  if (xi.cols() != window_ / 2 + 1) throw ShapeError("spectrum width does not match the window");
  Eigen::MatrixXd phase(xi.rows(), 2 * xi.cols());
  for (Eigen::Index t = 0; t < xi.rows(); ++t) {
    for (Eigen::Index f = 0; f < xi.cols(); ++f) {
      const std::complex<double> cross = xi(t, f) * std::conj(xj(t, f));
      const double mag = std::abs(xi(t, f)) * std::abs(xj(t, f));
      const std::complex<double> phi = mag > 1e-20 ? cross / mag : std::complex<double>{};
      phase(t, 2 * f) = phi.real();
      phase(t, 2 * f + 1) = phi.imag();
    }
  }
  return phase * basis_;
}

GccFeatures extract_gcc(const Eigen::MatrixXd& signals, const std::vector<MicPair>& pairs,
                        const LagGrid& grid, const StftConfig& cfg, double sample_rate) {
  const Spectrogram spec = stft(signals, cfg.window, cfg.hop);
  const GccPhat gcc(cfg.window, grid);
  GccFeatures f;
  f.grid = grid;
  f.values = Tensor3<float>(pairs.size(), spec.frames(), grid.size());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    if (pairs[p].i >= spec.channels.size() || pairs[p].j >= spec.channels.size())
      throw ShapeError("pair index exceeds channel count");
    const Eigen::MatrixXd g = gcc(spec.channels[pairs[p].i], spec.channels[pairs[p].j]);
    for (Eigen::Index t = 0; t < g.rows(); ++t)
      for (Eigen::Index l = 0; l < g.cols(); ++l)
        f.values(p, static_cast<std::size_t>(t), static_cast<std::size_t>(l)) = static_cast<float>(g(t, l));
  }
  f.frame_times.resize(spec.frames());
  for (std::size_t t = 0; t < spec.frames(); ++t)
    f.frame_times[t] = (static_cast<double>(t) * cfg.hop + cfg.window / 2.0) / sample_rate;
  return f;
}

void normalize_gcc_slice(const double* in, double* out, std::size_t n, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("eps must be positive");
  double mean = 0.0;
  for (std::size_t l = 0; l < n; ++l) mean += in[l];
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t l = 0; l < n; ++l) var += (in[l] - mean) * (in[l] - mean);
  var /= static_cast<double>(n);
  for (std::size_t l = 0; l < n; ++l) out[l] = (in[l] - mean) / (var + eps);
}

Tensor3<double> normalize_gcc(const Tensor3<float>& g, double eps) {
  Tensor3<double> out(g.dim0(), g.dim1(), g.dim2());
  std::vector<double> tmp(g.dim2());
  for (std::size_t p = 0; p < g.dim0(); ++p)
    for (std::size_t t = 0; t < g.dim1(); ++t) {
      std::copy_n(g.row(p, t), g.dim2(), tmp.begin());
      normalize_gcc_slice(tmp.data(), out.row(p, t), g.dim2(), eps);
    }
  return out;
}

Tensor3<float> encoder_input(const Tensor3<float>& g, double eps) {
  const Tensor3<double> n = normalize_gcc(g, eps);
  Tensor3<float> out(n.dim0(), n.dim1(), n.dim2());
  std::transform(n.data().begin(), n.data().end(), out.data().begin(), [](double v) { return static_cast<float>(v); });
  return out;
}

void softmax(const double* logits, double* out, std::size_t n) {
  const double mx = *std::max_element(logits, logits + n);
  double sum = 0.0;
  for (std::size_t l = 0; l < n; ++l) sum += (out[l] = std::exp(logits[l] - mx));
  for (std::size_t l = 0; l < n; ++l) out[l] /= sum;
}

DelayDistribution input_delay_distribution(const Tensor3<double>& normalized, double lambda) {
  if (!(lambda > 0.0)) throw ArgumentError("lambda must be positive");
  DelayDistribution p(normalized.dim0(), normalized.dim1(), normalized.dim2());
  std::vector<double> logits(normalized.dim2());
  for (std::size_t a = 0; a < normalized.dim0(); ++a)
    for (std::size_t t = 0; t < normalized.dim1(); ++t) {
      const double* in = normalized.row(a, t);
      for (std::size_t l = 0; l < logits.size(); ++l) logits[l] = lambda * in[l];
      softmax(logits.data(), p.row(a, t), logits.size());
    }
  return p;
}

namespace {

struct InterpWeight {
  std::size_t lo, hi;
  double frac;
};

std::vector<InterpWeight> interp_weights(std::size_t from, std::size_t to) {
  if (from == 0 || to == 0) throw ArgumentError("time axes must be non-empty");
  std::vector<InterpWeight> w(to);
  for (std::size_t k = 0; k < to; ++k) {
    const double pos = to == 1 ? 0.0
                               : static_cast<double>(k) * static_cast<double>(from - 1) /
                                     static_cast<double>(to - 1);
    auto lo = static_cast<std::size_t>(std::floor(pos));
    lo = std::min(lo, from - 1);
    const std::size_t hi = std::min(lo + 1, from - 1);
    w[k] = {lo, hi, pos - static_cast<double>(lo)};
  }
  return w;
}

}  // namespace

Eigen::MatrixXd interpolate_time_axis(const Eigen::MatrixXd& x, std::size_t target_rows) {
  const auto w = interp_weights(static_cast<std::size_t>(x.rows()), target_rows);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(target_rows), x.cols());
  for (std::size_t k = 0; k < target_rows; ++k)
    out.row(static_cast<Eigen::Index>(k)) = (1.0 - w[k].frac) * x.row(static_cast<Eigen::Index>(w[k].lo)) +
                                            w[k].frac * x.row(static_cast<Eigen::Index>(w[k].hi));
  return out;
}

std::vector<double> interpolate_time_axis(const std::vector<double>& x, std::size_t target) {
  const auto w = interp_weights(x.size(), target);
  std::vector<double> out(target);
  for (std::size_t k = 0; k < target; ++k) out[k] = (1.0 - w[k].frac) * x[w[k].lo] + w[k].frac * x[w[k].hi];
  return out;
}

std::vector<Vec3> interpolate_directions(const std::vector<Vec3>& x, std::size_t target) {
  const auto w = interp_weights(x.size(), target);
  std::vector<Vec3> out(target);
  for (std::size_t k = 0; k < target; ++k) {
    Vec3 v = (1.0 - w[k].frac) * x[w[k].lo] + w[k].frac * x[w[k].hi];
    const double n = v.norm();
    out[k] = n > 1e-12 ? Vec3(v / n) : x[w[k].lo];
  }
  return out;
}

template <typename T>
Tensor3<T> interpolate_time_axis(const Tensor3<T>& x, std::size_t target) {
  const auto w = interp_weights(x.dim1(), target);
  Tensor3<T> out(x.dim0(), target, x.dim2());
  for (std::size_t a = 0; a < x.dim0(); ++a)
    for (std::size_t k = 0; k < target; ++k) {
      const T* lo = x.row(a, w[k].lo);
      const T* hi = x.row(a, w[k].hi);
      T* o = out.row(a, k);
      const double f = w[k].frac;
      for (std::size_t l = 0; l < x.dim2(); ++l) o[l] = static_cast<T>((1.0 - f) * lo[l] + f * hi[l]);
    }
  return out;
}

template Tensor3<float> interpolate_time_axis(const Tensor3<float>&, std::size_t);
template Tensor3<double> interpolate_time_axis(const Tensor3<double>&, std::size_t);

DelayDistribution interpolate_distribution(const DelayDistribution& p, std::size_t target) {
  DelayDistribution out = interpolate_time_axis(p, target);
  for (std::size_t a = 0; a < out.dim0(); ++a)
    for (std::size_t t = 0; t < out.dim1(); ++t) {
      double* r = out.row(a, t);
      double s = 0.0;
      for (std::size_t l = 0; l < out.dim2(); ++l) s += r[l];
      for (std::size_t l = 0; l < out.dim2(); ++l) r[l] /= s;
    }
  return out;
}

DelayDistribution latent_input_distribution(const Tensor3<float>& g, std::size_t target, double lambda,
                                            double eps) {
  const Tensor3<float> gi = interpolate_time_axis(g, target);
  return input_delay_distribution(normalize_gcc(gi, eps), lambda);
}

// Feature cache layout (all fields little-endian):
//   char[8]  magic "PDOAGCC1"
//   u32      version (1)
//   u32      P, T, G
//   f64      tau_max
//   f64[G]   lag centres (samples)
//   f64[T]   frame times (seconds)
//   f32[P*T*G] values, row-major (pair, frame, lag)
namespace {
constexpr char kCacheMagic[8] = {'P', 'D', 'O', 'A', 'G', 'C', 'C', '1'};
static_assert(std::endian::native == std::endian::little, "feature cache assumes a little-endian host");

template <typename T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T get(std::istream& i) {
  T v{};
  i.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!i) throw IoError("truncated feature cache");
  return v;
}
}  // namespace

void save_feature_cache(const GccFeatures& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kCacheMagic, 8);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.pairs()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.frames()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(f.lags()));
  put<double>(out, f.grid.tau_max);
  for (double l : f.grid.lags) put(out, l);
  for (double t : f.frame_times) put(out, t);
  out.write(reinterpret_cast<const char*>(f.values.data().data()),
            static_cast<std::streamsize>(f.values.size() * sizeof(float)));
}

GccFeatures load_feature_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCacheMagic, 8) != 0) throw IoError(path.string() + ": bad feature cache magic");
  if (get<std::uint32_t>(in) != 1) throw IoError(path.string() + ": unsupported feature cache version");
  const auto P = get<std::uint32_t>(in), T = get<std::uint32_t>(in), G = get<std::uint32_t>(in);
  GccFeatures f;
  f.grid.tau_max = get<double>(in);
  f.grid.lags.resize(G);
  for (auto& l : f.grid.lags) l = get<double>(in);
  f.frame_times.resize(T);
  for (auto& t : f.frame_times) t = get<double>(in);
  f.values = Tensor3<float>(P, T, G);
  in.read(reinterpret_cast<char*>(f.values.data().data()),
          static_cast<std::streamsize>(f.values.size() * sizeof(float)));
  if (!in) throw IoError(path.string() + ": truncated feature values");
  return f;
}

}  // namespace physdoa
